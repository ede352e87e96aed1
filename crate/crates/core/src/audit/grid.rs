use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{optimal_cost, uniform_share, Rational};
use crate::engine::{run_retrieval_with, MessageStore, SystemConfig};
use crate::error::Result;
use crate::exec::Execution;
use crate::scheme::{uniform_prefetch, PlanFile};

/// One `(N, K, M)` parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub databases: usize,
    #[serde(rename = "K")]
    pub messages: usize,
    #[serde(rename = "M")]
    pub cache: usize,
}

impl GridPoint {
    pub fn new(databases: usize, messages: usize, cache: usize) -> Self {
        GridPoint {
            databases,
            messages,
            cache,
        }
    }
}

/// Parameter points plus how many random (plan, store, table seed) trials
/// to run at each; every admissible desired message is retrieved per trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: Vec<GridPoint>,
    pub trials: usize,
    pub seed: u64,
}

impl GridSpec {
    /// All points with `N` in `databases`, `K` in `messages`, `m` in
    /// `shares`, keeping only `M = N m < K`.
    pub fn sweep(
        databases: impl IntoIterator<Item = usize>,
        messages: impl IntoIterator<Item = usize> + Clone,
        shares: impl IntoIterator<Item = usize> + Clone,
        trials: usize,
        seed: u64,
    ) -> Self {
        let mut points = Vec::new();
        for n in databases {
            for k in messages.clone() {
                for m in shares.clone() {
                    if n * m < k {
                        points.push(GridPoint::new(n, k, n * m));
                    }
                }
            }
        }
        GridSpec {
            points,
            trials,
            seed,
        }
    }

    /// `N` in {2, 3}, `K` in 2..=5, `m` in {0, 1}, one trial per point.
    pub fn desk() -> Self {
        Self::sweep([2, 3], 2..=5, 0..=1, 1, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCase {
    pub point: GridPoint,
    pub trial: usize,
    pub plan: PlanFile,
    /// One-based.
    pub desired: usize,
    pub downloaded: u64,
    #[serde(rename = "L")]
    pub message_len: u64,
    pub ratio: Rational,
    pub expected: Rational,
    pub cost_match: bool,
    pub decode_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridReport {
    pub cases: Vec<GridCase>,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Runs every retrieval of the grid and checks decoding and exact cost.
/// Results come back in grid order regardless of scheduling.
pub fn audit_capacity_grid(spec: &GridSpec, exec: Execution) -> Result<GridReport> {
    for p in &spec.points {
        uniform_share(p.databases, p.messages, p.cache)?;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let jobs: Vec<(GridPoint, usize, [u64; 3])> = spec
        .points
        .iter()
        .flat_map(|&p| (0..spec.trials).map(move |t| (p, t)))
        .map(|(p, t)| (p, t, [rng.random(), rng.random(), rng.random()]))
        .collect();

    let per_job = exec.map_slice(
        &jobs,
        |&(point, trial, [plan_seed, store_seed, table_seed])| {
            let config =
                SystemConfig::new(point.databases, point.messages, point.cache, table_seed)?;
            let plan = uniform_prefetch(point.databases, point.messages, point.cache, plan_seed)?;
            let store = MessageStore::random(&config, store_seed);
            let expected = optimal_cost(point.databases, point.messages, point.cache)?;
            (0..point.messages)
                .filter(|&k| !plan.is_cached(k))
                .map(|desired| {
                    let t = run_retrieval_with(
                        Execution::Sequential,
                        &config,
                        &plan,
                        desired,
                        &store,
                        table_seed,
                    )?;
                    let ratio = t.normalized_cost();
                    Ok(GridCase {
                        point,
                        trial,
                        plan: plan.to_file(),
                        desired: desired + 1,
                        downloaded: t.downloaded_symbols,
                        message_len: t.message_len(),
                        cost_match: ratio == expected,
                        ratio,
                        expected: expected.clone(),
                        decode_ok: t.verified,
                    })
                })
                .collect::<Result<Vec<_>>>()
        },
    );

    let mut cases = Vec::new();
    for job in per_job {
        cases.extend(job?);
    }
    let failures: Vec<String> = cases
        .iter()
        .filter(|c| !c.cost_match || !c.decode_ok)
        .map(|c| {
            format!(
                "N={} K={} M={} trial {} desired W{}: ratio {} (expected {}), decode {}",
                c.point.databases,
                c.point.messages,
                c.point.cache,
                c.trial,
                c.desired,
                c.ratio,
                c.expected,
                if c.decode_ok { "ok" } else { "FAILED" }
            )
        })
        .collect();
    Ok(GridReport {
        pass: failures.is_empty(),
        cases,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_grid_points() {
        let spec = GridSpec::desk();
        assert!(spec.points.contains(&GridPoint::new(2, 4, 2)));
        assert!(spec.points.contains(&GridPoint::new(3, 5, 3)));
        assert!(!spec.points.contains(&GridPoint::new(3, 3, 3)));
        assert!(spec
            .points
            .iter()
            .all(|p| p.cache % p.databases == 0 && p.cache < p.messages));
    }

    #[test]
    fn single_point_ratio() {
        let spec = GridSpec {
            points: vec![GridPoint::new(2, 4, 2)],
            trials: 1,
            seed: 5,
        };
        let r = audit_capacity_grid(&spec, Execution::Sequential).unwrap();
        assert!(r.pass);
        assert_eq!(r.cases.len(), 2);
        assert!(r.cases.iter().all(|c| c.ratio == Rational::new(3, 2)));
    }

    #[test]
    fn rejects_non_uniform_point() {
        let spec = GridSpec {
            points: vec![GridPoint::new(2, 4, 1)],
            trials: 1,
            seed: 0,
        };
        assert!(audit_capacity_grid(&spec, Execution::Sequential).is_err());
    }
}
