use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::stats::{two_sample_chi_square, ChiSquareOutcome};
use crate::combinatorics::{binomial, scheme_counts};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scheme::{structural_signature, Mutation, PlanFile, PrefetchPlan, TableBuilder};

/// Most (desired, plan) cases the structural audit will enumerate.
pub const STRUCTURAL_BUDGET: u64 = 10_000;

/// Most sampled rows (samples x rows per table) the statistical audit will
/// generate per admissible pair.
pub const STATISTICAL_BUDGET: u64 = 100_000_000;

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Seed used for every table in the structural audit; the signature does
/// not depend on it.
const STRUCTURAL_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyMode {
    Structural,
    Statistical,
}

/// One admissible retrieval situation: desired message and prefetch plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Situation {
    /// One-based desired message.
    pub desired: usize,
    pub plan: PlanFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDigest {
    pub situation: Situation,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PrivacyDetails {
    Structural {
        cases: Vec<CaseDigest>,
        /// Human-readable description of every case whose signature
        /// differs from the first case sharing its provided set.
        mismatches: Vec<String>,
    },
    Statistical {
        samples: usize,
        alpha: f64,
        audit_seed: u64,
        /// Rows per canonical prefix.
        prefix_rows: usize,
        pair: Vec<Situation>,
        test: ChiSquareOutcome,
    },
}

/// Verdict of one privacy audit at one database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    #[serde(rename = "N")]
    pub databases: usize,
    #[serde(rename = "K")]
    pub messages: usize,
    #[serde(rename = "M")]
    pub cache: usize,
    /// One-based database index.
    pub database: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
    pub pass: bool,
    pub details: PrivacyDetails,
}

impl PrivacyReport {
    pub fn mode(&self) -> PrivacyMode {
        match self.details {
            PrivacyDetails::Structural { .. } => PrivacyMode::Structural,
            PrivacyDetails::Statistical { .. } => PrivacyMode::Statistical,
        }
    }
}

/// Every uniform plan that keeps `provided` at database `n`, paired with every
/// admissible desired message, in lexicographic order.
fn situations(
    databases: usize,
    messages: usize,
    share: usize,
    n: usize,
    provided: &BTreeSet<usize>,
) -> Vec<(PrefetchPlan, usize)> {
    fn assign(
        db: usize,
        databases: usize,
        share: usize,
        free: &BTreeSet<usize>,
        current: &mut Vec<BTreeSet<usize>>,
        out: &mut Vec<Vec<BTreeSet<usize>>>,
    ) {
        if db == databases {
            out.push(current.clone());
            return;
        }
        if !current[db].is_empty() || share == 0 {
            assign(db + 1, databases, share, free, current, out);
            return;
        }
        for pick in free.iter().copied().combinations(share) {
            let rest: BTreeSet<usize> = free
                .difference(&pick.iter().copied().collect())
                .copied()
                .collect();
            current[db] = pick.into_iter().collect();
            assign(db + 1, databases, share, &rest, current, out);
            current[db].clear();
        }
    }

    let free: BTreeSet<usize> = (0..messages).filter(|k| !provided.contains(k)).collect();
    let mut current = vec![BTreeSet::new(); databases];
    current[n] = provided.clone();
    let mut plans = Vec::new();
    assign(0, databases, share, &free, &mut current, &mut plans);

    plans
        .into_iter()
        .map(|a| PrefetchPlan::new(messages, a).expect("enumerated plans are disjoint"))
        .flat_map(|plan| {
            let desired: Vec<usize> = (0..messages).filter(|&k| !plan.is_cached(k)).collect();
            desired.into_iter().map(move |k| (plan.clone(), k))
        })
        .collect()
}

fn message_set(set: &BTreeSet<usize>) -> String {
    let ids: Vec<String> = set.iter().map(|k| format!("W{}", k + 1)).collect();
    format!("{{{}}}", ids.join(", "))
}

fn situation(plan: &PrefetchPlan, desired: usize) -> Situation {
    Situation {
        desired: desired + 1,
        plan: plan.to_file(),
    }
}

/// Number of (desired, plan) cases over all provided sets at one database.
fn structural_case_count(databases: usize, messages: usize, share: usize) -> BigUint {
    // choose the provided set, then the others in order, then the desired message
    let mut total = BigUint::from(1u8);
    let mut left = messages;
    for _ in 0..databases {
        total *= binomial(left, share);
        left -= share;
    }
    total * BigUint::from(left)
}

fn check_database(databases: usize, n: usize) -> Result<()> {
    if n >= databases {
        return Err(Error::Domain(format!(
            "database {} outside 1..={databases}",
            n + 1
        )));
    }
    Ok(())
}

/// Exhaustive structural privacy check at database `n`: for every set of
/// messages `n` might have provided, all admissible (desired, rest of plan)
/// choices must produce the same structural signature.
pub fn audit_privacy_structural(
    databases: usize,
    messages: usize,
    cache: usize,
    n: usize,
    mutation: Option<Mutation>,
    exec: Execution,
) -> Result<PrivacyReport> {
    let counts = scheme_counts(databases, messages, cache)?;
    check_database(databases, n)?;
    let share = counts.per_database;

    let budget = structural_case_count(databases, messages, share);
    if budget > BigUint::from(STRUCTURAL_BUDGET) {
        return Err(Error::Budget(format!(
            "{budget} cases exceed the structural budget of {STRUCTURAL_BUDGET}"
        )));
    }

    let builder = TableBuilder::new().mutation(mutation);
    let mut cases = Vec::new();
    let mut mismatches = Vec::new();

    for provided in (0..messages).combinations(share) {
        let provided: BTreeSet<usize> = provided.into_iter().collect();
        let group = situations(databases, messages, share, n, &provided);
        let signatures = exec
            .map_slice(&group, |(plan, desired)| {
                let table =
                    builder.build(databases, messages, cache, *desired, plan, STRUCTURAL_SEED)?;
                structural_signature(&table, n)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let visible: Vec<usize> = (0..messages).filter(|k| !provided.contains(k)).collect();
        let name = |ranks: &[usize]| -> String {
            let ids: Vec<String> = ranks
                .iter()
                .map(|&r| format!("W{}", visible[r] + 1))
                .collect();
            format!("{{{}}}", ids.join(", "))
        };

        let reference = &signatures[0];
        for ((plan, desired), sig) in group.iter().zip(&signatures) {
            if sig != reference {
                let mut what = Vec::new();
                for subset in sig.subset_differences(reference) {
                    what.push(format!("subset {} row count differs", name(&subset)));
                }
                if sig.multiplicities != reference.multiplicities {
                    what.push("symbol reuse pattern differs".to_string());
                }
                if what.is_empty() {
                    what.push("round profile differs".to_string());
                }
                mismatches.push(format!(
                    "database {} with provided set {}: desired W{} under plan {} vs desired W{} under plan {}: {}",
                    n + 1,
                    message_set(&provided),
                    desired + 1,
                    serde_json::to_string(&plan.to_file()).unwrap_or_default(),
                    group[0].1 + 1,
                    serde_json::to_string(&group[0].0.to_file()).unwrap_or_default(),
                    what.join("; ")
                ));
            }
            cases.push(CaseDigest {
                situation: situation(plan, *desired),
                digest: sig.digest(),
            });
        }
    }

    Ok(PrivacyReport {
        databases,
        messages,
        cache,
        database: n + 1,
        mutation,
        pass: mismatches.is_empty(),
        details: PrivacyDetails::Structural { cases, mismatches },
    })
}

/// Options for [`audit_privacy_statistical`].
#[derive(Debug, Clone, Copy)]
pub struct StatisticalOptions {
    pub samples: usize,
    pub alpha: f64,
    pub audit_seed: u64,
    pub mutation: Option<Mutation>,
    pub exec: Execution,
}

impl Default for StatisticalOptions {
    fn default() -> Self {
        StatisticalOptions {
            samples: DEFAULT_SAMPLES,
            alpha: DEFAULT_ALPHA,
            audit_seed: 0,
            mutation: None,
            exec: Execution::Parallel,
        }
    }
}

/// Length of the row prefix used as the canonical outcome: the longest
/// prefix whose number of possible orderings keeps at least 20 expected
/// samples per outcome.
pub fn prefix_rows(rows: usize, samples: usize) -> usize {
    let cap = (samples / 20).max(1) as u128;
    let mut outcomes: u128 = 1;
    let mut len = 0;
    while len < rows {
        let next = outcomes * (rows - len) as u128;
        if next > cap {
            break;
        }
        outcomes = next;
        len += 1;
    }
    len.max(1)
}

/// Sampled privacy check at database `n`. Two admissible situations sharing
/// the set provided by `n` (the lowest and the highest admissible desired
/// message) are each realized `samples` times with independent seeds. Each
/// realized table is reduced to the sequence of message-rank sets of its
/// first rows as seen by database `n`, and the two outcome histograms are
/// compared with a chi-square homogeneity test.
pub fn audit_privacy_statistical(
    databases: usize,
    messages: usize,
    cache: usize,
    n: usize,
    opts: StatisticalOptions,
) -> Result<PrivacyReport> {
    let counts = scheme_counts(databases, messages, cache)?;
    check_database(databases, n)?;
    if opts.samples < 1000 {
        return Err(Error::Budget(format!(
            "statistical audit needs at least 1000 samples, got {}",
            opts.samples
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Domain(format!(
            "significance {} outside (0, 1)",
            opts.alpha
        )));
    }
    let work = (opts.samples as u64).saturating_mul(counts.p);
    if work > STATISTICAL_BUDGET {
        return Err(Error::Budget(format!(
            "{work} sampled rows exceed the statistical budget of {STATISTICAL_BUDGET}"
        )));
    }

    let share = counts.per_database;
    let provided: BTreeSet<usize> = (0..share).collect();
    let all = situations(databases, messages, share, n, &provided);
    let first = all
        .iter()
        .min_by_key(|(_, d)| *d)
        .expect("at least one admissible situation");
    let last = all
        .iter()
        .rev()
        .max_by_key(|(_, d)| *d)
        .expect("at least one admissible situation");
    let pair = vec![situation(&first.0, first.1), situation(&last.0, last.1)];
    let prefix = prefix_rows(counts.p as usize, opts.samples);

    let finish = |test: ChiSquareOutcome| PrivacyReport {
        databases,
        messages,
        cache,
        database: n + 1,
        mutation: opts.mutation,
        pass: test.pass,
        details: PrivacyDetails::Statistical {
            samples: opts.samples,
            alpha: opts.alpha,
            audit_seed: opts.audit_seed,
            prefix_rows: prefix,
            pair: pair.clone(),
            test,
        },
    };

    if first.1 == last.1 && first.0 == last.0 {
        let empty: HashMap<Vec<Vec<usize>>, u64> = HashMap::new();
        return Ok(finish(two_sample_chi_square(&empty, &empty, opts.alpha)));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(opts.audit_seed);
    let seeds: Vec<(u64, u64)> = (0..opts.samples)
        .map(|_| (rng.random(), rng.random()))
        .collect();

    let visible = first.0.active_at(n);
    let rank: HashMap<usize, usize> = visible.iter().enumerate().map(|(r, &k)| (k, r)).collect();
    let builder = TableBuilder::new().mutation(opts.mutation);

    let outcome = |plan: &PrefetchPlan, desired: usize, seed: u64| -> Result<Vec<Vec<usize>>> {
        let table = builder.build(databases, messages, cache, desired, plan, seed)?;
        Ok(table
            .rows(n)
            .iter()
            .take(prefix)
            .map(|row| row.messages().map(|k| rank[&k]).collect())
            .collect())
    };

    let sampled = opts
        .exec
        .map_slice(&seeds, |&(sa, sb)| -> Result<_> {
            Ok((
                outcome(&first.0, first.1, sa)?,
                outcome(&last.0, last.1, sb)?,
            ))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut hist_a: HashMap<Vec<Vec<usize>>, u64> = HashMap::new();
    let mut hist_b: HashMap<Vec<Vec<usize>>, u64> = HashMap::new();
    for (a, b) in sampled {
        *hist_a.entry(a).or_default() += 1;
        *hist_b.entry(b).or_default() += 1;
    }
    Ok(finish(two_sample_chi_square(&hist_a, &hist_b, opts.alpha)))
}
