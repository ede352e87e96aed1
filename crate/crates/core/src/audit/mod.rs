//! Empirical checks of the scheme's guarantees: privacy (structural and
//! sampled), zero-error decoding and exact attainment of the optimal cost.

mod grid;
mod privacy;
mod stats;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use grid::{audit_capacity_grid, GridCase, GridPoint, GridReport, GridSpec};
pub use privacy::{
    audit_privacy_statistical, audit_privacy_structural, prefix_rows, CaseDigest, PrivacyDetails,
    PrivacyMode, PrivacyReport, Situation, StatisticalOptions, DEFAULT_ALPHA, DEFAULT_SAMPLES,
    STATISTICAL_BUDGET, STRUCTURAL_BUDGET,
};
pub use stats::{two_sample_chi_square, ChiSquareOutcome};

use crate::error::Result;
use crate::exec::Execution;
use crate::scheme::Mutation;

/// Which audits to run.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    /// Structural audit runs at every database of each point.
    pub structural: Vec<GridPoint>,
    /// Statistical audit runs at database 1 of each point.
    pub statistical: Vec<GridPoint>,
    pub grid: Option<GridSpec>,
    pub samples: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mutation: Option<Mutation>,
    pub exec: Execution,
}

impl SuiteSpec {
    /// Structural audit for `N = 2`, `K <= 4`, `M` in {0, 2}; statistical
    /// audit at (2, 2, 0) and (2, 4, 2); the desk capacity grid.
    pub fn standard() -> Self {
        let structural = (1..=4)
            .flat_map(|k| [0, 2].into_iter().map(move |m| GridPoint::new(2, k, m)))
            .filter(|p| p.cache < p.messages)
            .collect();
        SuiteSpec {
            structural,
            statistical: vec![GridPoint::new(2, 2, 0), GridPoint::new(2, 4, 2)],
            grid: Some(GridSpec::desk()),
            samples: DEFAULT_SAMPLES,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            mutation: None,
            exec: Execution::Parallel,
        }
    }

    /// Every audit at a single parameter point.
    pub fn single(point: GridPoint) -> Self {
        SuiteSpec {
            structural: vec![point],
            statistical: vec![point],
            grid: Some(GridSpec {
                points: vec![point],
                trials: 1,
                seed: 0,
            }),
            ..Self::standard()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSuite {
    pub structural: Vec<PrivacyReport>,
    pub statistical: Vec<PrivacyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridReport>,
    pub pass: bool,
}

pub fn run_suite(spec: &SuiteSpec) -> Result<AuditSuite> {
    let mut structural = Vec::new();
    for p in &spec.structural {
        for n in 0..p.databases {
            structural.push(audit_privacy_structural(
                p.databases,
                p.messages,
                p.cache,
                n,
                spec.mutation,
                spec.exec,
            )?);
        }
    }
    let mut statistical = Vec::new();
    for p in &spec.statistical {
        let opts = StatisticalOptions {
            samples: spec.samples,
            alpha: spec.alpha,
            audit_seed: spec.seed,
            mutation: spec.mutation,
            exec: spec.exec,
        };
        statistical.push(audit_privacy_statistical(
            p.databases,
            p.messages,
            p.cache,
            0,
            opts,
        )?);
    }
    let grid = spec
        .grid
        .as_ref()
        .map(|g| audit_capacity_grid(g, spec.exec))
        .transpose()?;
    let pass = structural.iter().chain(&statistical).all(|r| r.pass)
        && grid.as_ref().is_none_or(|g| g.pass);
    Ok(AuditSuite {
        structural,
        statistical,
        grid,
        pass,
    })
}

impl AuditSuite {
    /// One line per audit plus the verdict.
    pub fn summary(&self) -> String {
        let verdict = |pass: bool| if pass { "PASS" } else { "FAIL" };
        let mut out = String::new();
        for r in &self.structural {
            let PrivacyDetails::Structural { cases, mismatches } = &r.details else {
                continue;
            };
            let _ = writeln!(
                out,
                "{}  structural  N={} K={} M={} db={}  {} cases{}",
                verdict(r.pass),
                r.databases,
                r.messages,
                r.cache,
                r.database,
                cases.len(),
                if mismatches.is_empty() {
                    String::new()
                } else {
                    format!(
                        ", {} mismatches; first: {}",
                        mismatches.len(),
                        mismatches[0]
                    )
                }
            );
        }
        for r in &self.statistical {
            let PrivacyDetails::Statistical {
                samples,
                alpha,
                test,
                ..
            } = &r.details
            else {
                continue;
            };
            let _ = writeln!(
                out,
                "{}  statistical N={} K={} M={} db={}  chi2={:.3} {} {:.3} (dof {}, p={:.4}, alpha={alpha}, {samples} samples)",
                verdict(r.pass),
                r.databases,
                r.messages,
                r.cache,
                r.database,
                test.statistic,
                if test.pass { "<" } else { ">=" },
                test.threshold,
                test.degrees_of_freedom,
                test.p_value,
            );
        }
        if let Some(g) = &self.grid {
            let decoded = g.cases.iter().filter(|c| c.decode_ok).count();
            let exact = g.cases.iter().filter(|c| c.cost_match).count();
            let _ = writeln!(
                out,
                "{}  capacity    {} retrievals: {decoded} decoded, {exact} at the optimal cost",
                verdict(g.pass),
                g.cases.len()
            );
            for f in &g.failures {
                let _ = writeln!(out, "      {f}");
            }
        }
        let _ = writeln!(out, "overall: {}", verdict(self.pass));
        out
    }
}
