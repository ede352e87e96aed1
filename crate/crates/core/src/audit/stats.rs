use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a two-sample chi-square homogeneity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// Critical value at the chosen significance.
    pub threshold: f64,
    pub categories: usize,
    pub pass: bool,
}

/// Tests whether two samples of categorical outcomes come from the same
/// distribution. Passes iff the statistic is below the `1 - alpha` quantile
/// of the chi-square distribution with `categories - 1` degrees of freedom.
pub fn two_sample_chi_square<K: Eq + Hash + Ord>(
    a: &HashMap<K, u64>,
    b: &HashMap<K, u64>,
    alpha: f64,
) -> ChiSquareOutcome {
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let total = (na + nb) as f64;
    let categories = keys.len();

    if categories < 2 || na == 0 || nb == 0 {
        return ChiSquareOutcome {
            statistic: 0.0,
            degrees_of_freedom: 0,
            p_value: 1.0,
            threshold: f64::INFINITY,
            categories,
            pass: true,
        };
    }

    let statistic: f64 = keys
        .iter()
        .map(|k| {
            let oa = a.get(*k).copied().unwrap_or(0) as f64;
            let ob = b.get(*k).copied().unwrap_or(0) as f64;
            let pooled = oa + ob;
            let ea = pooled * na as f64 / total;
            let eb = pooled * nb as f64 / total;
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();

    let dof = categories - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    let threshold = dist.inverse_cdf(1.0 - alpha);
    let p_value = 1.0 - dist.cdf(statistic);
    ChiSquareOutcome {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        threshold,
        categories,
        pass: statistic < threshold,
    }
}
