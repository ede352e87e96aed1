use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::uniform_share;
use crate::error::{Error, Result};

/// Which messages the user cached from which database during prefetching.
///
/// Indices are zero-based internally; the JSON file form is one-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrefetchPlan {
    messages: usize,
    assignments: Vec<BTreeSet<usize>>,
}

impl PrefetchPlan {
    /// Builds a plan, checking that the per-database sets are disjoint and in
    /// range. Non-uniform plans are allowed here.
    pub fn new(messages: usize, assignments: Vec<BTreeSet<usize>>) -> Result<Self> {
        if assignments.len() < 2 {
            return Err(Error::Plan(format!(
                "a plan needs at least 2 databases, got {}",
                assignments.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for (n, set) in assignments.iter().enumerate() {
            for &k in set {
                if k >= messages {
                    return Err(Error::Plan(format!(
                        "database {} provides message {} but K = {messages}",
                        n + 1,
                        k + 1
                    )));
                }
                if !seen.insert(k) {
                    return Err(Error::Plan(format!(
                        "message {} is cached from more than one database",
                        k + 1
                    )));
                }
            }
        }
        Ok(PrefetchPlan {
            messages,
            assignments,
        })
    }

    /// A plan with nothing cached.
    pub fn empty(databases: usize, messages: usize) -> Self {
        PrefetchPlan {
            messages,
            assignments: vec![BTreeSet::new(); databases],
        }
    }

    pub fn databases(&self) -> usize {
        self.assignments.len()
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    /// Messages cached from database `n`.
    pub fn provided_by(&self, n: usize) -> &BTreeSet<usize> {
        &self.assignments[n]
    }

    pub fn assignments(&self) -> &[BTreeSet<usize>] {
        &self.assignments
    }

    /// All cached messages.
    pub fn cached(&self) -> BTreeSet<usize> {
        self.assignments.iter().flatten().copied().collect()
    }

    pub fn cache_size(&self) -> usize {
        self.assignments.iter().map(BTreeSet::len).sum()
    }

    pub fn is_cached(&self, k: usize) -> bool {
        self.assignments.iter().any(|s| s.contains(&k))
    }

    /// `Some(m)` when every database provided exactly `m` messages.
    pub fn uniform_share(&self) -> Option<usize> {
        let m = self.assignments[0].len();
        self.assignments.iter().all(|s| s.len() == m).then_some(m)
    }

    /// Messages visible at database `n`: everything it did not provide.
    pub fn active_at(&self, n: usize) -> Vec<usize> {
        (0..self.messages)
            .filter(|k| !self.assignments[n].contains(k))
            .collect()
    }

    pub fn to_file(&self) -> PlanFile {
        PlanFile(
            self.assignments
                .iter()
                .enumerate()
                .map(|(n, s)| ((n + 1).to_string(), s.iter().map(|k| k + 1).collect()))
                .collect(),
        )
    }

    /// Reads a one-based plan file. Databases missing from the map provide
    /// nothing.
    pub fn from_file(file: &PlanFile, databases: usize, messages: usize) -> Result<Self> {
        let mut assignments = vec![BTreeSet::new(); databases];
        for (key, list) in &file.0 {
            let n: usize = key
                .trim()
                .parse()
                .map_err(|_| Error::Plan(format!("bad database key {key:?}")))?;
            if n == 0 || n > databases {
                return Err(Error::Plan(format!("database {n} outside 1..={databases}")));
            }
            for &k in list {
                if k == 0 || k > messages {
                    return Err(Error::Plan(format!("message {k} outside 1..={messages}")));
                }
                if !assignments[n - 1].insert(k - 1) {
                    return Err(Error::Plan(format!(
                        "message {k} listed twice for database {n}"
                    )));
                }
            }
        }
        PrefetchPlan::new(messages, assignments)
    }
}

/// On-disk plan: a JSON object mapping one-based database index to the
/// one-based message indices it provided, e.g. `{"1": [3], "2": [4]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanFile(pub BTreeMap<String, Vec<usize>>);

/// Uniform prefetching: `M / N` distinct messages drawn from each database,
/// uniformly without replacement. Database 1 gets the first `m` draws,
/// database 2 the next `m`, and so on.
pub fn uniform_prefetch(
    databases: usize,
    messages: usize,
    cache: usize,
    seed: u64,
) -> Result<PrefetchPlan> {
    let m = uniform_share(databases, messages, cache)?;
    if m == 0 {
        return Ok(PrefetchPlan::empty(databases, messages));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draws = rand::seq::index::sample(&mut rng, messages, cache).into_vec();
    PrefetchPlan::new(
        messages,
        draws
            .chunks(m)
            .map(|c| c.iter().copied().collect())
            .collect(),
    )
}
