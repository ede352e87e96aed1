use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::table::QueryTable;
use crate::error::{Error, Result};

/// What one database can observe about the structure of its query rows,
/// with message identities replaced by their rank among the messages the
/// database did not provide and symbol indices reduced to use counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StructuralSignature {
    /// Number of rows with `r + 1` terms at position `r`.
    pub round_profile: Vec<usize>,
    /// Row count per set of message ranks, sorted by ranks.
    pub subsets: Vec<(Vec<usize>, usize)>,
    /// Per message rank: the use count of every distinct symbol index,
    /// sorted descending.
    pub multiplicities: Vec<Vec<usize>>,
}

impl StructuralSignature {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("signature serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Rank sets whose row counts differ between `self` and `other`.
    pub fn subset_differences(&self, other: &StructuralSignature) -> Vec<Vec<usize>> {
        let a: BTreeMap<_, _> = self.subsets.iter().cloned().collect();
        let b: BTreeMap<_, _> = other.subsets.iter().cloned().collect();
        let mut keys: Vec<_> = a.keys().chain(b.keys()).cloned().collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().filter(|k| a.get(k) != b.get(k)).collect()
    }
}

/// Canonical structure of the rows sent to database `n`.
pub fn structural_signature(table: &QueryTable, n: usize) -> Result<StructuralSignature> {
    if n >= table.databases() {
        return Err(Error::Domain(format!(
            "database {} outside 1..={}",
            n + 1,
            table.databases()
        )));
    }
    let visible = table.plan().active_at(n);
    let rank: HashMap<usize, usize> = visible.iter().enumerate().map(|(r, &k)| (k, r)).collect();

    let rows = table.rows(n);
    let longest = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut round_profile = vec![0; longest];
    let mut subsets: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut uses: Vec<HashMap<u32, usize>> = vec![HashMap::new(); visible.len()];

    for row in rows {
        round_profile[row.len() - 1] += 1;
        let mut ranks = Vec::with_capacity(row.len());
        for t in row.terms() {
            let r = *rank.get(&t.message).ok_or_else(|| {
                Error::Internal(format!(
                    "database {} sees message {} it provided",
                    n + 1,
                    t.message + 1
                ))
            })?;
            ranks.push(r);
            *uses[r].entry(t.index).or_default() += 1;
        }
        ranks.sort_unstable();
        *subsets.entry(ranks).or_default() += 1;
    }

    let multiplicities = uses
        .into_iter()
        .map(|m| {
            let mut counts: Vec<usize> = m.into_values().collect();
            counts.sort_unstable_by(|a, b| b.cmp(a));
            counts
        })
        .collect();

    Ok(StructuralSignature {
        round_profile,
        subsets: subsets.into_iter().collect(),
        multiplicities,
    })
}
