use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use itertools::Itertools;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::plan::PrefetchPlan;
use crate::combinatorics::{rows_of_size, scheme_counts, SchemeCounts};
use crate::error::{Error, Result};

/// One symbol reference: zero-based message and zero-based symbol index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub message: usize,
    pub index: u32,
}

/// A single query row: the field sum of its terms. Terms are ordered by
/// message and no message appears twice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuerySpec {
    terms: Vec<Term>,
}

impl QuerySpec {
    pub fn new(mut terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Dimension(
                "a query row needs at least one term".into(),
            ));
        }
        terms.sort();
        if terms.windows(2).any(|w| w[0].message == w[1].message) {
            return Err(Error::Dimension(
                "a query row may reference each message once".into(),
            ));
        }
        Ok(QuerySpec { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn messages(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|t| t.message)
    }

    pub fn term_for(&self, message: usize) -> Option<Term> {
        self.terms.iter().copied().find(|t| t.message == message)
    }
}

/// How symbol indices and row order are randomized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Independent uniform permutation per message, then a uniform shuffle
    /// of each database's rows. This is the private layout.
    #[default]
    Randomized,
    /// Identity permutation and construction order; reproduces the textbook
    /// presentation of the tables. Not private.
    Canonical,
}

/// Deliberate generator defects used to check that the auditors notice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Drop the rows of the first 2-subset that contains the desired message.
    SkipSubset,
    /// Leave every database's rows in construction order.
    NoShuffle,
    /// Make the last desired-message row of each database reuse the symbol
    /// index of its first one.
    ReuseSymbolIndex,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [
        Mutation::SkipSubset,
        Mutation::NoShuffle,
        Mutation::ReuseSymbolIndex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::SkipSubset => "skip-subset",
            Mutation::NoShuffle => "no-shuffle",
            Mutation::ReuseSymbolIndex => "reuse-index",
        }
    }
}

impl std::str::FromStr for Mutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown mutation {s:?}")))
    }
}

/// The complete retrieval-phase query plan for one desired message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTable {
    pub(crate) counts: SchemeCounts,
    pub(crate) desired: usize,
    pub(crate) plan: PrefetchPlan,
    pub(crate) seed: u64,
    pub(crate) layout: Layout,
    pub(crate) mutation: Option<Mutation>,
    pub(crate) rows: Vec<Vec<QuerySpec>>,
    pub(crate) known: Vec<Vec<bool>>,
}

/// How the user recovers one desired symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeelStep {
    pub database: usize,
    pub row: usize,
    /// Index of the recovered desired-message symbol.
    pub index: u32,
    /// Non-desired row (database, row) whose uncached part cancels this
    /// row's uncached interference, if there is any.
    pub side: Option<(usize, usize)>,
}

impl QueryTable {
    pub fn counts(&self) -> &SchemeCounts {
        &self.counts
    }

    pub fn desired(&self) -> usize {
        self.desired
    }

    pub fn plan(&self) -> &PrefetchPlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mutation(&self) -> Option<Mutation> {
        self.mutation
    }

    pub fn databases(&self) -> usize {
        self.rows.len()
    }

    /// Rows sent to database `n`.
    pub fn rows(&self, n: usize) -> &[QuerySpec] {
        &self.rows[n]
    }

    /// Which of database `n`'s rows the user can evaluate from its cache.
    pub fn known_mask(&self, n: usize) -> &[bool] {
        &self.known[n]
    }

    /// Resolves every desired-message row to the side-information row that
    /// cancels its interference. Fails if some row cannot be peeled.
    pub fn peel_schedule(&self) -> Result<Vec<PeelStep>> {
        let cached = self.plan.cached();
        let interference = |row: &QuerySpec| -> Vec<Term> {
            row.terms()
                .iter()
                .copied()
                .filter(|t| t.message != self.desired && !cached.contains(&t.message))
                .collect()
        };

        let mut sources: HashMap<Vec<Term>, (usize, usize)> = HashMap::new();
        for (n, rows) in self.rows.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                if row.term_for(self.desired).is_some() {
                    continue;
                }
                let key = interference(row);
                if !key.is_empty() {
                    sources.insert(key, (n, i));
                }
            }
        }

        let mut steps = Vec::with_capacity(self.counts.message_len as usize);
        for (n, rows) in self.rows.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                let Some(term) = row.term_for(self.desired) else {
                    continue;
                };
                let key = interference(row);
                let side = if key.is_empty() {
                    None
                } else {
                    Some(*sources.get(&key).ok_or_else(|| {
                        Error::Peel(format!(
                            "row {} at database {} has interference {key:?} that no other row resolves",
                            i + 1,
                            n + 1
                        ))
                    })?)
                };
                steps.push(PeelStep {
                    database: n,
                    row: i,
                    index: term.index,
                    side,
                });
            }
        }
        Ok(steps)
    }

    /// Checks every count and structure identity the scheme promises.
    pub fn verify(&self) -> Result<()> {
        let c = &self.counts;
        let active = c.active();
        let fail = |msg: String| Err(Error::Internal(msg));

        for (n, rows) in self.rows.iter().enumerate() {
            let db = n + 1;
            if rows.len() as u64 != c.p {
                return fail(format!(
                    "database {db} has {} rows, expected p = {}",
                    rows.len(),
                    c.p
                ));
            }
            let known = self.known[n].iter().filter(|&&k| k).count() as u64;
            if known != c.q {
                return fail(format!(
                    "database {db} has {known} known rows, expected q = {}",
                    c.q
                ));
            }
            let provided = self.plan.provided_by(n);
            let mut used = HashSet::new();
            let mut by_subset: HashMap<Vec<usize>, u64> = HashMap::new();
            for row in rows {
                for t in row.terms() {
                    if provided.contains(&t.message) {
                        return fail(format!(
                            "database {db} is asked about message {} it provided",
                            t.message + 1
                        ));
                    }
                    if t.index as u64 >= c.message_len {
                        return fail(format!("symbol index {} out of range", t.index + 1));
                    }
                    if !used.insert(*t) {
                        return fail(format!(
                            "database {db} sees symbol ({}, {}) twice",
                            t.message + 1,
                            t.index + 1
                        ));
                    }
                }
                *by_subset.entry(row.messages().collect()).or_default() += 1;
            }
            let visible = self.plan.active_at(n);
            for r in 1..=active {
                let size_r = rows.iter().filter(|row| row.len() == r).count() as u64;
                if Some(size_r) != rows_of_size(c.databases, active, r).to_u64() {
                    return fail(format!(
                        "database {db}: wrong number of {r}-term rows ({size_r})"
                    ));
                }
                let want = (c.databases as u64 - 1).pow(r as u32 - 1);
                for subset in visible.iter().copied().combinations(r) {
                    let got = by_subset.get(&subset).copied().unwrap_or(0);
                    if got != want {
                        return fail(format!(
                            "database {db}: subset {:?} has {got} rows, expected {want}",
                            subset.iter().map(|k| k + 1).collect::<Vec<_>>()
                        ));
                    }
                }
            }
        }

        let mut desired: Vec<u32> = self
            .rows
            .iter()
            .flatten()
            .filter_map(|row| row.term_for(self.desired).map(|t| t.index))
            .collect();
        desired.sort_unstable();
        if !desired.iter().copied().eq(0..c.message_len as u32) {
            return fail(format!(
                "desired symbols do not cover 1..={} exactly once",
                c.message_len
            ));
        }

        self.peel_schedule().map(|_| ())
    }
}

/// Query table construction with optional layout and mutation controls.
#[derive(Debug, Clone, Copy, Default)]
pub struct TableBuilder {
    layout: Layout,
    mutation: Option<Mutation>,
}

impl TableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn mutation(mut self, mutation: Option<Mutation>) -> Self {
        self.mutation = mutation;
        self
    }

    pub fn build(
        &self,
        databases: usize,
        messages: usize,
        cache: usize,
        desired: usize,
        plan: &PrefetchPlan,
        seed: u64,
    ) -> Result<QueryTable> {
        let counts = scheme_counts(databases, messages, cache)?;
        if plan.databases() != databases || plan.messages() != messages {
            return Err(Error::Plan(format!(
                "plan is for N = {}, K = {} but the system has N = {databases}, K = {messages}",
                plan.databases(),
                plan.messages()
            )));
        }
        if plan.uniform_share() != Some(counts.per_database) {
            return Err(Error::Plan(format!(
                "the scheme needs exactly {} cached message(s) from every database; plan has {:?}",
                counts.per_database,
                plan.assignments()
                    .iter()
                    .map(BTreeSet::len)
                    .collect::<Vec<_>>()
            )));
        }
        if desired >= messages {
            return Err(Error::Domain(format!(
                "desired message {} outside 1..={messages}",
                desired + 1
            )));
        }
        if plan.is_cached(desired) {
            return Err(Error::Domain(format!(
                "desired message {} is already cached",
                desired + 1
            )));
        }

        let mut rows = Generator::new(databases, desired, plan, self.mutation).run()?;

        let len = counts.message_len;
        if rows
            .iter()
            .flatten()
            .flat_map(QuerySpec::terms)
            .any(|t| t.index as u64 >= len)
        {
            return Err(Error::Internal(
                "symbol allocation exceeded the message length".into(),
            ));
        }

        if self.layout == Layout::Randomized {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let perms: Vec<Vec<u32>> = (0..messages)
                .map(|_| {
                    let mut p: Vec<u32> = (0..len as u32).collect();
                    p.shuffle(&mut rng);
                    p
                })
                .collect();
            for row in rows.iter_mut().flatten() {
                for t in &mut row.terms {
                    t.index = perms[t.message][t.index as usize];
                }
            }
            if self.mutation != Some(Mutation::NoShuffle) {
                for db in &mut rows {
                    db.shuffle(&mut rng);
                }
            }
        }

        let cached = plan.cached();
        let known = rows
            .iter()
            .map(|db| {
                db.iter()
                    .map(|row| row.messages().all(|k| cached.contains(&k)))
                    .collect()
            })
            .collect();

        let table = QueryTable {
            counts,
            desired,
            plan: plan.clone(),
            seed,
            layout: self.layout,
            mutation: self.mutation,
            rows,
            known,
        };
        if self.mutation.is_none() {
            table.verify()?;
        }
        Ok(table)
    }
}

/// Builds the private query table for `desired` under a uniform plan.
pub fn build_query_table(
    databases: usize,
    messages: usize,
    cache: usize,
    desired: usize,
    plan: &PrefetchPlan,
    seed: u64,
) -> Result<QueryTable> {
    TableBuilder::new().build(databases, messages, cache, desired, plan, seed)
}

/// Round-by-round row generator working on unpermuted symbol labels.
struct Generator {
    databases: usize,
    desired: usize,
    cached: BTreeSet<usize>,
    active: Vec<Vec<usize>>,
    next_label: Vec<u32>,
    mutation: Option<Mutation>,
}

impl Generator {
    fn new(
        databases: usize,
        desired: usize,
        plan: &PrefetchPlan,
        mutation: Option<Mutation>,
    ) -> Self {
        Generator {
            databases,
            desired,
            cached: plan.cached(),
            active: (0..databases).map(|n| plan.active_at(n)).collect(),
            next_label: vec![0; plan.messages()],
            mutation,
        }
    }

    fn fresh(&mut self, message: usize) -> Term {
        let index = self.next_label[message];
        self.next_label[message] += 1;
        Term { message, index }
    }

    fn run(mut self) -> Result<Vec<Vec<QuerySpec>>> {
        let n_db = self.databases;
        let depth = self.active[0].len();
        let mut rows: Vec<Vec<QuerySpec>> = vec![Vec::new(); n_db];
        // non-desired rows of the previous round, per database
        let mut previous: Vec<Vec<QuerySpec>> = vec![Vec::new(); n_db];

        for r in 1..=depth {
            let copies = (n_db - 1).pow(r as u32 - 1);
            let mut current: Vec<Vec<QuerySpec>> = vec![Vec::new(); n_db];

            for n in 0..n_db {
                let active = self.active[n].clone();
                // Interference pools keyed by (uncached messages, number of cached messages).
                let mut pools: HashMap<(Vec<usize>, usize), VecDeque<Vec<Term>>> = HashMap::new();
                let mut skipped = false;

                for subset in active.iter().copied().combinations(r) {
                    if !subset.contains(&self.desired) {
                        continue;
                    }
                    if r == 2 && !skipped && self.mutation == Some(Mutation::SkipSubset) {
                        skipped = true;
                        continue;
                    }
                    let (uncached, cached): (Vec<usize>, Vec<usize>) = subset
                        .iter()
                        .copied()
                        .filter(|&k| k != self.desired)
                        .partition(|k| !self.cached.contains(k));
                    for _ in 0..copies {
                        let mut terms = vec![self.fresh(self.desired)];
                        if !uncached.is_empty() {
                            let key = (uncached.clone(), cached.len());
                            let pool = pools.entry(key).or_insert_with(|| {
                                self.supply(&previous, n, &uncached, cached.len())
                            });
                            let side = pool.pop_front().ok_or_else(|| {
                                Error::Internal(format!(
                                    "database {}: no side information left for messages {:?}",
                                    n + 1,
                                    uncached.iter().map(|k| k + 1).collect::<Vec<_>>()
                                ))
                            })?;
                            terms.extend(side);
                        }
                        for &k in &cached {
                            terms.push(self.fresh(k));
                        }
                        rows[n].push(QuerySpec::new(terms)?);
                    }
                }

                let desired = self.desired;
                for subset in active
                    .iter()
                    .copied()
                    .filter(|&k| k != desired)
                    .combinations(r)
                {
                    for _ in 0..copies {
                        let terms = subset.iter().map(|&k| self.fresh(k)).collect();
                        let row = QuerySpec::new(terms)?;
                        current[n].push(row.clone());
                        rows[n].push(row);
                    }
                }
            }
            previous = current;
        }

        if self.mutation == Some(Mutation::ReuseSymbolIndex) {
            let desired = self.desired;
            for db in &mut rows {
                let first = db.iter().find_map(|row| row.term_for(desired));
                let last = db
                    .iter_mut()
                    .rev()
                    .find(|row| row.term_for(desired).is_some());
                if let (Some(first), Some(last)) = (first, last) {
                    for t in &mut last.terms {
                        if t.message == desired {
                            t.index = first.index;
                        }
                    }
                }
            }
        }
        Ok(rows)
    }

    /// Uncached parts of the previous round's non-desired rows at the other
    /// databases (in cyclic order after `n`) whose uncached messages are
    /// exactly `uncached` and which carry `cached_count` cached terms.
    fn supply(
        &self,
        previous: &[Vec<QuerySpec>],
        n: usize,
        uncached: &[usize],
        cached_count: usize,
    ) -> VecDeque<Vec<Term>> {
        let n_db = self.databases;
        (1..n_db)
            .map(|d| (n + d) % n_db)
            .flat_map(|other| previous[other].iter())
            .filter_map(|row| {
                let (unc, cac): (Vec<Term>, Vec<Term>) = row
                    .terms()
                    .iter()
                    .partition(|t| !self.cached.contains(&t.message));
                let matches = cac.len() == cached_count
                    && unc.len() == uncached.len()
                    && unc.iter().zip(uncached).all(|(t, &k)| t.message == k);
                matches.then_some(unc)
            })
            .collect()
    }
}
