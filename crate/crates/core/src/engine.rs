//! End-to-end retrieval: replicated message storage, the prefetching phase,
//! MDS-coded database answers and the user's decoder.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{min_field_width, scheme_counts, Rational, SchemeCounts};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gf::{Field, Symbol, SystematicCode, MAX_WIDTH};
use crate::scheme::{build_query_table, PlanFile, PrefetchPlan, QueryTable};

/// Full parameterization of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(rename = "N")]
    pub databases: usize,
    #[serde(rename = "K")]
    pub messages: usize,
    #[serde(rename = "M")]
    pub cache: usize,
    /// Symbols live in GF(2^width).
    pub width: u32,
    pub seed: u64,
}

impl SystemConfig {
    /// Configuration with the smallest field that fits the MDS code.
    pub fn new(databases: usize, messages: usize, cache: usize, seed: u64) -> Result<Self> {
        let counts = scheme_counts(databases, messages, cache)?;
        Ok(SystemConfig {
            databases,
            messages,
            cache,
            width: min_field_width(&counts),
            seed,
        })
    }

    /// Overrides the field width; it must still fit the code.
    pub fn with_width(mut self, width: u32) -> Result<Self> {
        let min = min_field_width(&self.counts()?);
        if width < min || width > MAX_WIDTH {
            return Err(Error::Domain(format!(
                "field width {width} outside {min}..={MAX_WIDTH} for this configuration"
            )));
        }
        self.width = width;
        Ok(self)
    }

    pub fn counts(&self) -> Result<SchemeCounts> {
        scheme_counts(self.databases, self.messages, self.cache)
    }
}

/// The `K x L` message matrix every database holds a copy of.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageStore {
    width: u32,
    messages: Vec<Vec<Symbol>>,
}

impl MessageStore {
    pub fn new(width: u32, messages: Vec<Vec<Symbol>>) -> Result<Self> {
        let field = Field::get(width)?;
        let len = messages.first().map_or(0, Vec::len);
        for row in &messages {
            if row.len() != len {
                return Err(Error::Length {
                    expected: len,
                    actual: row.len(),
                });
            }
            for &s in row {
                field.check(s)?;
            }
        }
        Ok(MessageStore { width, messages })
    }

    /// Uniformly random symbols from a ChaCha20 stream seeded with `seed`.
    pub fn random(config: &SystemConfig, seed: u64) -> Self {
        let field = Field::get(config.width).expect("config width is valid");
        let len = Self::len_for(config);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let messages = (0..config.messages)
            .map(|_| (0..len).map(|_| field.random(&mut rng)).collect())
            .collect();
        MessageStore {
            width: config.width,
            messages,
        }
    }

    pub fn zeros(config: &SystemConfig) -> Self {
        let len = Self::len_for(config);
        MessageStore {
            width: config.width,
            messages: vec![vec![Symbol::ZERO; len]; config.messages],
        }
    }

    fn len_for(config: &SystemConfig) -> usize {
        config.counts().expect("config was validated").message_len as usize
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn num_messages(&self) -> usize {
        self.messages.len()
    }

    pub fn message_len(&self) -> usize {
        self.messages.first().map_or(0, Vec::len)
    }

    pub fn message(&self, k: usize) -> &[Symbol] {
        &self.messages[k]
    }

    /// Prefetching phase: the user downloads every message of the plan.
    pub fn prefetch(&self, plan: &PrefetchPlan) -> SideInformation {
        SideInformation {
            width: self.width,
            messages: plan
                .cached()
                .into_iter()
                .map(|k| (k, self.messages[k].clone()))
                .collect(),
        }
    }

    fn check_against(&self, table: &QueryTable) -> Result<()> {
        let c = table.counts();
        if self.messages.len() != c.messages || self.message_len() as u64 != c.message_len {
            return Err(Error::Dimension(format!(
                "store is {} x {}, table expects {} x {}",
                self.messages.len(),
                self.message_len(),
                c.messages,
                c.message_len
            )));
        }
        Ok(())
    }
}

/// Messages the user holds after prefetching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInformation {
    pub width: u32,
    pub messages: BTreeMap<usize, Vec<Symbol>>,
}

impl SideInformation {
    fn symbol(&self, message: usize, index: u32) -> Result<Symbol> {
        self.messages
            .get(&message)
            .and_then(|m| m.get(index as usize))
            .copied()
            .ok_or_else(|| {
                Error::Dimension(format!(
                    "cache lacks symbol {index} of message {}",
                    message + 1
                ))
            })
    }
}

/// Parity symbols returned by one database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerBlock {
    pub database: usize,
    pub parity: Vec<Symbol>,
}

fn code_for(table: &QueryTable, width: u32) -> Result<SystematicCode> {
    let c = table.counts();
    SystematicCode::new(c.p as usize, c.code_length as usize, width)
}

fn answer_with(
    code: &SystematicCode,
    store: &MessageStore,
    table: &QueryTable,
    n: usize,
) -> Result<AnswerBlock> {
    if n >= table.databases() {
        return Err(Error::Dimension(format!("no database {}", n + 1)));
    }
    store.check_against(table)?;
    let values: Vec<Symbol> = table
        .rows(n)
        .iter()
        .map(|row| {
            row.terms()
                .iter()
                .map(|t| store.messages[t.message][t.index as usize])
                .sum()
        })
        .collect();
    Ok(AnswerBlock {
        database: n,
        parity: code.parity(&values)?,
    })
}

/// Database `n`'s reply: its rows evaluated against the store, MDS-encoded,
/// parity part only. Depends on nothing but the store and `n`'s own rows.
pub fn database_answer(store: &MessageStore, table: &QueryTable, n: usize) -> Result<AnswerBlock> {
    answer_with(&code_for(table, store.width)?, store, table, n)
}

fn decode_with(
    code: &SystematicCode,
    table: &QueryTable,
    answers: &[AnswerBlock],
    cache: &SideInformation,
) -> Result<Vec<Symbol>> {
    let c = table.counts();
    if answers.len() != table.databases() {
        return Err(Error::Dimension(format!(
            "{} answers for {} databases",
            answers.len(),
            table.databases()
        )));
    }
    for k in table.plan().cached() {
        if !cache.messages.contains_key(&k) {
            return Err(Error::Dimension(format!(
                "cached message {} missing",
                k + 1
            )));
        }
    }

    let cached_part = |row: &crate::scheme::QuerySpec| -> Result<Symbol> {
        row.terms()
            .iter()
            .filter(|t| cache.messages.contains_key(&t.message))
            .map(|t| cache.symbol(t.message, t.index))
            .sum()
    };

    let p = c.p as usize;
    let mut values = Vec::with_capacity(answers.len());
    for (n, answer) in answers.iter().enumerate() {
        if answer.database != n || answer.parity.len() as u64 != c.parity_per_db {
            return Err(Error::Dimension(format!(
                "answer {} is malformed ({} parity symbols for database {})",
                n + 1,
                answer.parity.len(),
                answer.database + 1
            )));
        }
        let mut known = Vec::with_capacity(p);
        for (i, (row, &is_known)) in table.rows(n).iter().zip(table.known_mask(n)).enumerate() {
            if is_known {
                known.push((i, cached_part(row)?));
            }
        }
        known.extend(answer.parity.iter().enumerate().map(|(t, &s)| (p + t, s)));
        let rows = code
            .reconstruct(&known)
            .map_err(|e| Error::Reconstruct(format!("database {}: {e}", n + 1)))?;
        values.push(rows);
    }

    let len = c.message_len as usize;
    let mut decoded: Vec<Option<Symbol>> = vec![None; len];
    for step in table.peel_schedule()? {
        let row = &table.rows(step.database)[step.row];
        let mut v = values[step.database][step.row] + cached_part(row)?;
        if let Some((dn, dr)) = step.side {
            v += values[dn][dr] + cached_part(&table.rows(dn)[dr])?;
        }
        let slot = decoded
            .get_mut(step.index as usize)
            .ok_or_else(|| Error::Peel(format!("symbol index {} out of range", step.index + 1)))?;
        if slot.replace(v).is_some() {
            return Err(Error::Peel(format!(
                "symbol {} recovered twice",
                step.index + 1
            )));
        }
    }
    decoded
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::Peel(format!("symbol {} never recovered", i + 1))))
        .collect()
}

/// Recovers the desired message from the answers and the cache.
pub fn user_decode(
    table: &QueryTable,
    answers: &[AnswerBlock],
    cache: &SideInformation,
) -> Result<Vec<Symbol>> {
    decode_with(&code_for(table, cache.width)?, table, answers, cache)
}

/// Everything exchanged in one retrieval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalTranscript {
    pub config: SystemConfig,
    pub seed: u64,
    pub table: QueryTable,
    pub answers: Vec<AnswerBlock>,
    pub decoded: Vec<Symbol>,
    pub downloaded_symbols: u64,
    /// Whether `decoded` equals the stored desired message.
    pub verified: bool,
}

impl RetrievalTranscript {
    pub fn message_len(&self) -> u64 {
        self.table.counts().message_len
    }

    /// Downloaded symbols per desired symbol.
    pub fn normalized_cost(&self) -> Rational {
        Rational::from_big(self.downloaded_symbols.into(), self.message_len().into())
    }

    pub fn to_record(&self) -> TranscriptRecord {
        TranscriptRecord {
            config: self.config,
            plan: self.table.plan().to_file(),
            desired: self.table.desired() + 1,
            seed: self.seed,
            parity: self
                .answers
                .iter()
                .map(|a| ParityRecord {
                    database: a.database + 1,
                    hex: encode_hex(&a.parity, self.config.width),
                })
                .collect(),
            decoded: encode_hex(&self.decoded, self.config.width),
            downloaded: self.downloaded_symbols,
            message_len: self.message_len(),
            normalized_cost: self.normalized_cost(),
            verified: self.verified,
        }
    }
}

/// JSON form of a transcript. Symbol strings hold `ceil(width / 4)` hex
/// digits per symbol, concatenated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub config: SystemConfig,
    pub plan: PlanFile,
    pub desired: usize,
    pub seed: u64,
    pub parity: Vec<ParityRecord>,
    pub decoded: String,
    pub downloaded: u64,
    #[serde(rename = "L")]
    pub message_len: u64,
    pub normalized_cost: Rational,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityRecord {
    pub database: usize,
    pub hex: String,
}

fn hex_digits(width: u32) -> usize {
    width.div_ceil(4) as usize
}

pub fn encode_hex(symbols: &[Symbol], width: u32) -> String {
    let d = hex_digits(width);
    symbols.iter().map(|s| format!("{:0d$x}", s.0)).collect()
}

pub fn decode_hex(text: &str, width: u32) -> Result<Vec<Symbol>> {
    let d = hex_digits(width);
    let field = Field::get(width)?;
    if !text.len().is_multiple_of(d) || !text.is_ascii() {
        return Err(Error::Length {
            expected: d,
            actual: text.len() % d,
        });
    }
    (0..text.len())
        .step_by(d)
        .map(|i| {
            let v = u16::from_str_radix(&text[i..i + d], 16)
                .map_err(|_| Error::Domain(format!("bad hex {:?}", &text[i..i + d])))?;
            field.check(Symbol(v))
        })
        .collect()
}

/// Builds the table, collects every database's answer and decodes.
pub fn run_retrieval(
    config: &SystemConfig,
    plan: &PrefetchPlan,
    desired: usize,
    store: &MessageStore,
    seed: u64,
) -> Result<RetrievalTranscript> {
    run_retrieval_with(Execution::Parallel, config, plan, desired, store, seed)
}

/// [`run_retrieval`] with explicit scheduling of the database answers.
pub fn run_retrieval_with(
    exec: Execution,
    config: &SystemConfig,
    plan: &PrefetchPlan,
    desired: usize,
    store: &MessageStore,
    seed: u64,
) -> Result<RetrievalTranscript> {
    if store.width != config.width {
        return Err(Error::Dimension(format!(
            "store uses GF(2^{}), config GF(2^{})",
            store.width, config.width
        )));
    }
    let table = build_query_table(
        config.databases,
        config.messages,
        config.cache,
        desired,
        plan,
        seed,
    )?;
    store.check_against(&table)?;
    let code = code_for(&table, config.width)?;
    let answers = exec
        .map_range(config.databases, |n| answer_with(&code, store, &table, n))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let cache = store.prefetch(plan);
    let decoded = decode_with(&code, &table, &answers, &cache)?;
    let downloaded_symbols = answers.iter().map(|a| a.parity.len() as u64).sum();
    let verified = decoded == store.message(desired);
    Ok(RetrievalTranscript {
        config: *config,
        seed,
        table,
        answers,
        decoded,
        downloaded_symbols,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::{QuerySpec, Term};
    use std::collections::BTreeSet;

    fn table1_plan() -> PrefetchPlan {
        PrefetchPlan::new(4, vec![BTreeSet::from([2]), BTreeSet::from([3])]).unwrap()
    }

    #[test]
    fn zero_store_gives_zero_everything() {
        let config = SystemConfig::new(2, 4, 2, 1).unwrap();
        let store = MessageStore::zeros(&config);
        let t = run_retrieval(&config, &table1_plan(), 0, &store, 5).unwrap();
        assert!(t
            .answers
            .iter()
            .all(|a| a.parity.iter().all(|s| s.is_zero())));
        assert!(t.decoded.iter().all(|s| s.is_zero()));
        assert!(t.verified);
    }

    #[test]
    fn six_parity_symbols_per_database() {
        let config = SystemConfig::new(2, 4, 2, 1).unwrap();
        let store = MessageStore::random(&config, 2);
        let table = build_query_table(2, 4, 2, 0, &table1_plan(), 3).unwrap();
        for n in 0..2 {
            assert_eq!(database_answer(&store, &table, n).unwrap().parity.len(), 6);
        }
    }

    #[test]
    fn single_row_parity_equals_value() {
        let config = SystemConfig::new(2, 1, 0, 0).unwrap();
        let store = MessageStore::random(&config, 4);
        let plan = PrefetchPlan::empty(2, 1);
        let table = build_query_table(2, 1, 0, 0, &plan, 0).unwrap();
        for n in 0..2 {
            let a = database_answer(&store, &table, n).unwrap();
            let t = table.rows(n)[0].terms()[0];
            assert_eq!(a.parity, vec![store.message(0)[t.index as usize]]);
        }
        let t = run_retrieval(&config, &plan, 0, &store, 0).unwrap();
        assert!(t.verified);
    }

    #[test]
    fn answer_ignores_other_databases_rows() {
        let config = SystemConfig::new(2, 4, 2, 1).unwrap();
        let store = MessageStore::random(&config, 8);
        let table = build_query_table(2, 4, 2, 0, &table1_plan(), 3).unwrap();
        let before = database_answer(&store, &table, 0).unwrap();
        let mut other = table.clone();
        other.rows[1][0] = QuerySpec::new(vec![Term {
            message: 0,
            index: 7,
        }])
        .unwrap();
        other.rows[1].reverse();
        assert_eq!(database_answer(&store, &other, 0).unwrap(), before);
    }

    #[test]
    fn dimension_errors() {
        let config = SystemConfig::new(2, 4, 2, 1).unwrap();
        let table = build_query_table(2, 4, 2, 0, &table1_plan(), 3).unwrap();
        let small = MessageStore::zeros(&SystemConfig::new(2, 3, 0, 0).unwrap());
        assert!(matches!(
            database_answer(&small, &table, 0),
            Err(Error::Dimension(_))
        ));

        let store = MessageStore::random(&config, 1);
        let cache = store.prefetch(&table1_plan());
        let a = database_answer(&store, &table, 0).unwrap();
        assert!(matches!(
            user_decode(&table, std::slice::from_ref(&a), &cache),
            Err(Error::Dimension(_))
        ));
        let mut short = a.clone();
        short.parity.pop();
        let b = database_answer(&store, &table, 1).unwrap();
        assert!(matches!(
            user_decode(&table, &[short, b], &cache),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn width_override() {
        let config = SystemConfig::new(2, 4, 2, 0).unwrap();
        assert_eq!(config.width, 4);
        assert!(config.with_width(3).is_err());
        let wide = config.with_width(12).unwrap();
        let store = MessageStore::random(&wide, 3);
        let t = run_retrieval(&wide, &table1_plan(), 1, &store, 9).unwrap();
        assert!(t.verified);
    }

    #[test]
    fn hex_round_trip() {
        let syms = vec![Symbol(0), Symbol(0x3ff), Symbol(17)];
        let text = encode_hex(&syms, 10);
        assert_eq!(text, "0003ff011");
        assert_eq!(decode_hex(&text, 10).unwrap(), syms);
        assert!(decode_hex("0", 10).is_err());
        assert!(decode_hex("fff", 10).is_err());
    }
}
