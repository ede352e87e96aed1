use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::plan::{PlanFile, PrefetchPlan};
use super::table::{Layout, Mutation, QuerySpec, QueryTable, Term};
use crate::combinatorics::{scheme_counts, SchemeCounts};
use crate::error::{Error, Result};

/// `a`, `b`, ... for the first 26 messages, `m27_`, `m28_`, ... afterwards.
pub fn message_prefix(message: usize) -> String {
    if message < 26 {
        ((b'a' + message as u8) as char).to_string()
    } else {
        format!("m{}_", message + 1)
    }
}

/// One-based symbol name, e.g. `a7`.
pub fn symbol_name(term: Term) -> String {
    format!("{}{}", message_prefix(term.message), term.index + 1)
}

/// `+`-joined symbol names, e.g. `a7+b4+d4`.
pub fn row_text(row: &QuerySpec) -> String {
    row.terms()
        .iter()
        .map(|&t| symbol_name(t))
        .collect::<Vec<_>>()
        .join("+")
}

/// Renders the table with one column per database. Rows the user can
/// evaluate from its cache carry a trailing `*`.
pub fn render_text(table: &QueryTable) -> String {
    let n_db = table.databases();
    let cells: Vec<Vec<String>> = (0..n_db)
        .map(|n| {
            table
                .rows(n)
                .iter()
                .zip(table.known_mask(n))
                .map(|(row, &known)| {
                    let mut s = row_text(row);
                    if known {
                        s.push_str(" *");
                    }
                    s
                })
                .collect()
        })
        .collect();
    let footers: Vec<String> = (0..n_db)
        .map(|n| {
            let set = table.plan().provided_by(n);
            let names: Vec<String> = set.iter().map(|k| format!("W{}", k + 1)).collect();
            format!("W_H{} = {{{}}}", n + 1, names.join(", "))
        })
        .collect();
    let headers: Vec<String> = (1..=n_db).map(|n| format!("DB{n}")).collect();
    let width = cells
        .iter()
        .flatten()
        .chain(&footers)
        .chain(&headers)
        .map(|s| s.chars().count())
        .max()
        .unwrap_or(0);

    let line = |out: &mut String, items: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = items.map(|s| format!("{s:<width$}")).collect();
        let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
    };
    let rule = vec!["-".repeat(width); n_db].join("-+-");

    let mut out = String::new();
    line(&mut out, &mut headers.iter().map(String::as_str));
    let _ = writeln!(out, "{rule}");
    let depth = cells.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..depth {
        line(
            &mut out,
            &mut cells.iter().map(|c| c.get(i).map_or("", String::as_str)),
        );
    }
    let _ = writeln!(out, "{rule}");
    line(&mut out, &mut footers.iter().map(String::as_str));
    let _ = writeln!(
        out,
        "desired: W{}   (* = determined by cached side information)",
        table.desired() + 1
    );
    out
}

/// CSV rendering: `database,row,query,known`, one-based.
pub fn render_csv(table: &QueryTable) -> String {
    let mut out = String::from("database,row,query,known\n");
    for n in 0..table.databases() {
        for (i, (row, known)) in table.rows(n).iter().zip(table.known_mask(n)).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", n + 1, i + 1, row_text(row), known);
        }
    }
    out
}

/// JSON form of a query table. All indices are one-based; each term is a
/// `[message, symbol]` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRecord {
    pub databases: usize,
    pub messages: usize,
    pub cache: usize,
    pub desired: usize,
    pub seed: u64,
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
    pub counts: SchemeCounts,
    pub plan: PlanFile,
    pub queries: Vec<DatabaseQueries>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseQueries {
    pub database: usize,
    pub rows: Vec<RowRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRecord {
    pub terms: Vec<[usize; 2]>,
    pub known: bool,
}

impl QueryTable {
    pub fn to_record(&self) -> TableRecord {
        let c = self.counts();
        TableRecord {
            databases: c.databases,
            messages: c.messages,
            cache: c.cache,
            desired: self.desired() + 1,
            seed: self.seed(),
            layout: self.layout(),
            mutation: self.mutation(),
            counts: *c,
            plan: self.plan().to_file(),
            queries: (0..self.databases())
                .map(|n| DatabaseQueries {
                    database: n + 1,
                    rows: self
                        .rows(n)
                        .iter()
                        .zip(self.known_mask(n))
                        .map(|(row, &known)| RowRecord {
                            terms: row
                                .terms()
                                .iter()
                                .map(|t| [t.message + 1, t.index as usize + 1])
                                .collect(),
                            known,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds a table from its JSON form. Unmutated tables are re-verified.
    pub fn from_record(record: &TableRecord) -> Result<QueryTable> {
        let counts = scheme_counts(record.databases, record.messages, record.cache)?;
        if counts != record.counts {
            return Err(Error::Dimension(
                "recorded counts do not match (N, K, M)".into(),
            ));
        }
        let plan = PrefetchPlan::from_file(&record.plan, record.databases, record.messages)?;
        if record.desired == 0 || record.desired > record.messages {
            return Err(Error::Domain(format!(
                "desired message {} out of range",
                record.desired
            )));
        }
        if record.queries.len() != record.databases {
            return Err(Error::Dimension(format!(
                "{} query lists for {} databases",
                record.queries.len(),
                record.databases
            )));
        }
        let mut rows = Vec::with_capacity(record.databases);
        let mut known = Vec::with_capacity(record.databases);
        for (n, db) in record.queries.iter().enumerate() {
            if db.database != n + 1 {
                return Err(Error::Dimension(format!(
                    "query lists out of order at {}",
                    n + 1
                )));
            }
            let mut specs = Vec::with_capacity(db.rows.len());
            for row in &db.rows {
                let terms = row
                    .terms
                    .iter()
                    .map(|&[k, j]| {
                        if k == 0 || k > record.messages || j == 0 || j as u64 > counts.message_len
                        {
                            Err(Error::Dimension(format!("term [{k}, {j}] out of range")))
                        } else {
                            Ok(Term {
                                message: k - 1,
                                index: (j - 1) as u32,
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                specs.push(QuerySpec::new(terms)?);
            }
            rows.push(specs);
            known.push(db.rows.iter().map(|r| r.known).collect());
        }
        let table = QueryTable {
            counts,
            desired: record.desired - 1,
            plan,
            seed: record.seed,
            layout: record.layout,
            mutation: record.mutation,
            rows,
            known,
        };
        if table.mutation.is_none() {
            table.verify()?;
        }
        Ok(table)
    }
}
