use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use pir_prefetch::audit::{run_suite, GridPoint, SuiteSpec};
use pir_prefetch::combinatorics::{
    baseline_code_length, capacity as capacity_of, min_field_width, optimal_cost, scheme_counts,
    width_for_length,
};
use pir_prefetch::engine::{run_retrieval, MessageStore, SystemConfig};
use pir_prefetch::exec::with_jobs;
use pir_prefetch::scheme::{
    render_csv, render_text, uniform_prefetch, Layout, PlanFile, PrefetchPlan, QueryTable,
    TableBuilder,
};

use crate::config::ConfigFile;
use crate::{AuditArgs, Common, Failure, Format, LayoutArg, RetrieveArgs, RunArgs};

type Outcome = Result<String, Failure>;

const DEFAULT_POINT: (usize, usize, usize) = (2, 4, 2);

/// Flags merged with the optional config file.
struct Settings {
    file: ConfigFile,
    point: (Option<usize>, Option<usize>, Option<usize>),
    seed: u64,
    format: Format,
    jobs: Option<usize>,
}

impl Settings {
    fn resolve(c: &Common) -> Result<Self, Failure> {
        let file = match &c.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Ok(Settings {
            point: (
                file.pick(c.databases, "N")?,
                file.pick(c.messages, "K")?,
                file.pick(c.cache, "M")?,
            ),
            seed: file.pick(c.seed, "seed")?.unwrap_or(0),
            format: file.pick(c.format, "format")?.unwrap_or(Format::Text),
            jobs: file.pick(c.jobs, "jobs")?,
            file,
        })
    }

    fn point(&self) -> (usize, usize, usize) {
        (
            self.point.0.unwrap_or(DEFAULT_POINT.0),
            self.point.1.unwrap_or(DEFAULT_POINT.1),
            self.point.2.unwrap_or(DEFAULT_POINT.2),
        )
    }

    fn point_given(&self) -> bool {
        self.point.0.is_some() || self.point.1.is_some() || self.point.2.is_some()
    }
}

/// Independent seeds for the plan, the message store and the table, plus a
/// stream for picking the desired message, all derived from the master seed.
struct Seeds {
    plan: u64,
    store: u64,
    table: u64,
    pick: ChaCha20Rng,
}

impl Seeds {
    fn from_master(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Seeds {
            plan: rng.random(),
            store: rng.random(),
            table: rng.random(),
            pick: rng,
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    text.push('\n');
    Ok(text)
}

pub fn capacity(c: &Common) -> Outcome {
    let s = Settings::resolve(c)?;
    let (n, k, m) = s.point();
    let d = optimal_cost(n, k, m)?;
    let cap = capacity_of(n, k, m)?;
    Ok(match s.format {
        Format::Text => format!(
            "D* = {d}, C = {cap}\nD* ≈ {:.6}, C ≈ {:.6}\n",
            d.to_f64(),
            cap.to_f64()
        ),
        Format::Json => to_json(&json!({
            "N": n, "K": k, "M": m,
            "optimal_cost": d, "capacity": cap,
            "optimal_cost_decimal": d.to_f64(), "capacity_decimal": cap.to_f64(),
        }))?,
        Format::Csv => format!("N,K,M,optimal_cost,capacity\n{n},{k},{m},{d},{cap}\n"),
    })
}

pub fn counts(c: &Common) -> Outcome {
    let s = Settings::resolve(c)?;
    let (n, k, m) = s.point();
    let counts = scheme_counts(n, k, m)?;
    let width = min_field_width(&counts);
    let baseline = baseline_code_length(n, k, m)?;
    let baseline_width = width_for_length(baseline);
    Ok(match s.format {
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "N={n} K={k} M={m} (m = {} per database)",
                counts.per_database
            );
            let _ = writeln!(out, "p = {} queries per database", counts.p);
            let _ = writeln!(out, "q = {} of them known from the cache", counts.q);
            let _ = writeln!(out, "L = {} symbols per message", counts.message_len);
            let _ = writeln!(
                out,
                "MDS code ({}, {}) over GF(2^{width}), {} parity symbols per database",
                counts.code_length, counts.p, counts.parity_per_db
            );
            let _ = writeln!(
                out,
                "downloaded {} of L={} → {}",
                counts.downloaded(),
                counts.message_len,
                counts.normalized_cost()
            );
            let _ = writeln!(
                out,
                "cache-agnostic scheme: code length {baseline}, GF(2^{baseline_width})"
            );
            out
        }
        Format::Json => to_json(&json!({
            "counts": counts,
            "width": width,
            "downloaded": counts.downloaded(),
            "normalized_cost": counts.normalized_cost(),
            "baseline_code_length": baseline,
            "baseline_width": baseline_width,
        }))?,
        Format::Csv => {
            let rows = [
                ("N", n as u64),
                ("K", k as u64),
                ("M", m as u64),
                ("p", counts.p),
                ("q", counts.q),
                ("L", counts.message_len),
                ("code_length", counts.code_length),
                ("parity_per_db", counts.parity_per_db),
                ("width", width as u64),
                ("baseline_code_length", baseline),
                ("baseline_width", baseline_width as u64),
            ];
            let mut out = String::from("key,value\n");
            for (key, value) in rows {
                let _ = writeln!(out, "{key},{value}");
            }
            out
        }
    })
}

fn load_plan(path: &Path, databases: usize, messages: usize) -> Result<PrefetchPlan, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading plan file {}", path.display()))?;
    let file: PlanFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing plan file {}", path.display()))?;
    Ok(PrefetchPlan::from_file(&file, databases, messages)?)
}

/// Plan, desired message and table seed for one run.
struct Run {
    point: (usize, usize, usize),
    plan: PrefetchPlan,
    desired: usize,
    seeds: Seeds,
}

fn prepare(s: &Settings, a: &RunArgs) -> Result<Run, Failure> {
    let (n, k, m) = s.point();
    scheme_counts(n, k, m)?;
    let mut seeds = Seeds::from_master(s.seed);
    let plan_path: Option<PathBuf> = s.file.pick(a.plan.clone(), "plan")?;
    let plan = match plan_path {
        Some(path) => load_plan(&path, n, k)?,
        None => uniform_prefetch(n, k, m, seeds.plan)?,
    };
    let desired = match s.file.pick(a.theta, "theta")? {
        Some(0) => return Err(anyhow!("--theta is one-based").into()),
        Some(t) => t - 1,
        None => {
            let admissible: Vec<usize> = (0..k).filter(|&x| !plan.is_cached(x)).collect();
            admissible[seeds.pick.random_range(..admissible.len())]
        }
    };
    Ok(Run {
        point: (n, k, m),
        plan,
        desired,
        seeds,
    })
}

fn layout(s: &Settings, a: &RunArgs) -> Result<Layout, Failure> {
    Ok(
        match s
            .file
            .pick(a.layout, "layout")?
            .unwrap_or(LayoutArg::Randomized)
        {
            LayoutArg::Randomized => Layout::Randomized,
            LayoutArg::Canonical => Layout::Canonical,
        },
    )
}

pub fn table(a: &RunArgs) -> Outcome {
    let s = Settings::resolve(&a.common)?;
    let run = prepare(&s, a)?;
    let (n, k, m) = run.point;
    let table: QueryTable = TableBuilder::new()
        .layout(layout(&s, a)?)
        .mutation(a.mutate)
        .build(n, k, m, run.desired, &run.plan, run.seeds.table)?;
    Ok(match s.format {
        Format::Text => render_text(&table),
        Format::Json => to_json(&table.to_record())?,
        Format::Csv => render_csv(&table),
    })
}

pub fn retrieve(a: &RetrieveArgs) -> Outcome {
    let s = Settings::resolve(&a.run.common)?;
    if a.run.mutate.is_some() {
        return Err(anyhow!("--mutate applies to `table` and `audit` only").into());
    }
    if layout(&s, &a.run)? != Layout::Randomized {
        return Err(anyhow!("retrievals always use the randomized layout").into());
    }
    let run = prepare(&s, &a.run)?;
    let (n, k, m) = run.point;
    let mut config = SystemConfig::new(n, k, m, run.seeds.table)?;
    if let Some(w) = s.file.pick(a.width, "width")? {
        config = config.with_width(w)?;
    }
    let store = MessageStore::random(&config, run.seeds.store);
    let transcript = with_jobs(s.jobs, || {
        run_retrieval(&config, &run.plan, run.desired, &store, run.seeds.table)
    })?;
    let record = transcript.to_record();

    if let Some(path) = &a.out {
        std::fs::write(path, to_json(&record)?)
            .with_context(|| format!("writing transcript {}", path.display()))?;
    }

    let output = match s.format {
        Format::Text => {
            let plan = serde_json::to_string(&record.plan).map_err(anyhow::Error::from)?;
            format!(
                "N={n} K={k} M={m}, plan {plan}, desired W{}, GF(2^{})\ndownloaded {} of L={} → {}, decode {}\n",
                record.desired,
                config.width,
                record.downloaded,
                record.message_len,
                record.normalized_cost,
                if record.verified { "OK" } else { "MISMATCH" }
            )
        }
        Format::Json => to_json(&record)?,
        Format::Csv => bail_usage("retrieve supports text and json output")?,
    };
    if record.verified {
        Ok(output)
    } else {
        Err(Failure::Verification(output))
    }
}

fn bail_usage(msg: &str) -> Result<String, Failure> {
    Err(Failure::Usage(anyhow!("{msg}")))
}

fn parse_grid(items: &[String]) -> anyhow::Result<GridPoint> {
    let mut point = (None, None, None);
    for item in items.iter().flat_map(|s| s.split(',')) {
        let Some((key, value)) = item.split_once('=') else {
            bail!("--grid expects KEY=VALUE, got {item:?}");
        };
        let value: usize = value
            .trim()
            .parse()
            .with_context(|| format!("--grid value in {item:?}"))?;
        match key.trim() {
            "N" => point.0 = Some(value),
            "K" => point.1 = Some(value),
            "M" => point.2 = Some(value),
            other => bail!("--grid key must be N, K or M, got {other:?}"),
        }
    }
    match point {
        (Some(n), Some(k), Some(m)) => Ok(GridPoint::new(n, k, m)),
        _ => bail!("--grid needs all of N, K and M"),
    }
}

pub fn audit(a: &AuditArgs) -> Outcome {
    let s = Settings::resolve(&a.common)?;
    let mut spec = if !a.grid.is_empty() {
        SuiteSpec::single(parse_grid(&a.grid)?)
    } else if s.point_given() {
        let (n, k, m) = s.point();
        SuiteSpec::single(GridPoint::new(n, k, m))
    } else {
        SuiteSpec::standard()
    };
    if let Some(samples) = s.file.pick(a.samples, "samples")? {
        spec.samples = samples;
    }
    if let Some(alpha) = s.file.pick(a.alpha, "alpha")? {
        spec.alpha = alpha;
    }
    spec.seed = s.seed;
    spec.mutation = a.mutate;

    let suite = with_jobs(s.jobs, || run_suite(&spec))?;
    let output = match s.format {
        Format::Text => suite.summary(),
        Format::Json => to_json(&suite)?,
        Format::Csv => bail_usage("audit supports text and json output")?,
    };
    if suite.pass {
        Ok(output)
    } else {
        Err(Failure::Verification(output))
    }
}
