//! N-threaded store buffering and the timing sweep over it.
//!
//! Thread `i` stores 1 to `x{(i mod N) + 1}` and then loads `x{i}`. All
//! accesses are SC, so every final state except the all-zero one is
//! allowed: `2^N - 1` states.

use std::io;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::checker::{allowed, CheckConfig, CheckError};
use crate::frontend::parse_litmus;
use crate::models::{get_model, ModelOptions, UnknownModel};

pub const MIN_SB_THREADS: usize = 2;
pub const MAX_SB_THREADS: usize = 10;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("store buffering needs between {MIN_SB_THREADS} and {MAX_SB_THREADS} threads, not {0}")]
    Threads(usize),
    #[error(transparent)]
    Model(#[from] UnknownModel),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Litmus text of the `n`-thread store-buffering test.
pub fn generate_sb(n: usize) -> Result<String, ExperimentError> {
    if !(MIN_SB_THREADS..=MAX_SB_THREADS).contains(&n) {
        return Err(ExperimentError::Threads(n));
    }
    let locs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let threads: Vec<String> = (1..=n)
        .map(|i| format!("{{ store(x{}, 1); r{i} = load(x{i}); }}", i % n + 1))
        .collect();
    let query: Vec<String> = (1..=n).map(|i| format!("r{i} == 0")).collect();
    Ok(format!(
        "test SB{n} c11\natomic int {};\n{}\nexists ({})\n",
        locs.join(", "),
        threads.join("\n||\n"),
        query.join(" /\\ ")
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub mean_seconds: f64,
    pub states: usize,
    pub timed_out: bool,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub models: Vec<String>,
    pub threads: Vec<usize>,
    pub repeats: usize,
    /// Per run; a point that times out also skips larger `N` for its model.
    pub timeout: Duration,
    pub prune: bool,
    pub workers: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            models: vec!["c11_orig".into(), "c11_simp".into()],
            threads: (2..=6).collect(),
            repeats: 10,
            timeout: DEFAULT_TIMEOUT,
            prune: true,
            workers: None,
        }
    }
}

/// Time one `(model, N)` point.
pub fn bench_point(model: &str, n: usize, cfg: &BenchConfig) -> Result<BenchRow, ExperimentError> {
    let m = get_model(model, ModelOptions::default())?;
    let p = parse_litmus(&generate_sb(n)?).expect("generated tests parse");
    let mut total = Duration::ZERO;
    let mut states = 0;
    let mut runs = 0;
    for _ in 0..cfg.repeats.max(1) {
        let check = CheckConfig {
            prune: cfg.prune,
            workers: cfg.workers,
            ..CheckConfig::default()
        }
        .with_timeout(cfg.timeout);
        let start = Instant::now();
        let report = match allowed(&p, &m, &check) {
            Ok(r) => r,
            // a candidate space beyond the cap cannot finish either
            Err(CheckError::CandidateCap { .. }) => return Ok(timed_out(model, n, cfg)),
            Err(e) => return Err(e.into()),
        };
        if report.timed_out {
            return Ok(timed_out(model, n, cfg));
        }
        total += start.elapsed();
        states = report.states();
        runs += 1;
    }
    Ok(BenchRow {
        model: model.to_string(),
        n,
        mean_seconds: total.as_secs_f64() / runs as f64,
        states,
        timed_out: false,
    })
}

fn timed_out(model: &str, n: usize, cfg: &BenchConfig) -> BenchRow {
    BenchRow {
        model: model.to_string(),
        n,
        mean_seconds: cfg.timeout.as_secs_f64(),
        states: 0,
        timed_out: true,
    }
}

/// Every `(model, N)` point, models outermost.
pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, ExperimentError> {
    let mut rows = Vec::new();
    for model in &cfg.models {
        let mut gave_up = false;
        for &n in &cfg.threads {
            let row = if gave_up {
                timed_out(model, n, cfg)
            } else {
                bench_point(model, n, cfg)?
            };
            gave_up |= row.timed_out;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_csv<W: io::Write>(rows: &[BenchRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
