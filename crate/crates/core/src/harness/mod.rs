//! Seeded Monte-Carlo experiments and their CSV/metadata output.
//!
//! Every trial draws its channel, data, noise and impairments from its own
//! streams ([`seed_stream`]); all waveforms and SNR points of a trial reuse
//! those draws, so the waveforms are compared on identical realizations.
//! Trials run in parallel and are reduced in trial order, which makes the
//! output independent of scheduling.

mod link;
mod seed;
mod spec;

pub use link::{noise_variance, signal_power, trial_decisions};
pub use seed::{seed_stream, Component};
pub use spec::{
    ChannelSpec, CsiMode, EqMethod, ExperimentKind, ExperimentSpec, ImpairmentSpec, PAPER_SCALE,
};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::modem::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ber,
    CfoMse,
    ToMeanError,
    ToFineMeanError,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Ber => "BER",
            Metric::CfoMse => "CFO_MSE",
            Metric::ToMeanError => "TO_mean_error",
            Metric::ToFineMeanError => "TO_fine_mean_error",
        }
    }
}

/// One aggregated output value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub waveform: Waveform,
    pub snr_db: f64,
    pub metric: Metric,
    /// Extra cell coordinate such as `threshold=0.4` or `user=1`; empty if none.
    pub parameter: String,
    pub value: f64,
    pub trials: u64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "experiment,waveform,snr_db,metric,parameter,value,trials,seed";

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.waveform,
            r.snr_db,
            r.metric.as_str(),
            r.parameter,
            r.value,
            r.trials,
            r.seed
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub elapsed: Duration,
}

/// Runs every trial of the experiment and aggregates the cells.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let trial_results = || -> Result<Vec<link::TrialCells>> {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| link::run_trial(spec, t))
            .collect()
    };
    let per_trial = match spec.parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(trial_results)?,
        None => trial_results()?,
    };
    let mut total = link::TrialCells::empty(spec);
    for cells in &per_trial {
        total.merge(cells);
    }
    Ok(RunOutput {
        rows: total.rows(spec),
        elapsed: start.elapsed(),
    })
}

/// Hex SHA-256 over `blob <len>\0<content>`, the git object hashing scheme.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn metadata(spec: &ExperimentSpec, config_text: &str, out: &RunOutput) -> String {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut s = String::new();
    writeln!(s, "tool = ddlink {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "config_sha256 = {}", content_hash(config_text)).unwrap();
    writeln!(s, "finished_unix_s = {now}").unwrap();
    writeln!(s, "wall_clock_s = {:.3}", out.elapsed.as_secs_f64()).unwrap();
    writeln!(s, "rows = {}", out.rows.len()).unwrap();
    writeln!(
        s,
        "snr_definition = average received power per sample (unit-energy channel, data and pilot) over noise variance"
    )
    .unwrap();
    writeln!(s, "to_error_unit = samples, cyclic distance modulo M").unwrap();
    writeln!(s, "\n[spec]").unwrap();
    s.push_str(&spec.echo());
    s
}

/// Writes `results.csv` and `metadata.txt` into `dir`.
pub fn write_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    config_text: &str,
    out: &RunOutput,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), to_csv(&out.rows))?;
    fs::write(dir.join("metadata.txt"), metadata(spec, config_text, out))?;
    Ok(())
}
