//! `ddlink`: run delay-Doppler link experiments from a config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ddlink_core::channel::ChannelProfile;
use ddlink_core::config::ConfigMap;
use ddlink_core::harness::{self, ExperimentSpec, PAPER_SCALE};

#[derive(Parser)]
#[command(
    name = "ddlink",
    version,
    about = "OTFS / SC-IFDMA link-level experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Master seed, replaces `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count, replaces `trials` from the config.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Use the 128 x 32 grid with the full EVA profile.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv and metadata.txt.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config file without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the built-in channel profiles.
    ListProfiles,
}

fn load(path: &Path, ov: &Overrides) -> Result<(ExperimentSpec, String)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ConfigMap::parse(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = ov.seed {
        cfg.set("seed", seed);
    }
    if let Some(trials) = ov.trials {
        cfg.set("trials", trials);
    }
    if let Some(p) = ov.parallelism {
        cfg.set("parallelism", p);
    }
    if ov.paper_scale {
        eprintln!("warning: paper scale (128 x 32, EVA) runs for minutes to tens of minutes");
        for (k, v) in PAPER_SCALE {
            cfg.set(k, v);
        }
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let spec = ExperimentSpec::from_config(&cfg, base)
        .with_context(|| format!("in {}", path.display()))?;
    Ok((spec, text))
}

fn list_profiles() {
    for name in ChannelProfile::NAMES {
        let p = ChannelProfile::by_name(name).expect("built-in profile");
        let taps = p.taps.len();
        let limit = p
            .max_taps
            .map_or(String::new(), |k| format!(", strongest {k} kept"));
        println!(
            "{name:<11} {taps} taps, {:?} fading, {:?} Doppler{limit}",
            p.fading, p.doppler
        );
    }
    println!("custom      channel.taps.delay_ns / power_db / doppler_hz lists");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            overrides,
        } => load(&config, &overrides).and_then(|(spec, text)| {
            let output = harness::run(&spec)?;
            harness::write_outputs(&out, &spec, &text, &output)?;
            eprintln!(
                "{} rows in {:.1} s -> {}",
                output.rows.len(),
                output.elapsed.as_secs_f64(),
                out.display()
            );
            Ok(())
        }),
        Command::Validate { config, overrides } => load(&config, &overrides).map(|(spec, _)| {
            println!("ok: {} ({}, {} trials)", spec.id, spec.kind, spec.trials);
        }),
        Command::ListProfiles => {
            list_profiles();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
