//! Command-line front end: runs an experiment from a JSON config (or the
//! built-in preset of the subcommand) and prints the per-point metrics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jamsense::harness::{run, ExperimentConfig, ExperimentKind, RunReport, MANIFEST_FILE};
use jamsense::{Error, Result};

#[derive(Parser)]
#[command(name = "jamsense", version, about = "Jammer detection, classification and avoidance experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Experiment config (JSON); the subcommand preset is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Detection ROC of the learned model against the energy detector.
    Detect,
    /// Jammer characterization, suppression or model update.
    Characterize,
    /// Jammer classification, or transport-based modulation classification.
    Classify,
    /// Modulation conversion through transport plans.
    Convert,
    /// Resource-block selection under jamming.
    Antijam,
    /// Threshold calibration or reference learning on clean data.
    Calibrate,
    /// Any experiment kind, taken from --config.
    Run,
}

impl Command {
    /// Kinds the subcommand accepts from a config; the first is its preset.
    fn kinds(self) -> &'static [ExperimentKind] {
        use ExperimentKind::*;
        match self {
            Command::Detect => &[Detect],
            Command::Characterize => &[Characterize, Suppress, Update],
            Command::Classify => &[Classify, Amc],
            Command::Convert => &[Convert],
            Command::Antijam => &[Antijam],
            Command::Calibrate => &[Calibrate, Learn],
            Command::Run => &ExperimentKind::ALL,
        }
    }
}

fn resolve(cmd: Command, g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if matches!(cmd, Command::Run) => return Err(Error::Config("run needs --config".into())),
        None => ExperimentConfig::preset(cmd.kinds()[0]),
    };
    if !cmd.kinds().contains(&cfg.kind) {
        return Err(Error::Config(format!("config kind {} does not match this subcommand", cfg.kind)));
    }
    if let Some(s) = g.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn print_report(cfg: &ExperimentConfig, report: &RunReport) {
    for p in &report.points {
        let pt = &p.point;
        let metrics: Vec<String> = p.metrics.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        println!(
            "{} snr={} jsr={} L={} bw={} seed={}: {}",
            cfg.kind,
            pt.snr_db,
            pt.jsr_db,
            pt.l,
            pt.bandwidth,
            pt.seed,
            metrics.join(" ")
        );
    }
    println!(
        "{} artifacts listed in {}",
        report.manifest.artifacts.len(),
        cfg.output_dir.join(MANIFEST_FILE).display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command, &cli.global).and_then(|cfg| run(&cfg).map(|r| (cfg, r)));
    match result {
        Ok((cfg, report)) => {
            print_report(&cfg, &report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
