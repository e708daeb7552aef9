use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chansim_cli::checks::tally;
use chansim_cli::{evaluate_all, run, write_outputs, Check, Experiment, ExperimentConfig, Output, Preset, Table};
use clap::{Args, Parser, Subcommand};

/// Channel simulation and distributed matching experiments.
#[derive(Parser)]
#[command(name = "channel-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rejection sampling with the sorting and binning index codecs.
    RsCoding(RunArgs),
    /// Ensemble rejection sampling with the three-part index codec.
    ErsCoding(RunArgs),
    /// Two-party matching sweep over the batch size.
    Matching(RunArgs),
    /// Wyner-Ziv rate-distortion grid.
    Wz(RunArgs),
    /// Discrete greedy-rejection matching counterexample.
    GrsExample(RunArgs),
    /// Closed-form conditional matching bounds on a grid.
    Bounds(RunArgs),
    /// Re-evaluates the bound checks of CSV files written by a run.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Exit with status 1 when any check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Prints the effective configuration of a preset.
    ShowPreset { preset: Preset },
}

#[derive(Args)]
struct RunArgs {
    /// Named configuration; must belong to this experiment.
    #[arg(long)]
    preset: Option<Preset>,
    /// Flat key=value file applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shared-randomness key in hex.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output CSV path (default `<experiment>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 when any check fails.
    #[arg(long)]
    strict: bool,
    /// Comma-separated variances.
    #[arg(long)]
    sigma2: Option<String>,
    /// Comma-separated batch sizes.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated construction parameters of grs-example.
    #[arg(long)]
    k: Option<String>,
    /// Quantile bins for conditional matching estimates.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Any other setting, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build_config(experiment: Experiment, a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match a.preset {
        Some(p) if p.experiment() != experiment => bail!("preset {p} belongs to {}, not {experiment}", p.experiment()),
        Some(p) => ExperimentConfig::from_preset(p)?,
        None => ExperimentConfig::defaults(experiment),
    };
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k, v)?;
    }
    let flags: [(&str, Option<String>); 7] = [
        ("seed", a.seed.clone()),
        ("trials", a.trials.map(|t| t.to_string())),
        ("sigma2", a.sigma2.clone()),
        ("n", a.n.clone()),
        ("k", a.k.clone()),
        ("bins", a.bins.map(|b| b.to_string())),
        ("threads", a.threads.map(|t| t.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(out) = &a.out {
        cfg.out = Some(out.clone());
    }
    cfg.strict |= a.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(checks: &[Check]) -> bool {
    for c in checks {
        println!("{c}");
    }
    let (pass, fail) = tally(checks);
    println!("summary: {pass} passed, {fail} failed");
    fail == 0
}

fn run_command(experiment: Experiment, a: &RunArgs) -> Result<bool> {
    let cfg = build_config(experiment, a)?;
    if a.preset.is_some_and(Preset::long_running) {
        eprintln!("note: preset {} is long-running", a.preset.unwrap());
    }
    let progress = |msg: &str| eprintln!("[{}] {msg}", cfg.experiment);
    let outputs: Vec<Output> = run(&cfg, &progress)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("{experiment}.csv")));
    for p in write_outputs(&out, &outputs)? {
        eprintln!("wrote {}", p.display());
    }
    let ok = summarize(&evaluate_all(&outputs)?);
    Ok(ok || !cfg.strict)
}

fn verify(files: &[PathBuf], strict: bool) -> Result<bool> {
    let mut all = Vec::new();
    for f in files {
        let t = Table::read(f)?;
        let checks = chansim_cli::evaluate(&t).with_context(|| format!("in {}", f.display()))?;
        for c in &checks {
            if !c.passed() {
                eprintln!("{}: row {} failed: {}", f.display(), c.row, c.name);
            }
        }
        all.extend(checks);
    }
    Ok(summarize(&all) || !strict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RsCoding(a) => run_command(Experiment::RsCoding, a),
        Command::ErsCoding(a) => run_command(Experiment::ErsCoding, a),
        Command::Matching(a) => run_command(Experiment::Matching, a),
        Command::Wz(a) => run_command(Experiment::Wz, a),
        Command::GrsExample(a) => run_command(Experiment::GrsExample, a),
        Command::Bounds(a) => run_command(Experiment::Bounds, a),
        Command::Verify { files, strict } => verify(files, *strict),
        Command::ShowPreset { preset } => ExperimentConfig::from_preset(*preset).map(|c| {
            print!("{}", c.to_text());
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
