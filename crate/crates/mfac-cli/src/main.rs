//! Experiment runner CLI.
//!
//! `mfac run` executes one configured training (or idealized) run and writes
//! its artifact files; `mfac sweep` runs every case of a sweep file and
//! emits the combined metric table.
//!
//! Exit codes: 0 success, 1 runtime abort (snapshot path printed), 2
//! configuration error.

use clap::{Args, Parser, Subcommand};
use mfac::error::Error;
use mfac::experiment::{self, ExperimentConfig, RatesConfig, RunMode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mfac", version, about = "Mean-field actor-critic experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run(RunArgs),
    /// Run every case of a sweep file and write the combined table.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Base configuration file (TOML); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// mfg | mfc | mfcg | idealized-mfg | idealized-mfc
    #[arg(long)]
    mode: Option<String>,

    /// Named model preset (lq1d-paper | lq2d-paper | mfcg-default;
    /// idealized modes: grid5x3-random | ou6-chain).
    #[arg(long)]
    preset: Option<String>,

    #[arg(long)]
    steps: Option<u64>,

    #[arg(long)]
    seed: Option<u64>,

    /// Total number of state cells m (control-side runs).
    #[arg(long = "bins-state")]
    bins_state: Option<usize>,

    /// Total number of action cells l (control-side runs).
    #[arg(long = "bins-action")]
    bins_action: Option<usize>,

    /// Group batch size M.
    #[arg(long)]
    batch: Option<usize>,

    /// Output directory (defaults to $MFAC_OUT_DIR/<mode>-seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Checkpoint cadence in steps.
    #[arg(long)]
    checkpoint: Option<u64>,

    /// Schedule mode: constant | poly.
    #[arg(long)]
    schedule: Option<String>,

    /// Population-measure learning rate ρ^μ.
    #[arg(long = "rates.mu")]
    rate_mu: Option<f64>,

    /// Critic learning rate ρ^V.
    #[arg(long = "rates.v")]
    rate_v: Option<f64>,

    /// Actor learning rate ρ^Π.
    #[arg(long = "rates.pi")]
    rate_pi: Option<f64>,

    /// Slow global-measure rate ρ̃ (control game).
    #[arg(long = "rates.tilde")]
    rate_tilde: Option<f64>,

    /// Disable the empirical-average warm-up on measure schedules.
    #[arg(long = "no-measure-warmup")]
    no_measure_warmup: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep file with [[case]] tables.
    file: PathBuf,

    /// Output directory for per-case artifacts and the combined table.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::from_toml(&text)?
        }
        None => {
            let mode: RunMode = args
                .mode
                .as_deref()
                .ok_or_else(|| Error::Config("--mode (or --config) is required".into()))?
                .parse()?;
            ExperimentConfig::new(mode, "lq1d-paper")
        }
    };
    if let Some(mode) = &args.mode {
        cfg.mode = mode.parse()?;
    }
    if let Some(p) = &args.preset {
        cfg.preset = Some(p.clone());
        cfg.model = None;
    } else if cfg.preset.is_none() && cfg.model.is_none() {
        cfg.preset = Some(match cfg.mode {
            RunMode::Mfcg => "mfcg-default".into(),
            RunMode::IdealizedMfg | RunMode::IdealizedMfc => "grid5x3-random".into(),
            _ => "lq1d-paper".into(),
        });
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.bins_state {
        cfg.bins_state = v;
    }
    if let Some(v) = args.bins_action {
        cfg.bins_action = v;
    }
    if let Some(v) = args.batch {
        cfg.batch = v;
    }
    if let Some(v) = args.checkpoint {
        cfg.checkpoint = v;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.to_string_lossy().into_owned());
    }
    let wants_rates = args.schedule.is_some()
        || args.rate_mu.is_some()
        || args.rate_v.is_some()
        || args.rate_pi.is_some()
        || args.rate_tilde.is_some()
        || args.no_measure_warmup;
    if wants_rates {
        let mut rc = cfg.rates.take().unwrap_or_default();
        if let Some(s) = &args.schedule {
            rc.mode = s.clone();
        }
        if args.rate_mu.is_some() {
            rc.mu = args.rate_mu;
        }
        if args.rate_v.is_some() {
            rc.v = args.rate_v;
        }
        if args.rate_pi.is_some() {
            rc.pi = args.rate_pi;
        }
        if args.rate_tilde.is_some() {
            rc.tilde = args.rate_tilde;
        }
        if args.no_measure_warmup {
            rc.warmup = Some(false);
        }
        cfg.rates = Some(rc);
    }
    Ok(cfg)
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::DimensionMismatch { .. } | Error::InvalidRate(_)
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match build_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = cfg.validate() {
                eprintln!("configuration error: {e}");
                return ExitCode::from(2);
            }
            match experiment::run(&cfg) {
                Ok(artifacts) => {
                    println!("wrote {}", artifacts.summary.display());
                    ExitCode::SUCCESS
                }
                Err(Error::NonFiniteLoss { step, snapshot }) => {
                    let path = args
                        .out
                        .unwrap_or_else(|| PathBuf::from("."))
                        .join("abort_snapshot.json");
                    let _ = mfac::experiment::io::write_atomic(&path, &snapshot);
                    eprintln!("run aborted at step {step}; snapshot: {}", path.display());
                    ExitCode::from(1)
                }
                Err(e) if is_config_error(&e) => {
                    eprintln!("configuration error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Sweep(args) => {
            let text = match std::fs::read_to_string(&args.file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read sweep file: {e}");
                    return ExitCode::from(2);
                }
            };
            match experiment::sweep_file(&text, &args.out) {
                Ok(outcome) => {
                    println!("wrote {}", outcome.table_path.display());
                    for (name, o) in outcome.names.iter().zip(&outcome.outcomes) {
                        match o {
                            experiment::CaseOutcome::Done { e_mu, e_alpha, e_value, .. } => {
                                println!("{name}: e_mu={e_mu:.4} e_alpha={e_alpha:.4} e_V={e_value:.4}");
                            }
                            experiment::CaseOutcome::Failed(msg) => {
                                println!("{name}: FAILED ({msg})");
                            }
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) if is_config_error(&e) => {
                    eprintln!("configuration error: {e}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
