//! `heliofor`: photovoltaic power forecasting from weather features.
//!
//! Subcommands cover the full workflow: generate synthetic plant data,
//! train the hybrid forecaster, forecast ahead from a saved model, score
//! against held-out data, compare against baseline models, and rank the
//! input features. Identical configs and inputs give byte-identical
//! outputs. Failures print one `error:` line on stderr, exit nonzero, and
//! remove any partially written files.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use heliofor_cli::commands::{self, Ctx};
use heliofor_cli::config::{self, RunConfig};

#[derive(Parser)]
#[command(name = "heliofor", version, about = "Photovoltaic power forecasting toolkit")]
struct Cli {
    /// TOML run configuration. Every key has a default, so this is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the config. Stage seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (default `out`, or [paths] out_dir in the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic plant dataset (synthetic.csv).
    Synth {
        /// Days to generate, overriding [synth] days.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Train the forecasting pipeline and save it (model.heliofor).
    Train {
        /// Training CSV; must carry the pv_power column.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Epochs for both training stages, overriding the config.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Forecast ahead from a saved model (forecast.csv, forecast.svg).
    Forecast {
        /// Saved model file.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Measured history ending where the forecast begins.
        #[arg(long, value_name = "PATH")]
        history: Option<PathBuf>,
        /// Future weather features, starting one step after the history.
        #[arg(long, value_name = "PATH")]
        future: Option<PathBuf>,
        /// Step cap, overriding [forecast] horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Score the pipeline, or a saved model, on a dataset (evaluation.txt).
    Evaluate {
        /// Dataset CSV; must carry the pv_power column.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Saved model to score instead of training in-process.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Cross-validation folds, overriding [cv] k. 0 disables.
        #[arg(long, value_name = "K")]
        cv: Option<usize>,
    },
    /// Tune and score all four models on one split (comparison.txt, comparison.svg).
    Compare {
        /// Dataset CSV; must carry the pv_power column.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Randomized-search draws per model, overriding [search] budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Rank input features by elastic-net weight (importance.txt, importance.svg).
    Importance {
        /// Dataset CSV; must carry the pv_power column.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("HELIOFOR_LOG", "warn")
            .write_style("HELIOFOR_LOG_STYLE"),
    )
    .init();
    if let Err(err) = run() {
        // One line, however deep the cause chain or multi-line the source.
        let msg: String = format!("{err:#}")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join("; ");
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}

/// Flag beats config beats the built-in default.
fn input(
    flag: Option<PathBuf>,
    fallback: &Option<PathBuf>,
    what: &str,
    flag_name: &str,
) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| {
        anyhow!("no {what}: pass --{flag_name} or set [paths] {flag_name} in the config")
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    // Knob overrides land in the config before seed resolution and hashing,
    // so the reported hash names the run as executed.
    match &cli.command {
        Command::Synth { days: Some(d) } => cfg.synth.days = *d,
        Command::Train { epochs: Some(e), .. } => {
            cfg.narx.epochs = *e;
            cfg.lstm.epochs = *e;
        }
        Command::Forecast { horizon: Some(h), .. } => cfg.forecast.horizon = Some(*h),
        Command::Evaluate { cv: Some(k), .. } => cfg.cv.k = *k,
        Command::Compare { budget: Some(b), .. } => cfg.search.budget = *b,
        _ => {}
    }
    cfg.resolve_seeds()?;

    let out_dir = cli
        .out
        .or_else(|| cfg.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUT_DIR));
    let ctx = Ctx {
        seeds: cfg.seed_set(),
        sha: cfg.sha256_hex(),
        out_dir,
        cfg,
    };

    match cli.command {
        Command::Synth { .. } => commands::synth(&ctx),
        Command::Train { data, .. } => {
            let data = input(data, &ctx.cfg.paths.data, "training data", "data")?;
            commands::train(&ctx, &data)
        }
        Command::Forecast {
            model,
            history,
            future,
            ..
        } => {
            let model = input(model, &ctx.cfg.paths.model, "saved model", "model")?;
            let history = input(history, &ctx.cfg.paths.history, "measured history", "history")?;
            let future = input(future, &ctx.cfg.paths.future, "future features", "future")?;
            commands::forecast(&ctx, &model, &history, &future)
        }
        Command::Evaluate { data, model, .. } => {
            let data = input(data, &ctx.cfg.paths.data, "evaluation data", "data")?;
            // Scoring a saved model is a mode switch, so only the explicit
            // flag selects it; [paths] model stays a forecast input.
            commands::evaluate(&ctx, &data, model.as_deref())
        }
        Command::Compare { data, .. } => {
            let data = input(data, &ctx.cfg.paths.data, "comparison data", "data")?;
            commands::compare(&ctx, &data)
        }
        Command::Importance { data } => {
            let data = input(data, &ctx.cfg.paths.data, "importance data", "data")?;
            commands::importance(&ctx, &data)
        }
    }
}
