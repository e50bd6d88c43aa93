//! Command implementations.
//!
//! Every file write goes through an [`OutputGuard`], so a command that fails
//! partway leaves nothing behind. Each command finishes by printing the
//! paths it wrote; progress detail goes to the log (`HELIOFOR_LOG`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use heliofor_core::data::{split_chronological, Dataset, FEATURE_NAMES};
use heliofor_core::eval::{
    compare_models, compute_metrics, kfold_cv, CompareConfig, CvReport, ExtraTreesConfig,
};
use heliofor_core::hybrid::{evaluate_block, predict_hybrid, train_hybrid, PipelineConfig};
use heliofor_core::linear::{fit_elastic_net, rank_features};
use heliofor_core::synth::generate;
use heliofor_core::Matrix;
use log::info;

use crate::config::{RunConfig, SeedSet};
use crate::csv;
use crate::model_format;
use crate::report::Report;
use crate::svg::{self, palette, Series};

/// Everything a command needs besides its input paths. The config arrives
/// with flag overrides applied and seeds resolved, so `sha` names the run
/// as actually executed.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seeds: SeedSet,
    pub sha: String,
    pub out_dir: PathBuf,
}

/// Records every file written and, unless disarmed, removes them on drop.
/// Commands disarm only after their last write, so an error anywhere cleans
/// up every partial output.
pub struct OutputGuard {
    written: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        OutputGuard {
            written: Vec::new(),
            armed: true,
        }
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating directory {}", dir.display()))?;
            }
        }
        self.written.push(path.to_path_buf());
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn load_training_data(path: &Path) -> Result<Dataset> {
    let data = csv::parse_csv(path)?;
    if !data.has_power() {
        bail!("{}: needs the pv_power column", path.display());
    }
    info!("parsed {} rows from {}", data.len(), path.display());
    Ok(data)
}

pub fn synth(ctx: &Ctx) -> Result<()> {
    let data = generate(&ctx.cfg.synth.plant_spec(), &ctx.cfg.synth.synth_config())?;
    let path = ctx.out_dir.join("synthetic.csv");
    let mut guard = OutputGuard::new();
    guard.write(&path, &csv::dataset_to_csv(&data))?;
    guard.disarm();
    println!("wrote {} ({} rows)", path.display(), data.len());
    Ok(())
}

pub fn train(ctx: &Ctx, data_path: &Path) -> Result<()> {
    let data = load_training_data(data_path)?;
    let pipeline = ctx.cfg.pipeline_config()?;
    let (model, eval) = train_hybrid(&data, &pipeline)?;
    info!("stages: {}", eval.stage_trace.join(" -> "));
    let path = ctx.out_dir.join("model.heliofor");
    let mut guard = OutputGuard::new();
    guard.write(&path, &model_format::to_text(&model))?;
    guard.disarm();
    let m = eval.test_metrics.expect("training always scores the test window");
    println!(
        "wrote {} (test rmse {} W, mae {} W)",
        path.display(),
        m.rmse,
        m.mae
    );
    Ok(())
}

pub fn forecast(
    ctx: &Ctx,
    model_path: &Path,
    history_path: &Path,
    future_path: &Path,
) -> Result<()> {
    let model = model_format::load(model_path)?;
    let history = csv::parse_csv(history_path)?;
    if !history.has_power() {
        bail!("{}: forecast history needs the pv_power column", history_path.display());
    }
    let future = csv::parse_csv(future_path)?;
    let step = history.step_seconds();
    if future.len() > 1 && future.step_seconds() != step {
        bail!(
            "{}: sampled every {}s but the history grid is {}s",
            future_path.display(),
            future.step_seconds(),
            step
        );
    }
    let expected = history.records().last().expect("non-empty").timestamp + step;
    let first = future.records()[0].timestamp;
    if first != expected {
        bail!(
            "{}: must start one step after the history ends (expected timestamp {expected}, got {first})",
            future_path.display()
        );
    }

    let horizon = ctx
        .cfg
        .forecast
        .horizon
        .unwrap_or(future.len())
        .min(future.len());
    let mut features = Matrix::zeros(0, 0);
    for rec in future.records().iter().take(horizon) {
        features.push_row(&rec.features())?;
    }
    let forecast = predict_hybrid(&model, &history, &features)?;
    info!(
        "{} steps forecast, {} feedback clamps, {} floored at zero",
        horizon, forecast.narx_clamped_steps, forecast.floored_steps
    );

    let timestamps: Vec<i64> = future
        .records()
        .iter()
        .take(horizon)
        .map(|r| r.timestamp)
        .collect();
    let actual: Option<Vec<f64>> = future.powers().map(|p| p[..horizon].to_vec());

    let csv_path = ctx.out_dir.join("forecast.csv");
    let mut guard = OutputGuard::new();
    guard.write(
        &csv_path,
        &csv::forecast_to_csv(&timestamps, &forecast.watts, actual.as_deref()),
    )?;
    let mut also = String::new();
    if let Some(actual) = &actual {
        if horizon > 0 {
            let plot = svg::line_plot(
                "forecast vs measured power",
                "watts",
                &[
                    Series {
                        label: "actual",
                        color: palette::ACTUAL,
                        values: actual,
                    },
                    Series {
                        label: "narx_lstm",
                        color: palette::NARX_LSTM,
                        values: &forecast.watts,
                    },
                ],
            );
            let svg_path = ctx.out_dir.join("forecast.svg");
            guard.write(&svg_path, &plot)?;
            also = format!(" and {}", svg_path.display());
        }
    }
    guard.disarm();
    println!("wrote {}{} ({} steps)", csv_path.display(), also, horizon);
    Ok(())
}

/// First `lag` rows as lag context, the rest as the scored block.
fn split_context(data: &Dataset, lag: usize) -> Result<(Dataset, Dataset)> {
    if data.len() <= lag {
        bail!(
            "need more than {lag} rows ({lag} lag context plus a scored block), got {}",
            data.len()
        );
    }
    let recs = data.records();
    let step = data.step_seconds();
    let context = Dataset::new(recs[..lag].to_vec(), step)?;
    let block = Dataset::new(recs[lag..].to_vec(), step)?;
    Ok((context, block))
}

/// k-fold cross-validation of the whole pipeline. The first `lag` rows of
/// the dataset only ever serve as lag context, so the folds partition the
/// remaining rows. Each fold retrains from scratch on the larger of the two
/// spans beside its validation block (a contiguous slice keeps the time
/// grid intact) and scores the block teacher-forced, anchored on the rows
/// immediately before it.
fn hybrid_cv(data: &Dataset, pipeline: &PipelineConfig, k: usize) -> Result<CvReport> {
    let lag = pipeline.narx.d_u.max(pipeline.narx.d_y);
    if data.len() <= lag + k {
        bail!(
            "{k}-fold cross-validation needs more than {} rows, got {}",
            lag + k,
            data.len()
        );
    }
    let recs = data.records();
    let step = data.step_seconds();
    let cv_data = Dataset::new(recs[lag..].to_vec(), step)?;
    let report = kfold_cv(&cv_data, k, |fold| {
        let start = fold.validation.start + lag;
        let end = fold.validation.end + lag;
        let before = &recs[..start];
        let after = &recs[end..];
        let train_slice = if before.len() >= after.len() { before } else { after };
        let train_data = Dataset::new(train_slice.to_vec(), step)?;
        let (model, _) = train_hybrid(&train_data, pipeline)?;
        let context = Dataset::new(recs[start - lag..start].to_vec(), step)?;
        let block = Dataset::new(recs[start..end].to_vec(), step)?;
        evaluate_block(&model, &context, &block)
    })?;
    Ok(report)
}

pub fn evaluate(ctx: &Ctx, data_path: &Path, model_path: Option<&Path>) -> Result<()> {
    let data = load_training_data(data_path)?;
    let k = ctx.cfg.cv.k;
    let mut report = Report::new("evaluate", &ctx.sha, &ctx.seeds, &data);
    let summary;

    match model_path {
        Some(model_path) => {
            if k > 0 {
                bail!("cross-validation retrains per fold and cannot be combined with --model");
            }
            let model = model_format::load(model_path)?;
            let lag = model.narx.config.d_u.max(model.narx.config.d_y);
            let (context, block) = split_context(&data, lag)?;
            let predicted = evaluate_block(&model, &context, &block)?;
            let actual = block.powers().expect("power checked above");
            let metrics = compute_metrics(&actual, &predicted)?;
            report.metrics(&metrics, block.len(), Some(lag));
            let timestamps: Vec<i64> = block.records().iter().map(|r| r.timestamp).collect();
            report.predictions(&timestamps, &predicted, Some(&actual));
            summary = metrics;
        }
        None => {
            let pipeline = ctx.cfg.pipeline_config()?;
            let (_, eval) = train_hybrid(&data, &pipeline)?;
            let metrics = eval.test_metrics.expect("training always scores the test window");
            let predicted = eval
                .test_predictions
                .expect("training always scores the test window");
            let (_, test) = split_chronological(&data, pipeline.train_fraction)?;
            report.metrics(&metrics, test.len(), None);
            report.stages(&eval.stage_trace);
            if k > 0 {
                info!("running {k}-fold cross-validation");
                report.cv(&hybrid_cv(&data, &pipeline, k)?);
            }
            let timestamps: Vec<i64> = test.records().iter().map(|r| r.timestamp).collect();
            let actual = test.powers().expect("power checked above");
            report.predictions(&timestamps, &predicted, Some(&actual));
            summary = metrics;
        }
    }

    let path = ctx.out_dir.join("evaluation.txt");
    let mut guard = OutputGuard::new();
    guard.write(&path, &report.finish())?;
    guard.disarm();
    println!(
        "wrote {} (rmse {} W, mae {} W, mape {}%)",
        path.display(),
        summary.rmse,
        summary.mae,
        summary.mape
    );
    Ok(())
}

fn model_color(name: &str) -> &'static str {
    match name {
        "narx_lstm" => palette::NARX_LSTM,
        "lstm" => palette::LSTM,
        "knn" => palette::KNN,
        "extra_trees" => palette::EXTRA_TREES,
        _ => "#202020",
    }
}

pub fn compare(ctx: &Ctx, data_path: &Path) -> Result<()> {
    let data = load_training_data(data_path)?;
    let compare_cfg = CompareConfig {
        train_fraction: ctx.cfg.pipeline.train_fraction,
        budget: ctx.cfg.search.budget,
        seed: ctx.seeds.search,
        narx_base: ctx.cfg.narx.narx_config(),
        lstm_base: ctx.cfg.lstm.lstm_config()?,
        extra_trees_base: ExtraTreesConfig {
            seed: ctx.seeds.search,
            ..ExtraTreesConfig::default()
        },
    };
    let comparison = compare_models(&data, &compare_cfg)?;

    let mut report = Report::new("compare", &ctx.sha, &ctx.seeds, &data);
    report.comparison(&comparison);
    let txt_path = ctx.out_dir.join("comparison.txt");
    let mut guard = OutputGuard::new();
    guard.write(&txt_path, &report.finish())?;

    let (_, test) = split_chronological(&data, compare_cfg.train_fraction)?;
    let actual = test.powers().expect("power checked above");
    let mut series = vec![Series {
        label: "actual",
        color: palette::ACTUAL,
        values: &actual,
    }];
    for row in &comparison.rows {
        if let Some(predictions) = &row.predictions {
            series.push(Series {
                label: &row.model,
                color: model_color(&row.model),
                values: predictions,
            });
        }
    }
    let svg_path = ctx.out_dir.join("comparison.svg");
    guard.write(
        &svg_path,
        &svg::line_plot("model comparison on the test window", "watts", &series),
    )?;
    guard.disarm();
    let best = comparison.best_model.as_deref().unwrap_or("-");
    println!(
        "wrote {} and {} (best: {best})",
        txt_path.display(),
        svg_path.display()
    );
    Ok(())
}

pub fn importance(ctx: &Ctx, data_path: &Path) -> Result<()> {
    let data = load_training_data(data_path)?;
    let x = data.features_matrix();
    let y = data.powers().expect("power checked above");
    let model = fit_elastic_net(
        &x,
        &y,
        ctx.cfg.importance.lambda,
        ctx.cfg.importance.l1_ratio,
        1e-8,
    )?;
    let ranking = rank_features(&model, &FEATURE_NAMES)?;

    let mut report = Report::new("importance", &ctx.sha, &ctx.seeds, &data);
    report.importance(&ranking);
    let txt_path = ctx.out_dir.join("importance.txt");
    let mut guard = OutputGuard::new();
    guard.write(&txt_path, &report.finish())?;

    let bars: Vec<(&str, f64)> = ranking
        .entries
        .iter()
        .map(|(name, weight)| (name.as_str(), *weight))
        .collect();
    let svg_path = ctx.out_dir.join("importance.svg");
    guard.write(
        &svg_path,
        &svg::bar_chart("feature importance", "share of coefficient magnitude", &bars),
    )?;
    guard.disarm();
    let top = if ranking.no_signal {
        "no signal".to_string()
    } else {
        ranking.entries[0].0.clone()
    };
    println!(
        "wrote {} and {} (top: {top})",
        txt_path.display(),
        svg_path.display()
    );
    Ok(())
}
