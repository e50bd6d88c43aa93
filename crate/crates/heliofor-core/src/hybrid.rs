//! The two-stage forecasting pipeline: a NARX network learns the
//! weather-to-power map first, then an LSTM is trained over the weather
//! features augmented with the NARX estimate, smoothing its residual
//! structure. Training uses the teacher-forced NARX estimates; forecasting
//! feeds the closed-loop ones, since true lags do not exist in the future.
//!
//! Augmented rows pair time t's weather with the network's estimate of
//! y(t), so the LSTM is a same-time refiner rather than a second
//! step-ahead predictor. The first max(d_u, d_y) rows of any series have
//! incomplete lag coverage and carry no estimate; they are dropped and
//! counted, never padded, because a padded estimate would be an invented
//! measurement.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{
    fit_scaler, make_windows_series, split_chronological, transform, Column, Dataset,
    MinMaxScaler, WeatherRecord, FEATURE_COUNT, FEATURE_NAMES,
};
use crate::eval::{compute_metrics, EvalReport};
use crate::lstm::{forward_sequence, step_state, train_lstm, LstmConfig, LstmStack, LstmState};
use crate::matrix::Matrix;
use crate::narx::{
    forecast_parallel_series, sp_predictions, train_series_parallel, NarxConfig, NarxNetwork,
};
use crate::{Error, Result};

/// Name of the appended estimate column, shared by reports and files.
pub const NARX_COLUMN: &str = "narx_power";

/// Pipeline stages in execution order, as reported in the stage trace.
pub const STAGE_NAMES: [&str; 6] = [
    "split",
    "fit_scaler",
    "train_narx",
    "augment",
    "train_lstm",
    "evaluate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub narx: NarxConfig,
    pub lstm: LstmConfig,
    /// Chronological train share, strictly between 0 and 1.
    pub train_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            narx: NarxConfig::default(),
            lstm: LstmConfig::default(),
            train_fraction: 0.8,
        }
    }
}

/// Both trained stages plus the scaler that defines their shared input
/// space. The LSTM's input width is always the weather feature count plus
/// one for the appended estimate column.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    pub narx: NarxNetwork,
    pub lstm: LstmStack,
    pub scaler: MinMaxScaler,
    /// Base feature names followed by [`NARX_COLUMN`].
    pub feature_names: Vec<String>,
}

/// Appends the teacher-forced one-step NARX estimate to every feature row
/// with full lag coverage. Output row i corresponds to series step
/// lag + i and carries u(t) plus the estimate of y(t); the returned
/// targets are the matching y(t) values and `dropped` counts the leading
/// rows lost to the lag window.
fn augment_series(
    u: &Matrix,
    y: &[f64],
    narx: &NarxNetwork,
) -> Result<(Matrix, Vec<f64>, usize)> {
    let d_u = narx.config.d_u;
    let d_y = narx.config.d_y;
    let lag = d_u.max(d_y);
    let windows = make_windows_series(u, y, d_u, d_y)?;
    let estimates = sp_predictions(narx, &windows)?;
    let mut rows = Matrix::zeros(0, u.cols() + 1);
    let mut row = Vec::with_capacity(u.cols() + 1);
    for (i, est) in estimates.iter().enumerate() {
        let t = lag + i;
        row.clear();
        row.extend_from_slice(u.row(t));
        row.push(*est);
        rows.push_row(&row)?;
    }
    let targets = y[lag..].to_vec();
    Ok((rows, targets, lag))
}

fn scaled_series(data: &Dataset) -> Result<(Matrix, Vec<f64>)> {
    let y = data.powers().ok_or_else(|| Error::InvalidData {
        row: 0,
        reason: "pipeline needs the pv_power column".to_string(),
    })?;
    Ok((data.features_matrix(), y))
}

/// Trains the full pipeline and evaluates it on the held-out tail.
///
/// The six stages run in a fixed order: chronological split, scaler fitted
/// on the training rows only, NARX trained teacher-forced on the scaled
/// training series, estimate column appended over both sides, LSTM trained
/// on the augmented training rows, and finally held-out scoring in watts.
/// The returned report's stage trace records that order; its test metrics
/// and predictions align with the test rows that survive nothing (every
/// test row is scored: the estimate windows for the early test rows borrow
/// their lags from the tail of the training series).
pub fn train_hybrid(data: &Dataset, cfg: &PipelineConfig) -> Result<(HybridModel, EvalReport)> {
    train_hybrid_impl(data, cfg, None)
}

fn train_hybrid_impl(
    data: &Dataset,
    cfg: &PipelineConfig,
    narx_override: Option<NarxNetwork>,
) -> Result<(HybridModel, EvalReport)> {
    let mut stage_trace: Vec<String> = Vec::with_capacity(STAGE_NAMES.len());

    let (train, test) = split_chronological(data, cfg.train_fraction)?;
    stage_trace.push("split".to_string());

    let scaler = fit_scaler(&train)?;
    let train_scaled = transform(&scaler, &train);
    stage_trace.push("fit_scaler".to_string());

    let (train_u, train_y) = scaled_series(&train_scaled)?;
    let windows = make_windows_series(&train_u, &train_y, cfg.narx.d_u, cfg.narx.d_y)?;
    let (narx, narx_trace) = match narx_override {
        Some(net) => (net, Vec::new()),
        None => train_series_parallel(&windows, &cfg.narx)?,
    };
    stage_trace.push("train_narx".to_string());

    let (aug_train, aug_train_targets, _) = augment_series(&train_u, &train_y, &narx)?;
    stage_trace.push("augment".to_string());

    let (lstm, lstm_trace) = train_lstm(&aug_train, &aug_train_targets, &cfg.lstm)?;
    stage_trace.push("train_lstm".to_string());

    let mut feature_names: Vec<String> = FEATURE_NAMES.iter().map(|n| n.to_string()).collect();
    feature_names.push(NARX_COLUMN.to_string());
    let model = HybridModel {
        narx,
        lstm,
        scaler,
        feature_names,
    };

    let preds_watts = evaluate_block(&model, &train, &test)?;
    let actual_watts = test.powers().expect("power checked above");
    let metrics = compute_metrics(&actual_watts, &preds_watts)?;
    stage_trace.push("evaluate".to_string());
    let report = EvalReport {
        test_metrics: Some(metrics),
        test_predictions: Some(preds_watts),
        stage_trace,
        narx_trace,
        lstm_trace,
        cv: None,
        comparison: None,
    };
    Ok((model, report))
}

/// Teacher-forced scoring of `block` given `context`, the rows that
/// immediately precede it in the same series. Both sides carry raw-unit
/// power; the NARX estimate for each block row anchors its lag window in
/// the context tail, so every block row is scored. The LSTM reads the
/// block as one sequence from a zero state. Predictions come back in
/// watts, floored at zero.
pub fn evaluate_block(
    model: &HybridModel,
    context: &Dataset,
    block: &Dataset,
) -> Result<Vec<f64>> {
    let lag = model.narx.config.d_u.max(model.narx.config.d_y);
    if context.len() < lag {
        return Err(Error::InsufficientData {
            required: lag,
            actual: context.len(),
        });
    }
    let context_scaled = transform(&model.scaler, context);
    let block_scaled = transform(&model.scaler, block);
    let (context_u, context_y) = scaled_series(&context_scaled)?;
    let (block_u, block_y) = scaled_series(&block_scaled)?;

    let mut concat_u = Matrix::zeros(0, FEATURE_COUNT);
    for t in context.len() - lag..context.len() {
        concat_u.push_row(context_u.row(t))?;
    }
    for row in block_u.iter_rows() {
        concat_u.push_row(row)?;
    }
    let mut concat_y = context_y[context.len() - lag..].to_vec();
    concat_y.extend_from_slice(&block_y);

    let (aug_block, _, _) = augment_series(&concat_u, &concat_y, &model.narx)?;
    Ok(forward_sequence(&model.lstm, &aug_block)?
        .into_iter()
        .map(|p| model.scaler.unscale_value(p, Column::PvPower).max(0.0))
        .collect())
}

/// A multi-step forecast in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridForecast {
    /// One non-negative power value per future step.
    pub watts: Vec<f64>,
    /// Future steps whose NARX feedback hit the scaled-space clamp.
    pub narx_clamped_steps: usize,
    /// Future steps whose watt value was raised to zero.
    pub floored_steps: usize,
}

/// Forecasts `future_features.rows()` steps past the end of `history`.
///
/// The history (raw units, with power) must cover the NARX lag window plus
/// at least one augmented row to warm the LSTM state; the future features
/// are raw weather rows for the horizon. Per step the NARX closed-loop
/// estimate is appended to the scaled weather vector, the LSTM advances
/// one step, and its output is mapped back to watts and floored at zero.
pub fn predict_hybrid(
    model: &HybridModel,
    history: &Dataset,
    future_features: &Matrix,
) -> Result<HybridForecast> {
    if future_features.rows() > 0 && future_features.cols() != FEATURE_COUNT {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_COUNT,
            actual: future_features.cols(),
        });
    }
    let lag = model.narx.config.d_u.max(model.narx.config.d_y);
    if history.len() < lag + 1 {
        return Err(Error::InsufficientData {
            required: lag + 1,
            actual: history.len(),
        });
    }
    let hist_scaled = transform(&model.scaler, history);
    let (hist_u, hist_y) = scaled_series(&hist_scaled)?;

    let mut future_scaled = Matrix::zeros(0, FEATURE_COUNT);
    for row in future_features.iter_rows() {
        let raw = [row[0], row[1], row[2], row[3]];
        future_scaled.push_row(&model.scaler.scale_features(&raw))?;
    }

    let narx_fc = forecast_parallel_series(&model.narx, &hist_u, &hist_y, &future_scaled)?;

    // Warm the recurrent state over the history before entering the
    // horizon; starting cold would waste the known past.
    let (aug_hist, _, _) = augment_series(&hist_u, &hist_y, &model.narx)?;
    let mut state = LstmState::zeros(&model.lstm);
    for row in aug_hist.iter_rows() {
        step_state(&model.lstm, &mut state, row)?;
    }

    let horizon = future_scaled.rows();
    let mut watts = Vec::with_capacity(horizon);
    let mut floored_steps = 0;
    let mut x = vec![0.0; FEATURE_COUNT + 1];
    for h in 0..horizon {
        x[..FEATURE_COUNT].copy_from_slice(future_scaled.row(h));
        x[FEATURE_COUNT] = narx_fc.predictions[h];
        let scaled = step_state(&model.lstm, &mut state, &x)?;
        let w = model.scaler.unscale_value(scaled, Column::PvPower);
        if w < 0.0 {
            floored_steps += 1;
            watts.push(0.0);
        } else {
            watts.push(w);
        }
    }
    Ok(HybridForecast {
        watts,
        narx_clamped_steps: narx_fc.clamped_steps,
        floored_steps,
    })
}

/// A dataset with the NARX estimate column attached, ready for file
/// export. Rows without full lag coverage are dropped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    /// Surviving records, aligned with `narx_power`.
    pub records: Vec<WeatherRecord>,
    /// Teacher-forced NARX estimate per surviving record, in the
    /// dataset's own power units.
    pub narx_power: Vec<f64>,
    /// Leading records dropped for lacking lag coverage.
    pub dropped: usize,
    pub step_seconds: i64,
}

/// Attaches the teacher-forced NARX estimate column to a dataset, in
/// whatever space the dataset itself is in (no scaling is applied; a
/// caller holding a scaled-space network must pass a scaled dataset).
pub fn export_augmented(data: &Dataset, narx: &NarxNetwork) -> Result<AugmentedDataset> {
    let (u, y) = scaled_series(data)?;
    let windows = make_windows_series(&u, &y, narx.config.d_u, narx.config.d_y)?;
    let narx_power = sp_predictions(narx, &windows)?;
    let lag = narx.config.d_u.max(narx.config.d_y);
    Ok(AugmentedDataset {
        records: data.records()[lag..].to_vec(),
        narx_power,
        dropped: lag,
        step_seconds: data.step_seconds(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float;
    use crate::lstm::HeadActivation;
    use crate::synth::{generate, PlantSpec, SynthConfig};

    fn toy_dataset(n: usize) -> Dataset {
        let records: Vec<WeatherRecord> = (0..n)
            .map(|i| {
                let phase = i as f64 * 0.13;
                let g = 400.0 * (1.0 + float::sin(phase));
                WeatherRecord {
                    timestamp: i as i64 * 300,
                    irradiance: g,
                    temperature: 15.0 + 5.0 * float::cos(phase * 0.7),
                    wind_speed: 2.0 + float::sin(phase * 1.3).abs(),
                    relative_humidity: 50.0 + 20.0 * float::sin(phase * 0.4),
                    pv_power: Some(40.0 * g + 500.0),
                }
            })
            .collect();
        Dataset::new(records, 300).unwrap()
    }

    fn quick_config() -> PipelineConfig {
        PipelineConfig {
            narx: NarxConfig {
                d_u: 2,
                d_y: 1,
                hidden_units: 4,
                learning_rate: 0.2,
                epochs: 3,
                batch_size: 16,
                seed: 5,
            },
            lstm: LstmConfig {
                hidden_size: 4,
                layers: 1,
                epochs: 3,
                learning_rate: 0.05,
                momentum: 0.9,
                batch_size: 4,
                sequence_length: 16,
                head: HeadActivation::Linear,
                forget_bias: 1.0,
                seed: 5,
            },
            train_fraction: 0.8,
        }
    }

    fn zeroed_narx(cfg: &NarxConfig) -> NarxNetwork {
        let mut net = NarxNetwork::init(cfg, FEATURE_COUNT).unwrap();
        for w in net.input_weights.data_mut() {
            *w = 0.0;
        }
        for b in &mut net.input_bias {
            *b = 0.0;
        }
        for w in &mut net.output_weights {
            *w = 0.0;
        }
        net.output_bias = 0.0;
        net
    }

    #[test]
    fn stages_run_in_the_documented_order() {
        let data = toy_dataset(120);
        let (_, report) = train_hybrid(&data, &quick_config()).unwrap();
        assert_eq!(report.stage_trace, STAGE_NAMES.map(|s| s.to_string()));
        assert_eq!(report.narx_trace.len(), 3);
        assert_eq!(report.lstm_trace.len(), 3);
        assert!(report.test_metrics.unwrap().rmse.is_finite());
        // Every held-out row gets scored.
        assert_eq!(report.test_predictions.unwrap().len(), 24);
    }

    #[test]
    fn augmented_rows_are_one_wider_than_the_features() {
        let data = toy_dataset(60);
        let cfg = quick_config();
        let (model, _) = train_hybrid(&data, &cfg).unwrap();
        assert_eq!(model.lstm.input_size(), FEATURE_COUNT + 1);
        assert_eq!(
            model.feature_names,
            vec![
                "irradiance".to_string(),
                "temperature".to_string(),
                "wind_speed".to_string(),
                "relative_humidity".to_string(),
                "narx_power".to_string(),
            ]
        );

        let scaled = transform(&model.scaler, &data);
        let (u, y) = scaled_series(&scaled).unwrap();
        let (aug, targets, dropped) = augment_series(&u, &y, &model.narx).unwrap();
        assert_eq!(aug.cols(), FEATURE_COUNT + 1);
        assert_eq!(dropped, 2);
        assert_eq!(aug.rows(), 58);
        assert_eq!(targets, y[2..].to_vec());
        // The feature part of row i is u(lag + i), untouched.
        assert_eq!(&aug.row(0)[..FEATURE_COUNT], u.row(2));
        assert_eq!(&aug.row(57)[..FEATURE_COUNT], u.row(59));
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_dataset(100);
        let cfg = quick_config();
        let (model_a, report_a) = train_hybrid(&data, &cfg).unwrap();
        let (model_b, report_b) = train_hybrid(&data, &cfg).unwrap();
        assert_eq!(model_a, model_b);
        assert_eq!(report_a, report_b);
    }

    #[test]
    fn held_out_rows_never_reach_the_models() {
        let data = toy_dataset(100);
        let cfg = quick_config();
        let (model_a, _) = train_hybrid(&data, &cfg).unwrap();

        // Same training rows, arbitrarily different held-out rows.
        let split = 80;
        let mut records = data.records().to_vec();
        for (i, rec) in records.iter_mut().enumerate().skip(split) {
            rec.irradiance = 37.0 + i as f64;
            rec.temperature = -5.0;
            rec.wind_speed = 9.9;
            rec.relative_humidity = 11.0;
            rec.pv_power = Some(123.0 * (i - split + 1) as f64);
        }
        let altered = Dataset::new(records, 300).unwrap();
        let (model_b, _) = train_hybrid(&altered, &cfg).unwrap();
        assert_eq!(model_a, model_b);
    }

    #[test]
    fn zeroed_narx_reduces_to_an_lstm_over_base_features() {
        let data = toy_dataset(90);
        let cfg = quick_config();
        let zero_net = zeroed_narx(&cfg.narx);
        let (model, _) = train_hybrid_impl(&data, &cfg, Some(zero_net.clone())).unwrap();

        // Hand-built equivalent: scaled base features plus a constant zero
        // column, trained with the identical LSTM config.
        let (train, _) = split_chronological(&data, cfg.train_fraction).unwrap();
        let scaler = fit_scaler(&train).unwrap();
        let train_scaled = transform(&scaler, &train);
        let (u, y) = scaled_series(&train_scaled).unwrap();
        let lag = cfg.narx.d_u.max(cfg.narx.d_y);
        let mut plain = Matrix::zeros(0, FEATURE_COUNT + 1);
        let mut row = Vec::new();
        for t in lag..u.rows() {
            row.clear();
            row.extend_from_slice(u.row(t));
            row.push(0.0);
            plain.push_row(&row).unwrap();
        }
        let (reference, _) = train_lstm(&plain, &y[lag..], &cfg.lstm).unwrap();
        assert_eq!(model.lstm.params_flat(), reference.params_flat());
    }

    #[test]
    fn export_counts_dropped_rows_and_aligns_the_column() {
        let data = toy_dataset(50);
        let cfg = NarxConfig {
            d_u: 4,
            d_y: 2,
            ..NarxConfig::default()
        };
        let net = NarxNetwork::init(&cfg, FEATURE_COUNT).unwrap();
        let aug = export_augmented(&data, &net).unwrap();
        assert_eq!(aug.dropped, 4);
        assert_eq!(aug.records.len(), 46);
        assert_eq!(aug.narx_power.len(), 46);
        assert_eq!(aug.records[0], data.records()[4]);
        assert_eq!(aug.step_seconds, 300);
    }

    #[test]
    fn export_with_an_exact_oracle_reproduces_the_power_column() {
        // Constant power plus a bias-only network that outputs exactly
        // that constant: the estimate column must equal pv_power bit for
        // bit.
        let records: Vec<WeatherRecord> = (0..30)
            .map(|i| WeatherRecord {
                timestamp: i as i64 * 300,
                irradiance: ((i * 31) % 500) as f64,
                temperature: 20.0,
                wind_speed: 1.0,
                relative_humidity: 55.0,
                pv_power: Some(0.4),
            })
            .collect();
        let data = Dataset::new(records, 300).unwrap();
        let cfg = NarxConfig {
            d_u: 3,
            d_y: 2,
            ..NarxConfig::default()
        };
        let mut net = NarxNetwork::init(&cfg, FEATURE_COUNT).unwrap();
        for w in net.input_weights.data_mut() {
            *w = 0.0;
        }
        for w in &mut net.output_weights {
            *w = 0.0;
        }
        net.output_bias = 0.4;
        let aug = export_augmented(&data, &net).unwrap();
        for (rec, est) in aug.records.iter().zip(&aug.narx_power) {
            assert_eq!(*est, rec.pv_power.unwrap());
        }
    }

    #[test]
    fn zero_horizon_forecast_is_empty() {
        let data = toy_dataset(80);
        let (model, _) = train_hybrid(&data, &quick_config()).unwrap();
        let fc = predict_hybrid(&model, &data, &Matrix::zeros(0, FEATURE_COUNT)).unwrap();
        assert!(fc.watts.is_empty());
        assert_eq!(fc.narx_clamped_steps, 0);
        assert_eq!(fc.floored_steps, 0);
    }

    #[test]
    fn forecast_requires_enough_history() {
        let data = toy_dataset(80);
        let (model, _) = train_hybrid(&data, &quick_config()).unwrap();
        let short = Dataset::new(data.records()[..2].to_vec(), 300).unwrap();
        let err = predict_hybrid(&model, &short, &Matrix::zeros(0, FEATURE_COUNT));
        assert!(matches!(
            err,
            Err(Error::InsufficientData {
                required: 3,
                actual: 2
            })
        ));

        let bad_width = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(predict_hybrid(&model, &data, &bad_width).is_err());
    }

    // One trained model shared by the horizon-behaviour checks below;
    // training it once keeps the test binary fast.
    fn trained_on_synthetic() -> (HybridModel, Dataset, Dataset) {
        let spec = PlantSpec::default();
        let synth_cfg = SynthConfig {
            days: 31,
            step_seconds: 900,
            ..SynthConfig::default()
        };
        let full = generate(&spec, &synth_cfg).unwrap();
        let per_day = (86_400 / 900) as usize;
        let history =
            Dataset::new(full.records()[..30 * per_day].to_vec(), 900).unwrap();
        let future = Dataset::new(full.records()[30 * per_day..].to_vec(), 900).unwrap();

        let cfg = PipelineConfig {
            narx: NarxConfig {
                epochs: 25,
                hidden_units: 8,
                ..NarxConfig::default()
            },
            lstm: LstmConfig {
                hidden_size: 10,
                layers: 1,
                epochs: 20,
                sequence_length: 48,
                ..LstmConfig::default()
            },
            train_fraction: 0.8,
        };
        let (model, report) = train_hybrid(&history, &cfg).unwrap();
        assert!(report.test_metrics.unwrap().rmse.is_finite());
        (model, history, future)
    }

    #[test]
    fn full_day_forecast_is_finite_and_non_negative() {
        let (model, history, future) = trained_on_synthetic();

        // Day-ahead horizon: all 96 steps of the held-back day.
        let fc = predict_hybrid(&model, &history, &future.features_matrix()).unwrap();
        assert_eq!(fc.watts.len(), 96);
        for w in &fc.watts {
            assert!(w.is_finite() && *w >= 0.0);
        }

        // Night steps (zero irradiance) must forecast near zero; 5% of
        // the plant rating is the acceptance line.
        let night_rows: Vec<usize> = (0..future.len())
            .filter(|&i| future.records()[i].irradiance == 0.0)
            .collect();
        assert!(night_rows.len() >= 10, "synthetic day lost its night");
        for &i in &night_rows {
            assert!(
                fc.watts[i] <= 0.05 * 100_000.0,
                "night step {i} forecast {} W",
                fc.watts[i]
            );
        }
    }
}
