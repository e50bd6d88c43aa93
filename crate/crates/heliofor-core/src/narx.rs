//! NARX network: a two-layer feedforward net (sigmoid hidden layer, linear
//! output) over the tapped-delay regressor built by [`crate::data`].
//!
//! Training runs in series-parallel mode: the regressor's power lags are
//! true recorded values (teacher forcing), so each window is an ordinary
//! supervised sample and plain mini-batch gradient descent applies.
//! Forecasting runs in parallel mode: the power lags are the network's own
//! previous predictions, fed back step by step over the horizon. With
//! d_y = 0 there is no feedback path and both modes coincide exactly.
//!
//! Closed-loop recursion can run away; predictions outside [-10, 10] in
//! scaled space are clamped (and counted) before they re-enter the
//! regressor.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngExt;

use crate::data::{Dataset, SupervisedWindows};
use crate::float;
use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Scaled-space bound on closed-loop feedback values.
pub const PARALLEL_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarxConfig {
    /// Input memory order, ≥ 1.
    pub d_u: usize,
    /// Output memory order; 0 removes the feedback path entirely.
    pub d_y: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NarxConfig {
    fn default() -> Self {
        NarxConfig {
            d_u: 4,
            d_y: 2,
            hidden_units: 12,
            learning_rate: 0.25,
            epochs: 60,
            batch_size: 32,
            seed: 1,
        }
    }
}

impl NarxConfig {
    fn validate(&self) -> Result<()> {
        if self.d_u == 0 {
            return Err(Error::InvalidParameter {
                name: "d_u",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.hidden_units == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden_units",
                reason: "must be at least 1".to_string(),
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: "must be positive and finite".to_string(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Two-layer network over a regressor of `d_u` feature blocks and `d_y`
/// power lags. Hidden activation is sigmoid, output is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxNetwork {
    pub config: NarxConfig,
    /// Exogenous features per step the net was built for.
    pub n_features: usize,
    /// hidden_units x regressor_len.
    pub input_weights: Matrix,
    pub input_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl NarxNetwork {
    /// Seeded initial network: weights uniform in ±1/sqrt(fan_in), biases
    /// zero.
    pub fn init(cfg: &NarxConfig, n_features: usize) -> Result<Self> {
        cfg.validate()?;
        if n_features == 0 {
            return Err(Error::InvalidParameter {
                name: "n_features",
                reason: "must be at least 1".to_string(),
            });
        }
        let width = cfg.d_u * n_features + cfg.d_y;
        let mut r = rng::stream(cfg.seed, 0);
        let in_bound = 1.0 / float::sqrt(width as f64);
        let mut input_weights = Matrix::zeros(cfg.hidden_units, width);
        for v in input_weights.data_mut() {
            *v = r.random_range(-in_bound..in_bound);
        }
        let out_bound = 1.0 / float::sqrt(cfg.hidden_units as f64);
        let output_weights = (0..cfg.hidden_units)
            .map(|_| r.random_range(-out_bound..out_bound))
            .collect();
        Ok(NarxNetwork {
            config: *cfg,
            n_features,
            input_weights,
            input_bias: vec![0.0; cfg.hidden_units],
            output_weights,
            output_bias: 0.0,
        })
    }

    pub fn regressor_len(&self) -> usize {
        self.config.d_u * self.n_features + self.config.d_y
    }

    fn forward_with_hidden(&self, regressor: &[f64], hidden: &mut [f64]) -> f64 {
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut a = self.input_bias[j];
            for (w, x) in self.input_weights.row(j).iter().zip(regressor) {
                a += w * x;
            }
            *h = float::sigmoid(a);
        }
        let mut y = self.output_bias;
        for (w, h) in self.output_weights.iter().zip(hidden.iter()) {
            y += w * h;
        }
        y
    }
}

/// One-step prediction from an explicit regressor.
pub fn narx_forward(net: &NarxNetwork, regressor: &[f64]) -> Result<f64> {
    if regressor.len() != net.regressor_len() {
        return Err(Error::DimensionMismatch {
            expected: net.regressor_len(),
            actual: regressor.len(),
        });
    }
    let mut hidden = vec![0.0; net.config.hidden_units];
    Ok(net.forward_with_hidden(regressor, &mut hidden))
}

/// Open-loop predictions for every window row, in row order.
pub fn sp_predictions(net: &NarxNetwork, windows: &SupervisedWindows) -> Result<Vec<f64>> {
    if windows.width() != net.regressor_len() {
        return Err(Error::DimensionMismatch {
            expected: net.regressor_len(),
            actual: windows.width(),
        });
    }
    let mut hidden = vec![0.0; net.config.hidden_units];
    Ok(windows
        .inputs()
        .iter_rows()
        .map(|row| net.forward_with_hidden(row, &mut hidden))
        .collect())
}

/// Gradients of mean squared error over a batch, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxGradients {
    pub input_weights: Matrix,
    pub input_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

/// Analytic gradients of (1/B) Σ (ŷ - y)² over the window rows selected by
/// `batch`.
pub fn narx_gradients(
    net: &NarxNetwork,
    windows: &SupervisedWindows,
    batch: &[usize],
) -> Result<NarxGradients> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    if windows.width() != net.regressor_len() {
        return Err(Error::DimensionMismatch {
            expected: net.regressor_len(),
            actual: windows.width(),
        });
    }
    let h_units = net.config.hidden_units;
    let mut grads = NarxGradients {
        input_weights: Matrix::zeros(h_units, net.regressor_len()),
        input_bias: vec![0.0; h_units],
        output_weights: vec![0.0; h_units],
        output_bias: 0.0,
    };
    let mut hidden = vec![0.0; h_units];
    let inv_b = 1.0 / batch.len() as f64;
    for &row_idx in batch {
        let row = windows.inputs().row(row_idx);
        let target = windows.targets()[row_idx];
        let pred = net.forward_with_hidden(row, &mut hidden);
        let delta = 2.0 * (pred - target) * inv_b;
        grads.output_bias += delta;
        for j in 0..h_units {
            let h = hidden[j];
            grads.output_weights[j] += delta * h;
            let da = delta * net.output_weights[j] * h * (1.0 - h);
            grads.input_bias[j] += da;
            let grow = grads.input_weights.row_mut(j);
            for (g, x) in grow.iter_mut().zip(row) {
                *g += da * x;
            }
        }
    }
    Ok(grads)
}

fn mse_over_windows(net: &NarxNetwork, windows: &SupervisedWindows) -> f64 {
    let mut hidden = vec![0.0; net.config.hidden_units];
    let mut total = 0.0;
    for (row, target) in windows.inputs().iter_rows().zip(windows.targets()) {
        let e = net.forward_with_hidden(row, &mut hidden) - target;
        total += e * e;
    }
    total / windows.len() as f64
}

/// Trains by mini-batch gradient descent in series-parallel (teacher
/// forced) mode. Returns the network and the per-epoch loss trace, where
/// each entry is the full-data MSE after that epoch's updates. Zero epochs
/// returns the seeded initial network untouched.
pub fn train_series_parallel(
    windows: &SupervisedWindows,
    cfg: &NarxConfig,
) -> Result<(NarxNetwork, Vec<f64>)> {
    if windows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if windows.d_u() != cfg.d_u || windows.d_y() != cfg.d_y {
        return Err(Error::InvalidParameter {
            name: "windows",
            reason: "window lag structure does not match the config".to_string(),
        });
    }
    let mut net = NarxNetwork::init(cfg, windows.n_features())?;
    let mut shuffle_rng = rng::stream(cfg.seed, 1);
    let mut indices: Vec<usize> = (0..windows.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        for i in (1..indices.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            indices.swap(i, j);
        }
        for batch in indices.chunks(cfg.batch_size) {
            let g = narx_gradients(&net, windows, batch)?;
            let lr = cfg.learning_rate;
            for (w, gw) in net
                .input_weights
                .data_mut()
                .iter_mut()
                .zip(g.input_weights.data())
            {
                *w -= lr * gw;
            }
            for (b, gb) in net.input_bias.iter_mut().zip(&g.input_bias) {
                *b -= lr * gb;
            }
            for (w, gw) in net.output_weights.iter_mut().zip(&g.output_weights) {
                *w -= lr * gw;
            }
            net.output_bias -= lr * g.output_bias;
        }
        let loss = mse_over_windows(&net, windows);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(loss);
    }
    Ok((net, trace))
}

/// Closed-loop forecast over a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelForecast {
    /// One prediction per future step, in the space the net was trained in.
    pub predictions: Vec<f64>,
    /// Steps whose prediction hit the feedback clamp.
    pub clamped_steps: usize,
}

/// Parallel-mode forecasting over explicit series. `history_u`/`history_y`
/// seed the lags (at least max(d_u, d_y) steps); `future_u` supplies the
/// exogenous features for the whole horizon, one row per step, and its row
/// count sets the horizon. The power lags are the net's own (clamped)
/// previous predictions.
pub fn forecast_parallel_series(
    net: &NarxNetwork,
    history_u: &Matrix,
    history_y: &[f64],
    future_u: &Matrix,
) -> Result<ParallelForecast> {
    if history_u.rows() != history_y.len() {
        return Err(Error::DimensionMismatch {
            expected: history_u.rows(),
            actual: history_y.len(),
        });
    }
    if history_u.cols() != net.n_features || (future_u.rows() > 0 && future_u.cols() != net.n_features)
    {
        return Err(Error::DimensionMismatch {
            expected: net.n_features,
            actual: if history_u.cols() != net.n_features {
                history_u.cols()
            } else {
                future_u.cols()
            },
        });
    }
    let d_u = net.config.d_u;
    let d_y = net.config.d_y;
    let seed_len = d_u.max(d_y);
    if history_y.len() < seed_len {
        return Err(Error::InsufficientData {
            required: seed_len,
            actual: history_y.len(),
        });
    }

    let n = history_y.len();
    let horizon = future_u.rows();
    // u(t) for t >= n - d_u, extended with the future rows as steps are
    // consumed. The final future row is never read: the regressor for the
    // last prediction anchors one step earlier.
    let mut u_tail: Vec<Vec<f64>> = (n - d_u..n).map(|t| history_u.row(t).to_vec()).collect();
    let mut y_tail: Vec<f64> = history_y[n - d_y.max(1)..].to_vec();

    let mut hidden = vec![0.0; net.config.hidden_units];
    let mut regressor = vec![0.0; net.regressor_len()];
    let mut predictions = Vec::with_capacity(horizon);
    let mut clamped_steps = 0;

    for h in 0..horizon {
        regressor.clear();
        for k in 0..d_u {
            let row = &u_tail[u_tail.len() - 1 - k];
            regressor.extend_from_slice(row);
        }
        for k in 0..d_y {
            regressor.push(y_tail[y_tail.len() - 1 - k]);
        }
        let mut pred = net.forward_with_hidden(&regressor, &mut hidden);
        if !(-PARALLEL_CLAMP..=PARALLEL_CLAMP).contains(&pred) {
            pred = pred.clamp(-PARALLEL_CLAMP, PARALLEL_CLAMP);
            clamped_steps += 1;
        }
        predictions.push(pred);

        // Slide the tails forward for the next anchor.
        if h + 1 < horizon {
            u_tail.push(future_u.row(h).to_vec());
            if u_tail.len() > d_u {
                u_tail.remove(0);
            }
        }
        y_tail.push(pred);
        if y_tail.len() > d_y.max(1) {
            y_tail.remove(0);
        }
    }
    Ok(ParallelForecast {
        predictions,
        clamped_steps,
    })
}

/// Parallel-mode forecasting seeded from a dataset (which must carry the
/// power column), in whatever space the dataset is in.
pub fn forecast_parallel(
    net: &NarxNetwork,
    history: &Dataset,
    future_u: &Matrix,
) -> Result<ParallelForecast> {
    let y = history.powers().ok_or_else(|| Error::InvalidData {
        row: 0,
        reason: "history lacks the pv_power column".to_string(),
    })?;
    forecast_parallel_series(net, &history.features_matrix(), &y, future_u)
}
