//! LSTM regressor built from first principles: explicit gate algebra,
//! full backpropagation through time, and SGD with momentum. No tensor
//! framework sits underneath; every array is a plain `Vec<f64>` or
//! [`Matrix`], which keeps the arithmetic auditable and bit-reproducible.
//!
//! The stack maps an input sequence to one prediction per timestep: each
//! cell layer feeds the next, and a scalar head reads the top layer's
//! hidden state at every step. The head is linear by default; a sigmoid
//! head is available when targets live in (0, 1). A softmax head is
//! deliberately not offered: softmax normalizes across a vector of scores,
//! and over a single regression scalar it would collapse to the constant
//! 1.0 regardless of input, so it cannot express a forecast at all.
//!
//! Gradient flow: the cell state carries a multiplicative path whose
//! factor is the forget gate, so gradients persist over many steps when
//! the forget gate sits near 1. [`gradient_norm_probe`] measures this
//! directly, and [`SigmoidRecurrence`] provides the contrast case where
//! the recurrent Jacobian shrinks every step.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngExt;

use crate::float;
use crate::matrix::Matrix;
use crate::rng;
use crate::{Error, Result};

/// Output nonlinearity applied to the head's affine read-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadActivation {
    #[default]
    Linear,
    /// For targets known to lie in (0, 1), e.g. min-max scaled power.
    Sigmoid,
}

impl HeadActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            HeadActivation::Linear => z,
            HeadActivation::Sigmoid => float::sigmoid(z),
        }
    }

    /// Derivative expressed through the activation value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            HeadActivation::Linear => 1.0,
            HeadActivation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmConfig {
    pub hidden_size: usize,
    /// Stacked cell layers; the first consumes the raw features.
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Momentum coefficient in [0, 1).
    pub momentum: f64,
    /// Sequences per parameter update.
    pub batch_size: usize,
    /// Training rows are cut into chunks of this length, each started from
    /// a zero state; backpropagation never crosses a chunk boundary.
    pub sequence_length: usize,
    pub head: HeadActivation,
    /// Initial forget-gate bias. Positive values start the cell remembering.
    pub forget_bias: f64,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden_size: 24,
            layers: 3,
            epochs: 30,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 4,
            sequence_length: 64,
            head: HeadActivation::Linear,
            forget_bias: 1.0,
            seed: 1,
        }
    }
}

impl LstmConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden_size",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.layers == 0 {
            return Err(Error::InvalidParameter {
                name: "layers",
                reason: "must be at least 1".to_string(),
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: "must be positive and finite".to_string(),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter {
                name: "momentum",
                reason: "must lie in [0, 1)".to_string(),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                reason: "must be at least 1".to_string(),
            });
        }
        if self.sequence_length == 0 {
            return Err(Error::InvalidParameter {
                name: "sequence_length",
                reason: "must be at least 1".to_string(),
            });
        }
        if !self.forget_bias.is_finite() {
            return Err(Error::InvalidParameter {
                name: "forget_bias",
                reason: "must be finite".to_string(),
            });
        }
        Ok(())
    }
}

/// One cell layer's parameters. Every gate weight matrix acts on the
/// concatenation [h_prev, x] and is hidden_size x (hidden_size + input_size).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub hidden_size: usize,
    pub input_size: usize,
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_g: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
}

impl LstmCellParams {
    fn init(hidden_size: usize, input_size: usize, forget_bias: f64, r: &mut impl RngExt) -> Self {
        let width = hidden_size + input_size;
        let bound = 1.0 / float::sqrt(width as f64);
        let mut mat = || {
            let mut m = Matrix::zeros(hidden_size, width);
            for v in m.data_mut() {
                *v = r.random_range(-bound..bound);
            }
            m
        };
        let (w_i, w_f, w_o, w_g) = (mat(), mat(), mat(), mat());
        LstmCellParams {
            hidden_size,
            input_size,
            w_i,
            w_f,
            w_o,
            w_g,
            b_i: vec![0.0; hidden_size],
            b_f: vec![forget_bias; hidden_size],
            b_o: vec![0.0; hidden_size],
            b_g: vec![0.0; hidden_size],
        }
    }
}

/// Every intermediate value of one cell step, kept for backpropagation and
/// for inspecting gate behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct CellActivations {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn gate_preact(w: &Matrix, b: &[f64], h_prev: &[f64], x: &[f64], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let row = w.row(j);
        let mut a = b[j];
        for (wv, hv) in row[..h_prev.len()].iter().zip(h_prev) {
            a += wv * hv;
        }
        for (wv, xv) in row[h_prev.len()..].iter().zip(x) {
            a += wv * xv;
        }
        *o = a;
    }
}

/// One LSTM cell update with all activations exposed.
pub fn cell_step_full(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<CellActivations> {
    if x.len() != params.input_size {
        return Err(Error::DimensionMismatch {
            expected: params.input_size,
            actual: x.len(),
        });
    }
    if h_prev.len() != params.hidden_size || c_prev.len() != params.hidden_size {
        return Err(Error::DimensionMismatch {
            expected: params.hidden_size,
            actual: if h_prev.len() != params.hidden_size {
                h_prev.len()
            } else {
                c_prev.len()
            },
        });
    }
    let n = params.hidden_size;
    let mut act = CellActivations {
        i: vec![0.0; n],
        f: vec![0.0; n],
        o: vec![0.0; n],
        g: vec![0.0; n],
        c: vec![0.0; n],
        h: vec![0.0; n],
    };
    gate_preact(&params.w_i, &params.b_i, h_prev, x, &mut act.i);
    gate_preact(&params.w_f, &params.b_f, h_prev, x, &mut act.f);
    gate_preact(&params.w_o, &params.b_o, h_prev, x, &mut act.o);
    gate_preact(&params.w_g, &params.b_g, h_prev, x, &mut act.g);
    for j in 0..n {
        act.i[j] = float::sigmoid(act.i[j]);
        act.f[j] = float::sigmoid(act.f[j]);
        act.o[j] = float::sigmoid(act.o[j]);
        act.g[j] = float::tanh(act.g[j]);
        act.c[j] = act.f[j] * c_prev[j] + act.i[j] * act.g[j];
        act.h[j] = act.o[j] * float::tanh(act.c[j]);
    }
    Ok(act)
}

/// One LSTM cell update; returns (h, c).
pub fn cell_step(
    params: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let act = cell_step_full(params, x, h_prev, c_prev)?;
    Ok((act.h, act.c))
}

/// The full stacked network.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmCellParams>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
    pub head: HeadActivation,
    pub seed: u64,
}

impl LstmStack {
    /// Seeded initial stack: gate weights uniform in ±1/sqrt(fan_in),
    /// forget biases at `cfg.forget_bias`, all other biases zero.
    pub fn init(cfg: &LstmConfig, input_size: usize) -> Result<Self> {
        cfg.validate()?;
        if input_size == 0 {
            return Err(Error::InvalidParameter {
                name: "input_size",
                reason: "must be at least 1".to_string(),
            });
        }
        let mut r = rng::stream(cfg.seed, 0);
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let in_size = if l == 0 { input_size } else { cfg.hidden_size };
            layers.push(LstmCellParams::init(
                cfg.hidden_size,
                in_size,
                cfg.forget_bias,
                &mut r,
            ));
        }
        let bound = 1.0 / float::sqrt(cfg.hidden_size as f64);
        let head_weights = (0..cfg.hidden_size)
            .map(|_| r.random_range(-bound..bound))
            .collect();
        Ok(LstmStack {
            layers,
            head_weights,
            head_bias: 0.0,
            head: cfg.head,
            seed: cfg.seed,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size
    }

    /// All parameters as one flat vector: per layer (w_i, w_f, w_o, w_g
    /// row-major, then b_i, b_f, b_o, b_g), then head weights, head bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for l in &self.layers {
            p.extend_from_slice(l.w_i.data());
            p.extend_from_slice(l.w_f.data());
            p.extend_from_slice(l.w_o.data());
            p.extend_from_slice(l.w_g.data());
            p.extend_from_slice(&l.b_i);
            p.extend_from_slice(&l.b_f);
            p.extend_from_slice(&l.b_o);
            p.extend_from_slice(&l.b_g);
        }
        p.extend_from_slice(&self.head_weights);
        p.push(self.head_bias);
        p
    }

    /// Inverse of [`Self::params_flat`]; the slice length must match.
    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<()> {
        let expected = self.params_flat().len();
        if p.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: p.len(),
            });
        }
        let mut k = 0;
        let take = |dst: &mut [f64], k: &mut usize| {
            dst.copy_from_slice(&p[*k..*k + dst.len()]);
            *k += dst.len();
        };
        for l in &mut self.layers {
            take(l.w_i.data_mut(), &mut k);
            take(l.w_f.data_mut(), &mut k);
            take(l.w_o.data_mut(), &mut k);
            take(l.w_g.data_mut(), &mut k);
            take(&mut l.b_i, &mut k);
            take(&mut l.b_f, &mut k);
            take(&mut l.b_o, &mut k);
            take(&mut l.b_g, &mut k);
        }
        take(&mut self.head_weights, &mut k);
        self.head_bias = p[k];
        Ok(())
    }
}

/// Per-layer running state (h, c) for streaming evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(stack: &LstmStack) -> Self {
        let n = stack.hidden_size();
        LstmState {
            h: vec![vec![0.0; n]; stack.layers.len()],
            c: vec![vec![0.0; n]; stack.layers.len()],
        }
    }
}

fn head_output(stack: &LstmStack, h_top: &[f64]) -> f64 {
    let mut z = stack.head_bias;
    for (w, h) in stack.head_weights.iter().zip(h_top) {
        z += w * h;
    }
    stack.head.apply(z)
}

/// Advances the state by one input row and returns the head's prediction.
pub fn step_state(stack: &LstmStack, state: &mut LstmState, x: &[f64]) -> Result<f64> {
    let mut input = x.to_vec();
    for (l, params) in stack.layers.iter().enumerate() {
        let (h, c) = cell_step(params, &input, &state.h[l], &state.c[l])?;
        input = h.clone();
        state.h[l] = h;
        state.c[l] = c;
    }
    Ok(head_output(stack, &input))
}

/// Runs the stack over a sequence (one row per timestep) from a zero
/// state, producing one prediction per timestep. Memory use is constant in
/// sequence length.
pub fn forward_sequence(stack: &LstmStack, xs: &Matrix) -> Result<Vec<f64>> {
    if xs.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if xs.cols() != stack.input_size() {
        return Err(Error::DimensionMismatch {
            expected: stack.input_size(),
            actual: xs.cols(),
        });
    }
    let mut state = LstmState::zeros(stack);
    let mut out = Vec::with_capacity(xs.rows());
    for t in 0..xs.rows() {
        out.push(step_state(stack, &mut state, xs.row(t))?);
    }
    Ok(out)
}

/// Gradients shaped like the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGradients {
    pub layers: Vec<LstmCellParams>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl LstmGradients {
    fn zeros_like(stack: &LstmStack) -> Self {
        let layers = stack
            .layers
            .iter()
            .map(|l| {
                let width = l.hidden_size + l.input_size;
                LstmCellParams {
                    hidden_size: l.hidden_size,
                    input_size: l.input_size,
                    w_i: Matrix::zeros(l.hidden_size, width),
                    w_f: Matrix::zeros(l.hidden_size, width),
                    w_o: Matrix::zeros(l.hidden_size, width),
                    w_g: Matrix::zeros(l.hidden_size, width),
                    b_i: vec![0.0; l.hidden_size],
                    b_f: vec![0.0; l.hidden_size],
                    b_o: vec![0.0; l.hidden_size],
                    b_g: vec![0.0; l.hidden_size],
                }
            })
            .collect();
        LstmGradients {
            layers,
            head_weights: vec![0.0; stack.head_weights.len()],
            head_bias: 0.0,
        }
    }

    /// Same ordering as [`LstmStack::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for l in &self.layers {
            p.extend_from_slice(l.w_i.data());
            p.extend_from_slice(l.w_f.data());
            p.extend_from_slice(l.w_o.data());
            p.extend_from_slice(l.w_g.data());
            p.extend_from_slice(&l.b_i);
            p.extend_from_slice(&l.b_f);
            p.extend_from_slice(&l.b_o);
            p.extend_from_slice(&l.b_g);
        }
        p.extend_from_slice(&self.head_weights);
        p.push(self.head_bias);
        p
    }

    fn add_scaled(&mut self, other: &LstmGradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w_i.data_mut().iter_mut().zip(b.w_i.data()) {
                *x += scale * y;
            }
            for (x, y) in a.w_f.data_mut().iter_mut().zip(b.w_f.data()) {
                *x += scale * y;
            }
            for (x, y) in a.w_o.data_mut().iter_mut().zip(b.w_o.data()) {
                *x += scale * y;
            }
            for (x, y) in a.w_g.data_mut().iter_mut().zip(b.w_g.data()) {
                *x += scale * y;
            }
            for (x, y) in a.b_i.iter_mut().zip(&b.b_i) {
                *x += scale * y;
            }
            for (x, y) in a.b_f.iter_mut().zip(&b.b_f) {
                *x += scale * y;
            }
            for (x, y) in a.b_o.iter_mut().zip(&b.b_o) {
                *x += scale * y;
            }
            for (x, y) in a.b_g.iter_mut().zip(&b.b_g) {
                *x += scale * y;
            }
        }
        for (x, y) in self.head_weights.iter_mut().zip(&other.head_weights) {
            *x += scale * y;
        }
        self.head_bias += scale * other.head_bias;
    }
}

struct ForwardTrace {
    /// acts[t][l]
    acts: Vec<Vec<CellActivations>>,
    /// inputs[t][l]: what layer l consumed at step t.
    inputs: Vec<Vec<Vec<f64>>>,
    predictions: Vec<f64>,
}

fn forward_stored(stack: &LstmStack, xs: &Matrix) -> Result<ForwardTrace> {
    if xs.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if xs.cols() != stack.input_size() {
        return Err(Error::DimensionMismatch {
            expected: stack.input_size(),
            actual: xs.cols(),
        });
    }
    let mut state = LstmState::zeros(stack);
    let mut trace = ForwardTrace {
        acts: Vec::with_capacity(xs.rows()),
        inputs: Vec::with_capacity(xs.rows()),
        predictions: Vec::with_capacity(xs.rows()),
    };
    for t in 0..xs.rows() {
        let mut input = xs.row(t).to_vec();
        let mut layer_acts = Vec::with_capacity(stack.layers.len());
        let mut layer_inputs = Vec::with_capacity(stack.layers.len());
        for (l, params) in stack.layers.iter().enumerate() {
            let act = cell_step_full(params, &input, &state.h[l], &state.c[l])?;
            state.h[l] = act.h.clone();
            state.c[l] = act.c.clone();
            layer_inputs.push(input);
            input = act.h.clone();
            layer_acts.push(act);
        }
        trace.predictions.push(head_output(stack, &input));
        trace.acts.push(layer_acts);
        trace.inputs.push(layer_inputs);
    }
    Ok(trace)
}

/// Shared backward pass. `dy[t]` is dLoss/dprediction at step t. Returns
/// the parameter gradients and, when `h_norms` is requested, the L2 norm
/// of dLoss/dh_t for the top layer at every timestep, measured before the
/// head and recurrent contributions are consumed by the cell backward.
fn backward(
    stack: &LstmStack,
    trace: &ForwardTrace,
    dy: &[f64],
    mut h_norms: Option<&mut Vec<f64>>,
) -> LstmGradients {
    let steps = trace.predictions.len();
    let n_layers = stack.layers.len();
    let hidden = stack.hidden_size();
    let mut grads = LstmGradients::zeros_like(stack);
    // Recurrent carries per layer.
    let mut dh_next = vec![vec![0.0; hidden]; n_layers];
    let mut dc_next = vec![vec![0.0; hidden]; n_layers];
    if let Some(norms) = h_norms.as_deref_mut() {
        norms.clear();
        norms.resize(steps, 0.0);
    }

    for t in (0..steps).rev() {
        // dLoss/dx for the layer below, seeded at the top by the head.
        let mut dx_from_above: Vec<f64> = {
            let dz = dy[t] * stack.head.derivative_from_output(trace.predictions[t]);
            let h_top = &trace.acts[t][n_layers - 1].h;
            grads.head_bias += dz;
            for (gw, h) in grads.head_weights.iter_mut().zip(h_top) {
                *gw += dz * h;
            }
            stack.head_weights.iter().map(|w| dz * w).collect()
        };

        for l in (0..n_layers).rev() {
            let params = &stack.layers[l];
            let act = &trace.acts[t][l];
            let x = &trace.inputs[t][l];
            let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
                (&[], &[])
            } else {
                (&trace.acts[t - 1][l].h, &trace.acts[t - 1][l].c)
            };

            let mut dh = dx_from_above;
            for (a, b) in dh.iter_mut().zip(&dh_next[l]) {
                *a += b;
            }
            if l == n_layers - 1 {
                if let Some(norms) = h_norms.as_deref_mut() {
                    let mut s = 0.0;
                    for v in &dh {
                        s += v * v;
                    }
                    norms[t] = float::sqrt(s);
                }
            }

            let g = &mut grads.layers[l];
            let mut dh_prev = vec![0.0; hidden];
            let mut dx = vec![0.0; params.input_size];
            let mut dc_prev = vec![0.0; hidden];
            for j in 0..hidden {
                let tc = float::tanh(act.c[j]);
                let dc = dh[j] * act.o[j] * (1.0 - tc * tc) + dc_next[l][j];
                let cp = if t == 0 { 0.0 } else { c_prev[j] };
                let di_pre = dc * act.g[j] * act.i[j] * (1.0 - act.i[j]);
                let df_pre = dc * cp * act.f[j] * (1.0 - act.f[j]);
                let do_pre = dh[j] * tc * act.o[j] * (1.0 - act.o[j]);
                let dg_pre = dc * act.i[j] * (1.0 - act.g[j] * act.g[j]);
                dc_prev[j] = dc * act.f[j];

                g.b_i[j] += di_pre;
                g.b_f[j] += df_pre;
                g.b_o[j] += do_pre;
                g.b_g[j] += dg_pre;

                let wi = params.w_i.row(j);
                let wf = params.w_f.row(j);
                let wo = params.w_o.row(j);
                let wg = params.w_g.row(j);
                let gwi = g.w_i.row_mut(j);
                for (k, gv) in gwi.iter_mut().enumerate() {
                    let z = if k < hidden {
                        if t == 0 {
                            0.0
                        } else {
                            h_prev[k]
                        }
                    } else {
                        x[k - hidden]
                    };
                    *gv += di_pre * z;
                }
                let gwf = g.w_f.row_mut(j);
                for (k, gv) in gwf.iter_mut().enumerate() {
                    let z = if k < hidden {
                        if t == 0 {
                            0.0
                        } else {
                            h_prev[k]
                        }
                    } else {
                        x[k - hidden]
                    };
                    *gv += df_pre * z;
                }
                let gwo = g.w_o.row_mut(j);
                for (k, gv) in gwo.iter_mut().enumerate() {
                    let z = if k < hidden {
                        if t == 0 {
                            0.0
                        } else {
                            h_prev[k]
                        }
                    } else {
                        x[k - hidden]
                    };
                    *gv += do_pre * z;
                }
                let gwg = g.w_g.row_mut(j);
                for (k, gv) in gwg.iter_mut().enumerate() {
                    let z = if k < hidden {
                        if t == 0 {
                            0.0
                        } else {
                            h_prev[k]
                        }
                    } else {
                        x[k - hidden]
                    };
                    *gv += dg_pre * z;
                }

                // Backpropagate through the four gate pre-activations to
                // the concatenated input.
                for k in 0..hidden {
                    dh_prev[k] += di_pre * wi[k] + df_pre * wf[k] + do_pre * wo[k] + dg_pre * wg[k];
                }
                for k in 0..params.input_size {
                    let kk = hidden + k;
                    dx[k] +=
                        di_pre * wi[kk] + df_pre * wf[kk] + do_pre * wo[kk] + dg_pre * wg[kk];
                }
            }
            dh_next[l] = dh_prev;
            dc_next[l] = dc_prev;
            dx_from_above = dx;
        }
    }
    grads
}

/// Full backpropagation through time over one sequence. The loss is the
/// mean squared error across all timesteps. Returns (gradients, loss).
pub fn bptt(stack: &LstmStack, xs: &Matrix, targets: &[f64]) -> Result<(LstmGradients, f64)> {
    if xs.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.rows(),
            actual: targets.len(),
        });
    }
    let trace = forward_stored(stack, xs)?;
    let steps = trace.predictions.len() as f64;
    let mut loss = 0.0;
    let dy: Vec<f64> = trace
        .predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| {
            let e = p - y;
            loss += e * e;
            2.0 * e / steps
        })
        .collect();
    loss /= steps;
    let grads = backward(stack, &trace, &dy, None);
    Ok((grads, loss))
}

/// L2 norm of dLoss/dh_t at the top layer for every timestep, where the
/// loss is the squared error of the final prediction alone. Per-step loss
/// terms would inject fresh gradient at every timestep and mask how the
/// recurrent path attenuates signal, so the probe deliberately scores only
/// the last step and watches that single error flow backwards.
pub fn gradient_norm_probe(stack: &LstmStack, xs: &Matrix, targets: &[f64]) -> Result<Vec<f64>> {
    if xs.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.rows(),
            actual: targets.len(),
        });
    }
    let trace = forward_stored(stack, xs)?;
    let steps = trace.predictions.len();
    let mut dy = vec![0.0; steps];
    dy[steps - 1] = 2.0 * (trace.predictions[steps - 1] - targets[steps - 1]);
    let mut norms = Vec::new();
    backward(stack, &trace, &dy, Some(&mut norms));
    Ok(norms)
}

/// Trains on rows of `features` against `targets` by cutting the rows into
/// chunks of `cfg.sequence_length` (each starting from a zero state),
/// shuffling the chunks every epoch, and applying SGD with momentum over
/// mini-batches of chunks. Gradients are averaged across the chunks of a
/// batch; each chunk's own loss already averages over its steps. The trace
/// holds the step-weighted MSE over all rows after each epoch's updates.
/// Zero epochs returns the seeded initial stack untouched.
pub fn train_lstm(
    features: &Matrix,
    targets: &[f64],
    cfg: &LstmConfig,
) -> Result<(LstmStack, Vec<f64>)> {
    if features.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if features.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            actual: targets.len(),
        });
    }
    let mut stack = LstmStack::init(cfg, features.cols())?;

    // Chunk boundaries: [start, end) row ranges.
    let n = features.rows();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + cfg.sequence_length).min(n);
        chunks.push((start, end));
        start = end;
    }

    let slice_of = |range: (usize, usize)| -> (Matrix, &[f64]) {
        let mut m = Matrix::zeros(0, 0);
        for r in range.0..range.1 {
            m.push_row(features.row(r)).expect("row width is uniform");
        }
        (m, &targets[range.0..range.1])
    };

    let mut shuffle_rng = rng::stream(cfg.seed, 1);
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    let mut velocity = vec![0.0; stack.params_flat().len()];
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size) {
            let mut total = LstmGradients::zeros_like(&stack);
            let scale = 1.0 / batch.len() as f64;
            for &ci in batch {
                let (xs, ys) = slice_of(chunks[ci]);
                let (g, _) = bptt(&stack, &xs, ys)?;
                total.add_scaled(&g, scale);
            }
            let flat = total.flat();
            let mut params = stack.params_flat();
            for ((v, g), p) in velocity.iter_mut().zip(&flat).zip(params.iter_mut()) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *p += *v;
            }
            stack.set_params_flat(&params)?;
        }

        let mut sq = 0.0;
        for &(s, e) in &chunks {
            let (xs, _) = slice_of((s, e));
            let preds = forward_sequence(&stack, &xs)?;
            for (p, y) in preds.iter().zip(&targets[s..e]) {
                let err = p - y;
                sq += err * err;
            }
        }
        let loss = sq / n as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(loss);
    }
    Ok((stack, trace))
}

/// Plain sigmoid recurrence used as the vanishing-gradient contrast case:
/// h_t = sigmoid(W h_{t-1} + U x_t + b) with a linear head. Its recurrent
/// Jacobian is W^T scaled by sigmoid slopes (at most 1/4), so with the
/// spectral radius of W held below 1 the backward signal must shrink
/// geometrically.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidRecurrence {
    pub w_rec: Matrix,
    pub w_in: Matrix,
    pub bias: Vec<f64>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

/// Power-iteration estimate of the dominant eigenvalue magnitude.
fn spectral_radius_estimate(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; n];
        for (j, nx) in next.iter_mut().enumerate() {
            for (w, x) in m.row(j).iter().zip(&v) {
                *nx += w * x;
            }
        }
        let mut norm = 0.0;
        for x in &next {
            norm += x * x;
        }
        norm = float::sqrt(norm);
        if norm < 1e-300 {
            return 0.0;
        }
        for x in next.iter_mut() {
            *x /= norm;
        }
        lambda = norm;
        v = next;
    }
    lambda
}

impl SigmoidRecurrence {
    /// Seeded network whose recurrent matrix is rescaled so its estimated
    /// spectral radius equals `spectral_radius`.
    pub fn init(
        hidden_size: usize,
        input_size: usize,
        spectral_radius: f64,
        seed: u64,
    ) -> Result<Self> {
        if hidden_size == 0 || input_size == 0 {
            return Err(Error::InvalidParameter {
                name: "hidden_size",
                reason: "sizes must be at least 1".to_string(),
            });
        }
        if !(spectral_radius > 0.0 && spectral_radius.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "spectral_radius",
                reason: "must be positive and finite".to_string(),
            });
        }
        let mut r = rng::stream(seed, 0);
        let mut w_rec = Matrix::zeros(hidden_size, hidden_size);
        for v in w_rec.data_mut() {
            *v = r.random_range(-1.0..1.0);
        }
        let rho = spectral_radius_estimate(&w_rec);
        if rho > 0.0 {
            let scale = spectral_radius / rho;
            for v in w_rec.data_mut() {
                *v *= scale;
            }
        }
        let bound = 1.0 / float::sqrt(input_size as f64);
        let mut w_in = Matrix::zeros(hidden_size, input_size);
        for v in w_in.data_mut() {
            *v = r.random_range(-bound..bound);
        }
        let hb = 1.0 / float::sqrt(hidden_size as f64);
        let head_weights = (0..hidden_size).map(|_| r.random_range(-hb..hb)).collect();
        Ok(SigmoidRecurrence {
            w_rec,
            w_in,
            bias: vec![0.0; hidden_size],
            head_weights,
            head_bias: 0.0,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.w_rec.rows()
    }
}

/// Same probe as [`gradient_norm_probe`], for the sigmoid recurrence:
/// norms of dLoss/dh_t with the loss on the final prediction only.
pub fn sigmoid_recurrence_gradient_norms(
    net: &SigmoidRecurrence,
    xs: &Matrix,
    targets: &[f64],
) -> Result<Vec<f64>> {
    if xs.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if xs.cols() != net.w_in.cols() {
        return Err(Error::DimensionMismatch {
            expected: net.w_in.cols(),
            actual: xs.cols(),
        });
    }
    if xs.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.rows(),
            actual: targets.len(),
        });
    }
    let n = net.hidden_size();
    let steps = xs.rows();
    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut h = vec![0.0; n];
    for t in 0..steps {
        let mut next = vec![0.0; n];
        for (j, nx) in next.iter_mut().enumerate() {
            let mut a = net.bias[j];
            for (w, hv) in net.w_rec.row(j).iter().zip(&h) {
                a += w * hv;
            }
            for (w, xv) in net.w_in.row(j).iter().zip(xs.row(t)) {
                a += w * xv;
            }
            *nx = float::sigmoid(a);
        }
        hs.push(next.clone());
        h = next;
    }
    let mut pred = net.head_bias;
    for (w, hv) in net.head_weights.iter().zip(&hs[steps - 1]) {
        pred += w * hv;
    }
    let dfinal = 2.0 * (pred - targets[steps - 1]);

    let mut norms = vec![0.0; steps];
    let mut dh: Vec<f64> = net.head_weights.iter().map(|w| dfinal * w).collect();
    for t in (0..steps).rev() {
        let mut s = 0.0;
        for v in &dh {
            s += v * v;
        }
        norms[t] = float::sqrt(s);
        if t == 0 {
            break;
        }
        // dpre = dh ⊙ h(1-h); dh_{t-1} = W_rec^T dpre.
        let mut dprev = vec![0.0; n];
        for j in 0..n {
            let hv = hs[t][j];
            let dpre = dh[j] * hv * (1.0 - hv);
            for (k, dp) in dprev.iter_mut().enumerate() {
                *dp += net.w_rec.get(j, k) * dpre;
            }
        }
        dh = dprev;
    }
    Ok(norms)
}
