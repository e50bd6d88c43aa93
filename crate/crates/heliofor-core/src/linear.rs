//! Classical series models and linear feature attribution.
//!
//! AR fits are ordinary least squares on mean-centered lags. ARMA fits
//! minimize the conditional sum of squares (pre-sample residuals pinned to
//! zero, residuals accumulated from t = p) with a Nelder-Mead simplex
//! started from the AR solution; the mean is fixed at the sample mean.
//! Integrated models are the textbook composition: difference d times, fit
//! ARMA on the differenced series, integrate forecasts back through the
//! history's tail values.
//!
//! The elastic net minimizes the usual penalized least squares
//!
//! ```text
//! (1/2n) * sum((y - Xw - b)^2) + lambda * (r*|w|_1 + (1-r)/2*|w|_2^2)
//! ```
//!
//! by cyclic coordinate descent on internally standardized columns
//! (population variance). Coefficients are reported on the standardized
//! scale: that is the only scale on which magnitude comparison across
//! features means anything, and ranking is this model's job here.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Fitted ARMA(p, q) parameters around a constant mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaModel {
    pub p: usize,
    pub q: usize,
    /// Autoregressive coefficients, lag 1 first. Length p.
    pub phi: Vec<f64>,
    /// Moving-average coefficients, lag 1 first. Length q.
    pub theta: Vec<f64>,
    /// Series mean the model is centered on.
    pub mu: f64,
    /// Residual variance over the conditioning window.
    pub sigma2: f64,
}

/// ARMA model fitted on a d-times differenced series. With d = 0 it
/// behaves exactly like its inner model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub inner: ArmaModel,
    pub d: usize,
}

/// Elastic-net fit. Coefficients are on the standardized (zero-mean,
/// unit-variance) feature scale; the intercept is the target mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub l1_ratio: f64,
}

/// Features ordered by share of total coefficient magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    /// (name, importance), strongest first. Importances are |coefficient|
    /// normalized to sum to 1. Ties keep input order.
    pub entries: Vec<(String, f64)>,
    /// True when every coefficient is zero; importances are then uniform
    /// and the ordering carries no information.
    pub no_signal: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Solves A x = b by Gaussian elimination with partial pivoting. Free
/// variables (columns without a usable pivot) are set to zero, so an
/// all-zero consistent system yields the zero solution; an unusable pivot
/// against a non-zero right-hand side is rank deficiency.
fn solve_linear(a: &mut Matrix, b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a
        .data()
        .iter()
        .fold(0.0f64, |m, v| m.max(float::abs(*v)))
        .max(1e-300);
    let tol = 1e-12 * scale;
    let b_scale = b.iter().fold(0.0f64, |m, v| m.max(float::abs(*v))).max(1.0);

    let mut pivot_row_of = vec![None; n];
    let mut next_row = 0;
    for col in 0..n {
        let mut best = next_row;
        for r in next_row..n {
            if float::abs(a.get(r, col)) > float::abs(a.get(best, col)) {
                best = r;
            }
        }
        if float::abs(a.get(best, col)) <= tol {
            continue;
        }
        if best != next_row {
            for c in 0..n {
                let tmp = a.get(best, c);
                a.set(best, c, a.get(next_row, c));
                a.set(next_row, c, tmp);
            }
            b.swap(best, next_row);
        }
        pivot_row_of[col] = Some(next_row);
        for r in next_row + 1..n {
            let f = a.get(r, col) / a.get(next_row, col);
            if f != 0.0 {
                for c in col..n {
                    a.set(r, c, a.get(r, c) - f * a.get(next_row, c));
                }
                b[r] -= f * b[next_row];
            }
        }
        next_row += 1;
        if next_row == n {
            break;
        }
    }
    for r in next_row..n {
        if float::abs(b[r]) > 1e-9 * b_scale {
            return Err(Error::RankDeficient);
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        if let Some(r) = pivot_row_of[col] {
            let mut s = b[r];
            for c in col + 1..n {
                s -= a.get(r, c) * x[c];
            }
            x[col] = s / a.get(r, col);
        }
    }
    Ok(x)
}

/// Fits AR(p), p ≥ 1, by least squares on the mean-centered series. Needs
/// more than 10·p observations. A constant series fits exactly with zero
/// coefficients rather than erroring on its singular design matrix.
pub fn fit_ar(series: &[f64], p: usize) -> Result<ArmaModel> {
    if p == 0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "AR order must be at least 1".to_string(),
        });
    }
    if series.len() <= 10 * p {
        return Err(Error::InsufficientData {
            required: 10 * p + 1,
            actual: series.len(),
        });
    }
    // A constant series centers to numerical dust whose normal equations
    // admit any phi; the exact zero-coefficient fit is the right answer.
    if series.iter().all(|v| *v == series[0]) {
        return Ok(ArmaModel {
            p,
            q: 0,
            phi: vec![0.0; p],
            theta: Vec::new(),
            mu: series[0],
            sigma2: 0.0,
        });
    }
    let mu = mean(series);
    let z: Vec<f64> = series.iter().map(|y| y - mu).collect();
    let n = z.len();

    let mut a = Matrix::zeros(p, p);
    let mut b = vec![0.0; p];
    for t in p..n {
        for i in 0..p {
            b[i] += z[t] * z[t - 1 - i];
            for j in 0..p {
                a.set(i, j, a.get(i, j) + z[t - 1 - i] * z[t - 1 - j]);
            }
        }
    }
    let phi = solve_linear(&mut a, &mut b)?;

    let sigma2 = css(&z, &phi, &[], p) / (n - p) as f64;
    Ok(ArmaModel {
        p,
        q: 0,
        phi,
        theta: Vec::new(),
        mu,
        sigma2,
    })
}

/// Conditional sum of squares for a centered series. Residuals before
/// t = p are pinned to zero and the sum runs over t = p..n.
fn css(z: &[f64], phi: &[f64], theta: &[f64], p: usize) -> f64 {
    let n = z.len();
    let mut eps = vec![0.0; n];
    let mut total = 0.0;
    for t in p..n {
        let mut pred = 0.0;
        for (i, ph) in phi.iter().enumerate() {
            pred += ph * z[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t >= p + j + 1 {
                pred += th * eps[t - 1 - j];
            }
        }
        let e = z[t] - pred;
        eps[t] = e;
        total += e * e;
    }
    total
}

/// In-sample residuals under the same conditioning as [`css`].
fn css_residuals(z: &[f64], phi: &[f64], theta: &[f64], p: usize) -> Vec<f64> {
    let n = z.len();
    let mut eps = vec![0.0; n];
    for t in p..n {
        let mut pred = 0.0;
        for (i, ph) in phi.iter().enumerate() {
            pred += ph * z[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t >= p + j + 1 {
                pred += th * eps[t - 1 - j];
            }
        }
        eps[t] = z[t] - pred;
    }
    eps
}

struct SimplexOutcome {
    best: Vec<f64>,
    best_f: f64,
    converged: bool,
    iterations: usize,
}

/// Nelder-Mead with the classic coefficients (reflect 1, expand 2,
/// contract 1/2, shrink 1/2). The incumbent best vertex survives every
/// operation, so starting at an exact minimizer returns it unchanged.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> SimplexOutcome {
    let dim = x0.len();
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    vertices.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += if v[i] != 0.0 { 0.05 * v[i] } else { 0.00025 };
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| f(v)).collect();

    let order = |vertices: &mut Vec<Vec<f64>>, values: &mut Vec<f64>| {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        *vertices = idx.iter().map(|&i| vertices[i].clone()).collect();
        *values = idx.iter().map(|&i| values[i]).collect();
    };
    order(&mut vertices, &mut values);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let spread = values[dim] - values[0];
        if spread <= 1e-12 * (1.0 + float::abs(values[0])) {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for v in &vertices[..dim] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }
        let blend = |a: f64, b: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&vertices[dim])
                .map(|(c, w)| a * c + b * w)
                .collect()
        };

        let reflected = blend(2.0, -1.0);
        let f_r = f(&reflected);
        if f_r < values[0] {
            let expanded = blend(3.0, -2.0);
            let f_e = f(&expanded);
            if f_e < f_r {
                vertices[dim] = expanded;
                values[dim] = f_e;
            } else {
                vertices[dim] = reflected;
                values[dim] = f_r;
            }
        } else if f_r < values[dim - 1] {
            vertices[dim] = reflected;
            values[dim] = f_r;
        } else {
            let contracted = if f_r < values[dim] {
                blend(1.5, -0.5)
            } else {
                blend(0.5, 0.5)
            };
            let f_c = f(&contracted);
            if f_c < values[dim].min(f_r) {
                vertices[dim] = contracted;
                values[dim] = f_c;
            } else {
                for i in 1..=dim {
                    let shrunk: Vec<f64> = vertices[0]
                        .iter()
                        .zip(&vertices[i])
                        .map(|(b, v)| 0.5 * (b + v))
                        .collect();
                    values[i] = f(&shrunk);
                    vertices[i] = shrunk;
                }
            }
        }
        order(&mut vertices, &mut values);
    }

    SimplexOutcome {
        best: vertices.swap_remove(0),
        best_f: values[0],
        converged,
        iterations,
    }
}

/// Fits ARMA(p, q), p + q ≥ 1, by conditional-sum-of-squares minimization.
/// The mean is fixed at the sample mean; the simplex starts from the AR
/// least-squares solution (zeros when p = 0) with zero MA terms. On
/// iteration exhaustion the error carries the best parameters found.
pub fn fit_arma(series: &[f64], p: usize, q: usize) -> Result<ArmaModel> {
    if p + q == 0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "ARMA needs p + q >= 1".to_string(),
        });
    }
    if series.len() <= 10 * (p + q) {
        return Err(Error::InsufficientData {
            required: 10 * (p + q) + 1,
            actual: series.len(),
        });
    }
    if series.iter().all(|v| *v == series[0]) {
        return Ok(ArmaModel {
            p,
            q,
            phi: vec![0.0; p],
            theta: vec![0.0; q],
            mu: series[0],
            sigma2: 0.0,
        });
    }
    let mu = mean(series);
    let z: Vec<f64> = series.iter().map(|y| y - mu).collect();
    let n = z.len();

    let mut x0 = if p > 0 {
        fit_ar(series, p)?.phi
    } else {
        Vec::new()
    };
    x0.extend(core::iter::repeat(0.0).take(q));

    let objective = |params: &[f64]| css(&z, &params[..p], &params[p..], p);
    let outcome = nelder_mead(objective, &x0, 2000 * (p + q));
    let model = ArmaModel {
        p,
        q,
        phi: outcome.best[..p].to_vec(),
        theta: outcome.best[p..].to_vec(),
        mu,
        sigma2: outcome.best_f / (n - p) as f64,
    };
    if outcome.converged {
        Ok(model)
    } else {
        Err(Error::NotConverged {
            iterations: outcome.iterations,
            best: Box::new(model),
        })
    }
}

/// Iterated forecasts from the end of `history`. Future residuals are
/// zero; known residuals come from the conditional recursion over the
/// history. Needs at least max(p, q) observations.
pub fn forecast_arma(model: &ArmaModel, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let needed = model.p.max(model.q);
    if history.len() < needed {
        return Err(Error::InsufficientData {
            required: needed,
            actual: history.len(),
        });
    }
    let z: Vec<f64> = history.iter().map(|y| y - model.mu).collect();
    let eps = css_residuals(&z, &model.phi, &model.theta, model.p);
    let n = z.len();

    let mut extended = z;
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = n + h;
        let mut pred = 0.0;
        for (i, ph) in model.phi.iter().enumerate() {
            pred += ph * extended[t - 1 - i];
        }
        for (j, th) in model.theta.iter().enumerate() {
            let idx = t as isize - 1 - j as isize;
            if idx >= 0 && (idx as usize) < n {
                pred += th * eps[idx as usize];
            }
        }
        extended.push(pred);
        out.push(model.mu + pred);
    }
    Ok(out)
}

/// First-differences the series d times. Each pass shortens it by one.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() < d + 1 {
        return Err(Error::InsufficientData {
            required: d + 1,
            actual: series.len(),
        });
    }
    let mut w = series.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    Ok(w)
}

/// Inverts [`difference`]: `integrate(difference(s, d), &s[..d], d)`
/// reconstructs s, leading values included. The seeds are the first d
/// values of the pre-differencing series; passing the *last* value of each
/// differencing level instead continues the series forward, which is how
/// integrated forecasts are rebuilt.
pub fn integrate(diffs: &[f64], seeds: &[f64], d: usize) -> Result<Vec<f64>> {
    if seeds.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: seeds.len(),
        });
    }
    // Seed of level k is the first element of the k-times differenced
    // series, recovered by differencing the seed prefix itself.
    let mut level_seed = Vec::with_capacity(d);
    let mut prefix = seeds.to_vec();
    for _ in 0..d {
        level_seed.push(prefix[0]);
        prefix = prefix.windows(2).map(|p| p[1] - p[0]).collect();
    }

    let mut w = diffs.to_vec();
    for k in (0..d).rev() {
        let mut acc = level_seed[k];
        let mut undone = Vec::with_capacity(w.len() + 1);
        undone.push(acc);
        for dv in &w {
            acc += dv;
            undone.push(acc);
        }
        w = undone;
    }
    Ok(w)
}

/// Differences d times, then fits ARMA(p, q) on the result. p = q = 0
/// yields the mean-only model of the differenced series (for d = 1 that
/// is a random walk with drift).
pub fn fit_arima(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaModel> {
    let w = difference(series, d)?;
    let inner = if p + q == 0 {
        if w.is_empty() {
            return Err(Error::InsufficientData {
                required: d + 2,
                actual: series.len(),
            });
        }
        let mu = mean(&w);
        let sigma2 = w.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / w.len() as f64;
        ArmaModel {
            p: 0,
            q: 0,
            phi: Vec::new(),
            theta: Vec::new(),
            mu,
            sigma2,
        }
    } else {
        fit_arma(&w, p, q)?
    };
    Ok(ArimaModel { inner, d })
}

/// Forecasts in the original units: forecasts the differenced series, then
/// cumulatively sums from the history's tail values at each level.
pub fn forecast_arima(model: &ArimaModel, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if history.len() < model.d + 1 {
        return Err(Error::InsufficientData {
            required: model.d + 1,
            actual: history.len(),
        });
    }
    let mut level = history.to_vec();
    let mut tails = Vec::with_capacity(model.d);
    for _ in 0..model.d {
        tails.push(*level.last().expect("length checked"));
        level = difference(&level, 1)?;
    }
    let w_forecast = forecast_arma(&model.inner, &level, horizon)?;

    // Cumulative sums continue each level from its last known value.
    let mut w = w_forecast;
    for k in (0..model.d).rev() {
        let mut acc = tails[k];
        for v in w.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(w)
}

/// Fits the elastic net by cyclic coordinate descent on standardized
/// columns. `lambda` must be non-negative, `l1_ratio` in [0, 1], `tol`
/// positive; descent stops once no coefficient moves more than `tol` in a
/// sweep. Zero-variance columns get a zero coefficient.
pub fn fit_elastic_net(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    l1_ratio: f64,
    tol: f64,
) -> Result<ElasticNetModel> {
    if x.rows() == 0 || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "must be non-negative".to_string(),
        });
    }
    if !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::InvalidParameter {
            name: "l1_ratio",
            reason: "must lie in [0, 1]".to_string(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "must be positive".to_string(),
        });
    }

    let n = x.rows();
    let m = x.cols();
    let y_mean = mean(y);

    let mut col_mean = vec![0.0; m];
    let mut col_std = vec![0.0; m];
    for j in 0..m {
        let mut s = 0.0;
        for i in 0..n {
            s += x.get(i, j);
        }
        col_mean[j] = s / n as f64;
        let mut v = 0.0;
        for i in 0..n {
            let dxi = x.get(i, j) - col_mean[j];
            v += dxi * dxi;
        }
        col_std[j] = float::sqrt(v / n as f64);
    }

    // Standardized design; degenerate columns become all-zero.
    let mut xs = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            if col_std[j] > 0.0 {
                xs.set(i, j, (x.get(i, j) - col_mean[j]) / col_std[j]);
            }
        }
    }

    let l1 = lambda * l1_ratio;
    let l2 = lambda * (1.0 - l1_ratio);
    let mut w = vec![0.0; m];
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    for _ in 0..100_000 {
        let mut max_delta = 0.0f64;
        for j in 0..m {
            if col_std[j] <= 0.0 {
                continue;
            }
            // rho = (1/n) x_j . residual + w_j; standardized columns have
            // unit population variance, so the denominator is 1 + l2.
            let mut rho = 0.0;
            for i in 0..n {
                rho += xs.get(i, j) * residual[i];
            }
            rho = rho / n as f64 + w[j];
            let new_w = soft_threshold(rho, l1) / (1.0 + l2);
            let delta = new_w - w[j];
            if delta != 0.0 {
                for i in 0..n {
                    residual[i] -= delta * xs.get(i, j);
                }
                w[j] = new_w;
            }
            max_delta = max_delta.max(float::abs(delta));
        }
        if max_delta <= tol {
            break;
        }
    }

    Ok(ElasticNetModel {
        coefficients: w,
        intercept: y_mean,
        lambda,
        l1_ratio,
    })
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Orders features by share of total coefficient magnitude, strongest
/// first; importances sum to 1. Ties keep their input order. When every
/// coefficient is zero the shares are uniform and flagged as no-signal.
pub fn rank_features(model: &ElasticNetModel, names: &[&str]) -> Result<FeatureRanking> {
    if names.len() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            actual: names.len(),
        });
    }
    if names.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = model.coefficients.iter().map(|c| float::abs(*c)).sum();
    let no_signal = total == 0.0;
    let mut entries: Vec<(String, f64)> = names
        .iter()
        .zip(&model.coefficients)
        .map(|(n, c)| {
            let importance = if no_signal {
                1.0 / names.len() as f64
            } else {
                float::abs(*c) / total
            };
            (n.to_string(), importance)
        })
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(FeatureRanking { entries, no_signal })
}
