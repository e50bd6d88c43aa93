//! Evaluation machinery: point-forecast metrics, contiguous-block k-fold
//! cross-validation, randomized hyperparameter search, the two reference
//! regressors (k-nearest-neighbours and extremely randomized trees), and
//! the four-way model comparison.
//!
//! Everything here is deterministic given its seed arguments, so a full
//! model comparison reruns bit-identically.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::RngExt;

use crate::data::{fit_scaler, split_chronological, transform, Column, Dataset};
use crate::float;
use crate::hybrid::{train_hybrid, PipelineConfig};
use crate::lstm::{forward_sequence, train_lstm, LstmConfig};
use crate::matrix::Matrix;
use crate::narx::NarxConfig;
use crate::rng;
use crate::{Error, Result};

fn validate_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::EmptyInput);
    }
    if actual.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    validate_pair(actual, predicted)?;
    let mut sq = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        let e = p - a;
        sq += e * e;
    }
    Ok(float::sqrt(sq / actual.len() as f64))
}

/// Mean absolute error. The absolute value is applied to each term; a
/// signed mean would let opposite errors cancel and report zero for a
/// badly wrong forecast.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    validate_pair(actual, predicted)?;
    let mut abs = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        abs += (p - a).abs();
    }
    Ok(abs / actual.len() as f64)
}

/// Mean absolute percentage error over rows with nonzero actuals; returns
/// the percentage and the number of excluded rows. Zero actuals (every
/// night step of a PV series) would make the ratio undefined, so they are
/// skipped and counted instead. When every actual is zero the percentage
/// is reported as 0 with all rows excluded.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<(f64, usize)> {
    validate_pair(actual, predicted)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (a, p) in actual.iter().zip(predicted) {
        if *a != 0.0 {
            total += ((p - a) / a).abs();
            used += 1;
        }
    }
    let excluded = actual.len() - used;
    let pct = if used == 0 {
        0.0
    } else {
        100.0 * total / used as f64
    };
    Ok((pct, excluded))
}

/// Point-forecast error summary. `mape` is in percent; `mape_excluded`
/// counts the zero-actual rows left out of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub mape: f64,
    pub mape_excluded: usize,
}

/// All three metrics of `predicted` against `actual` in one pass.
pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    let (mape, mape_excluded) = mape(actual, predicted)?;
    Ok(Metrics {
        rmse: rmse(actual, predicted)?,
        mae: mae(actual, predicted)?,
        mape,
        mape_excluded,
    })
}

/// One fold of a contiguous-block split: the validation block and the two
/// surrounding training ranges (either may be empty). Ranges index rows of
/// the dataset handed to [`kfold_cv`].
#[derive(Debug, Clone, PartialEq)]
pub struct FoldView {
    pub train_before: Range<usize>,
    pub validation: Range<usize>,
    pub train_after: Range<usize>,
}

/// Cross-validation outcome: one metrics row per fold plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub k: usize,
    pub per_fold: Vec<Metrics>,
    /// Plain mean of the per-fold metrics; excluded counts are summed.
    pub aggregate: Metrics,
}

fn mean_metrics(folds: &[Metrics]) -> Metrics {
    let n = folds.len() as f64;
    Metrics {
        rmse: folds.iter().map(|m| m.rmse).sum::<f64>() / n,
        mae: folds.iter().map(|m| m.mae).sum::<f64>() / n,
        mape: folds.iter().map(|m| m.mape).sum::<f64>() / n,
        mape_excluded: folds.iter().map(|m| m.mape_excluded).sum(),
    }
}

/// Contiguous-block k-fold cross-validation over the dataset's rows. The
/// blocks partition the rows in chronological order (never shuffled, so
/// temporal adjacency is preserved); when the row count is not divisible
/// by k the first `n mod k` blocks carry one extra row. Each block serves
/// once as validation: the trainer closure receives the fold layout, fits
/// on the training ranges, and returns one prediction in watts per
/// validation row.
pub fn kfold_cv<F>(data: &Dataset, k: usize, mut trainer: F) -> Result<CvReport>
where
    F: FnMut(&FoldView) -> Result<Vec<f64>>,
{
    let targets = data.powers().ok_or_else(|| Error::InvalidData {
        row: 0,
        reason: "cross-validation needs the pv_power column".to_string(),
    })?;
    let n = targets.len();
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "needs at least 2 folds".to_string(),
        });
    }
    if n < k {
        return Err(Error::InsufficientData {
            required: k,
            actual: n,
        });
    }
    let base = n / k;
    let extra = n % k;
    let mut per_fold = Vec::with_capacity(k);
    let mut start = 0usize;
    for fold in 0..k {
        let len = base + usize::from(fold < extra);
        let view = FoldView {
            train_before: 0..start,
            validation: start..start + len,
            train_after: start + len..n,
        };
        let preds = trainer(&view)?;
        if preds.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: preds.len(),
            });
        }
        per_fold.push(compute_metrics(&targets[view.validation.clone()], &preds)?);
        start += len;
    }
    Ok(CvReport {
        k,
        aggregate: mean_metrics(&per_fold),
        per_fold,
    })
}

/// One hyperparameter's sampling rule.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamRange {
    /// Uniform over [lo, hi]; with `log_scale` the exponent is uniform
    /// instead, which requires lo > 0.
    Continuous { lo: f64, hi: f64, log_scale: bool },
    /// Uniform over an explicit finite set.
    Discrete(Vec<f64>),
}

/// Named hyperparameters plus the draw budget and seed that make a search
/// reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub params: Vec<(String, ParamRange)>,
    pub budget: usize,
    pub seed: u64,
}

impl SearchSpace {
    pub fn new(budget: usize, seed: u64) -> Self {
        SearchSpace {
            params: Vec::new(),
            budget,
            seed,
        }
    }

    pub fn push(&mut self, name: &str, range: ParamRange) {
        self.params.push((name.to_string(), range));
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParameter {
                name: "budget",
                reason: "needs at least one draw".to_string(),
            });
        }
        if self.params.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (name, range) in &self.params {
            match range {
                ParamRange::Continuous { lo, hi, log_scale } => {
                    let ok =
                        lo.is_finite() && hi.is_finite() && lo < hi && (!log_scale || *lo > 0.0);
                    if !ok {
                        return Err(Error::InvalidParameter {
                            name: "space",
                            reason: alloc::format!("bad continuous range for {name}"),
                        });
                    }
                }
                ParamRange::Discrete(v) => {
                    if v.is_empty() {
                        return Err(Error::InvalidParameter {
                            name: "space",
                            reason: alloc::format!("empty discrete set for {name}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// One draw and what became of it; a `None` score means the objective
/// failed or returned a non-finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrial {
    pub params: Vec<(String, f64)>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_params: Vec<(String, f64)>,
    pub best_score: f64,
    pub trials: Vec<SearchTrial>,
}

/// Convenience lookup into a drawn parameter set.
pub fn param(draw: &[(String, f64)], name: &str) -> Option<f64> {
    draw.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
}

/// Draws `space.budget` parameter sets uniformly and keeps the one with
/// the lowest objective value (ties keep the earliest draw). Failed draws
/// are recorded in the trial list and skipped; if every draw fails the
/// search itself fails.
pub fn randomized_search<F>(space: &SearchSpace, mut objective: F) -> Result<SearchResult>
where
    F: FnMut(&[(String, f64)]) -> Result<f64>,
{
    space.validate()?;
    let mut r = rng::from_seed(space.seed);
    let mut trials = Vec::with_capacity(space.budget);
    let mut best: Option<(usize, f64)> = None;
    for t in 0..space.budget {
        let draw: Vec<(String, f64)> = space
            .params
            .iter()
            .map(|(name, range)| {
                let v = match range {
                    ParamRange::Continuous { lo, hi, log_scale } => {
                        if *log_scale {
                            float::exp(r.random_range(float::ln(*lo)..float::ln(*hi)))
                        } else {
                            r.random_range(*lo..*hi)
                        }
                    }
                    ParamRange::Discrete(set) => set[r.random_range(0..set.len())],
                };
                (name.clone(), v)
            })
            .collect();
        let score = match objective(&draw) {
            Ok(s) if s.is_finite() => Some(s),
            _ => None,
        };
        if let Some(s) = score {
            if best.map(|(_, b)| s < b).unwrap_or(true) {
                best = Some((t, s));
            }
        }
        trials.push(SearchTrial { params: draw, score });
    }
    match best {
        Some((idx, score)) => Ok(SearchResult {
            best_params: trials[idx].params.clone(),
            best_score: score,
            trials,
        }),
        None => Err(Error::AllDrawsFailed {
            attempted: space.budget,
        }),
    }
}

/// k-nearest-neighbours regressor over rows of a feature matrix. The
/// stored features should already be scaled so that every column weighs
/// comparably in the Euclidean distance; fitting is just storage.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    features: Matrix,
    targets: Vec<f64>,
}

pub fn knn_fit(features: &Matrix, targets: &[f64], k: usize) -> Result<KnnModel> {
    if features.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if features.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            actual: targets.len(),
        });
    }
    if k == 0 || k > features.rows() {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must lie in 1..=n_rows".to_string(),
        });
    }
    Ok(KnnModel {
        k,
        features: features.clone(),
        targets: targets.to_vec(),
    })
}

/// Unweighted mean target of the k nearest stored rows by Euclidean
/// distance. Distance ties resolve towards the lower row index, making the
/// prediction independent of any internal ordering.
pub fn knn_predict(model: &KnnModel, query: &[f64]) -> Result<f64> {
    if query.len() != model.features.cols() {
        return Err(Error::DimensionMismatch {
            expected: model.features.cols(),
            actual: query.len(),
        });
    }
    let mut scored: Vec<(f64, usize)> = model
        .features
        .iter_rows()
        .enumerate()
        .map(|(i, row)| {
            let mut d = 0.0;
            for (a, b) in row.iter().zip(query) {
                let e = a - b;
                d += e * e;
            }
            (d, i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if model.k < scored.len() {
        scored.select_nth_unstable_by(model.k - 1, cmp);
    }
    let mut sum = 0.0;
    for (_, idx) in &scored[..model.k] {
        sum += model.targets[*idx];
    }
    Ok(sum / model.k as f64)
}

/// Extremely randomized trees regressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraTreesConfig {
    pub n_trees: usize,
    /// Every leaf keeps at least this many training rows.
    pub min_samples_leaf: usize,
    /// Candidate features tried per node; `None` means all of them.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ExtraTreesConfig {
    fn default() -> Self {
        ExtraTreesConfig {
            n_trees: 100,
            min_samples_leaf: 2,
            max_features: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraTreesModel {
    pub config: ExtraTreesConfig,
    n_features: usize,
    trees: Vec<Vec<TreeNode>>,
}

// The mean of identical values is that value; the general path accumulates
// rounding, which would break exactness guarantees on constant targets.
fn stable_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut iter = values.clone();
    if let Some(first) = iter.next() {
        if iter.all(|v| v == first) {
            return first;
        }
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

fn grow_tree(
    features: &Matrix,
    targets: &[f64],
    cfg: &ExtraTreesConfig,
    max_features: usize,
    r: &mut impl RngExt,
) -> Vec<TreeNode> {
    let mut arena: Vec<TreeNode> = vec![TreeNode::Leaf { value: 0.0 }];
    let all_rows: Vec<usize> = (0..features.rows()).collect();
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, all_rows)];
    let n_features = features.cols();
    let mut feature_pool: Vec<usize> = (0..n_features).collect();

    while let Some((slot, rows)) = stack.pop() {
        let first_t = targets[rows[0]];
        let all_equal = rows.iter().all(|&i| targets[i] == first_t);
        if rows.len() < 2 * cfg.min_samples_leaf || all_equal {
            arena[slot] = TreeNode::Leaf {
                value: stable_mean(rows.iter().map(|&i| targets[i])),
            };
            continue;
        }

        // Random candidate features without replacement, then one uniform
        // threshold per candidate; keep the split with the lowest summed
        // child squared error (equivalently, the best variance reduction).
        for i in 0..max_features {
            let j = r.random_range(i..n_features);
            feature_pool.swap(i, j);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &feature_pool[..max_features] {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &rows {
                let v = features.get(i, f);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !(lo < hi) {
                continue;
            }
            let threshold = r.random_range(lo..hi);
            let mut nl = 0usize;
            let mut sl = 0.0;
            let mut ql = 0.0;
            let mut nr = 0usize;
            let mut sr = 0.0;
            let mut qr = 0.0;
            for &i in &rows {
                let y = targets[i];
                if features.get(i, f) < threshold {
                    nl += 1;
                    sl += y;
                    ql += y * y;
                } else {
                    nr += 1;
                    sr += y;
                    qr += y * y;
                }
            }
            if nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf {
                continue;
            }
            let score = (ql - sl * sl / nl as f64) + (qr - sr * sr / nr as f64);
            if best.map(|(b, _, _)| score < b).unwrap_or(true) {
                best = Some((score, f, threshold));
            }
        }

        match best {
            None => {
                arena[slot] = TreeNode::Leaf {
                    value: stable_mean(rows.iter().map(|&i| targets[i])),
                }
            }
            Some((_, feature, threshold)) => {
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                for &i in &rows {
                    if features.get(i, feature) < threshold {
                        left_rows.push(i);
                    } else {
                        right_rows.push(i);
                    }
                }
                let left = arena.len();
                arena.push(TreeNode::Leaf { value: 0.0 });
                let right = arena.len();
                arena.push(TreeNode::Leaf { value: 0.0 });
                arena[slot] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push((left, left_rows));
                stack.push((right, right_rows));
            }
        }
    }
    arena
}

/// Grows the whole forest. Every tree sees the full training set (no
/// bootstrap); the randomness lives in the feature subsets and thresholds,
/// drawn from one substream per tree.
pub fn extratrees_fit(
    features: &Matrix,
    targets: &[f64],
    cfg: &ExtraTreesConfig,
) -> Result<ExtraTreesModel> {
    if features.rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if features.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            actual: targets.len(),
        });
    }
    if cfg.n_trees == 0 {
        return Err(Error::InvalidParameter {
            name: "n_trees",
            reason: "must be at least 1".to_string(),
        });
    }
    if cfg.min_samples_leaf == 0 {
        return Err(Error::InvalidParameter {
            name: "min_samples_leaf",
            reason: "must be at least 1".to_string(),
        });
    }
    let max_features = cfg.max_features.unwrap_or(features.cols());
    if max_features == 0 || max_features > features.cols() {
        return Err(Error::InvalidParameter {
            name: "max_features",
            reason: "must lie in 1..=n_features".to_string(),
        });
    }
    let trees = (0..cfg.n_trees)
        .map(|t| {
            let mut r = rng::stream(cfg.seed, t as u64);
            grow_tree(features, targets, cfg, max_features, &mut r)
        })
        .collect();
    Ok(ExtraTreesModel {
        config: *cfg,
        n_features: features.cols(),
        trees,
    })
}

fn tree_predict(tree: &[TreeNode], query: &[f64]) -> f64 {
    let mut node = 0usize;
    loop {
        match &tree[node] {
            TreeNode::Leaf { value } => return *value,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if query[*feature] < *threshold {
                    *left
                } else {
                    *right
                };
            }
        }
    }
}

/// Mean of the per-tree predictions.
pub fn extratrees_predict(model: &ExtraTreesModel, query: &[f64]) -> Result<f64> {
    if query.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: query.len(),
        });
    }
    Ok(stable_mean(
        model.trees.iter().map(|t| tree_predict(t, query)),
    ))
}

/// Percentage by which `best` undercuts `runner_up`:
/// 100 * (runner_up - best) / runner_up.
pub fn relative_improvement(best: f64, runner_up: f64) -> f64 {
    if runner_up == 0.0 {
        return 0.0;
    }
    100.0 * (runner_up - best) / runner_up
}

/// One model's outcome inside a comparison. A failed contender keeps its
/// row (with neither metrics nor predictions) so the table always has one
/// row per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub metrics: Option<Metrics>,
    /// Test-window predictions in watts, for overlay plots.
    pub predictions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Lowest-RMSE contender, when at least one succeeded.
    pub best_model: Option<String>,
    /// Best vs runner-up RMSE in percent, when at least two succeeded.
    pub improvement: Option<f64>,
}

/// Shared knobs for [`compare_models`]. Every contender is tuned with the
/// same randomized-search budget and judged on the same chronological
/// split; the base configs carry the non-searched settings (epochs,
/// batch sizes, seeds).
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub train_fraction: f64,
    /// Randomized-search draws granted to each contender.
    pub budget: usize,
    pub seed: u64,
    pub narx_base: NarxConfig,
    pub lstm_base: LstmConfig,
    pub extra_trees_base: ExtraTreesConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            train_fraction: 0.8,
            budget: 20,
            seed: 7,
            narx_base: NarxConfig::default(),
            lstm_base: LstmConfig::default(),
            extra_trees_base: ExtraTreesConfig::default(),
        }
    }
}

/// A contender produces test-window predictions in watts.
type Contender<'a> = (String, Box<dyn FnMut() -> Result<Vec<f64>> + 'a>);

/// Builds the comparison table from per-model prediction closures. Split
/// out so degenerate contenders can be injected in tests; `compare_models`
/// supplies the real four.
fn run_comparison(test_actual: &[f64], contenders: Vec<Contender<'_>>) -> Result<ComparisonReport> {
    let mut rows = Vec::with_capacity(contenders.len());
    for (name, mut run) in contenders {
        let (metrics, predictions) = match run() {
            Ok(preds) => match compute_metrics(test_actual, &preds) {
                Ok(m) => (Some(m), Some(preds)),
                Err(_) => (None, None),
            },
            Err(_) => (None, None),
        };
        rows.push(ComparisonRow {
            model: name,
            metrics,
            predictions,
        });
    }
    let mut scored: Vec<(f64, &str)> = rows
        .iter()
        .filter_map(|r| r.metrics.map(|m| (m.rmse, r.model.as_str())))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let best_model = scored.first().map(|(_, n)| n.to_string());
    let improvement = (scored.len() >= 2).then(|| relative_improvement(scored[0].0, scored[1].0));
    Ok(ComparisonReport {
        rows,
        best_model,
        improvement,
    })
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    crate::rng::mix(seed, salt)
}

/// Tunes and scores the four contenders — extremely randomized trees,
/// k-nearest-neighbours, a standalone LSTM, and the NARX-LSTM pipeline —
/// under one equal randomized-search budget on one chronological split.
/// Feature-based contenders see min-max scaled inputs (unscaled Euclidean
/// distance would be dominated by irradiance magnitude); metrics are
/// computed in watts on the identical test rows. A contender whose search
/// or final fit fails keeps a failed row while the others proceed.
pub fn compare_models(data: &Dataset, cfg: &CompareConfig) -> Result<ComparisonReport> {
    if !data.has_power() {
        return Err(Error::InvalidData {
            row: 0,
            reason: "comparison needs the pv_power column".to_string(),
        });
    }
    let (train, test) = split_chronological(data, cfg.train_fraction)?;
    let scaler = fit_scaler(&train)?;
    let train_scaled = transform(&scaler, &train);
    let test_scaled = transform(&scaler, &test);

    let train_watts = train.powers().expect("power checked above");
    let test_watts = test.powers().expect("power checked above");
    let train_features = train_scaled.features_matrix();
    let test_features = test_scaled.features_matrix();
    let train_targets_scaled = train_scaled.powers().expect("power checked above");

    // Search validation carves the tail off the training rows; the test
    // rows stay untouched until final scoring.
    let holdout = (train.len() as f64 * 0.8) as usize;
    let holdout = holdout.clamp(1, train.len() - 1);

    let unscale_power = |v: f64| scaler.unscale_value(v, Column::PvPower).max(0.0);

    // Extremely randomized trees.
    let et_run = || -> Result<Vec<f64>> {
        let mut space = SearchSpace::new(cfg.budget, mix_seed(cfg.seed, 0));
        space.push("n_trees", ParamRange::Discrete(vec![25.0, 50.0, 100.0]));
        space.push(
            "min_samples_leaf",
            ParamRange::Discrete(vec![1.0, 2.0, 4.0, 8.0, 16.0]),
        );
        space.push(
            "max_features",
            ParamRange::Discrete((1..=train_features.cols()).map(|v| v as f64).collect()),
        );
        let mut sub_train = Matrix::zeros(0, 0);
        for i in 0..holdout {
            sub_train.push_row(train_features.row(i))?;
        }
        let cfg_from = |draw: &[(String, f64)], seed: u64| ExtraTreesConfig {
            n_trees: param(draw, "n_trees").unwrap() as usize,
            min_samples_leaf: param(draw, "min_samples_leaf").unwrap() as usize,
            max_features: Some(param(draw, "max_features").unwrap() as usize),
            seed,
        };
        let best = randomized_search(&space, |draw| {
            let model = extratrees_fit(
                &sub_train,
                &train_watts[..holdout],
                &cfg_from(draw, cfg.extra_trees_base.seed),
            )?;
            let preds: Result<Vec<f64>> = (holdout..train.len())
                .map(|i| extratrees_predict(&model, train_features.row(i)))
                .collect();
            rmse(&train_watts[holdout..], &preds?)
        })?;
        let model = extratrees_fit(
            &train_features,
            &train_watts,
            &cfg_from(&best.best_params, cfg.extra_trees_base.seed),
        )?;
        (0..test.len())
            .map(|i| extratrees_predict(&model, test_features.row(i)))
            .collect()
    };

    // k-nearest-neighbours.
    let knn_run = || -> Result<Vec<f64>> {
        let k_max = holdout.min(50);
        let mut space = SearchSpace::new(cfg.budget, mix_seed(cfg.seed, 1));
        space.push(
            "k",
            ParamRange::Discrete((1..=k_max).map(|v| v as f64).collect()),
        );
        let mut sub_train = Matrix::zeros(0, 0);
        for i in 0..holdout {
            sub_train.push_row(train_features.row(i))?;
        }
        let best = randomized_search(&space, |draw| {
            let model = knn_fit(
                &sub_train,
                &train_watts[..holdout],
                param(draw, "k").unwrap() as usize,
            )?;
            let preds: Result<Vec<f64>> = (holdout..train.len())
                .map(|i| knn_predict(&model, train_features.row(i)))
                .collect();
            rmse(&train_watts[holdout..], &preds?)
        })?;
        let model = knn_fit(
            &train_features,
            &train_watts,
            param(&best.best_params, "k").unwrap() as usize,
        )?;
        (0..test.len())
            .map(|i| knn_predict(&model, test_features.row(i)))
            .collect()
    };

    // Standalone LSTM over the scaled base features. Evaluation runs the
    // test span as one sequence from a zero state, the same reading the
    // pipeline uses for its own LSTM stage.
    let lstm_space = |salt: u64| {
        let mut space = SearchSpace::new(cfg.budget, mix_seed(cfg.seed, salt));
        space.push("hidden", ParamRange::Discrete(vec![8.0, 12.0, 16.0, 24.0]));
        space.push(
            "lr",
            ParamRange::Continuous {
                lo: 0.01,
                hi: 0.3,
                log_scale: true,
            },
        );
        space.push("layers", ParamRange::Discrete(vec![1.0, 2.0]));
        space
    };
    let lstm_cfg_from = |draw: &[(String, f64)], base: &LstmConfig| LstmConfig {
        hidden_size: param(draw, "hidden").unwrap() as usize,
        learning_rate: param(draw, "lr").unwrap(),
        layers: param(draw, "layers").unwrap() as usize,
        ..*base
    };
    let lstm_run = || -> Result<Vec<f64>> {
        let mut sub_train = Matrix::zeros(0, 0);
        for i in 0..holdout {
            sub_train.push_row(train_features.row(i))?;
        }
        let mut sub_val = Matrix::zeros(0, 0);
        for i in holdout..train.len() {
            sub_val.push_row(train_features.row(i))?;
        }
        let best = randomized_search(&lstm_space(2), |draw| {
            let candidate = lstm_cfg_from(draw, &cfg.lstm_base);
            let (stack, _) = train_lstm(&sub_train, &train_targets_scaled[..holdout], &candidate)?;
            let preds: Vec<f64> = forward_sequence(&stack, &sub_val)?
                .into_iter()
                .map(unscale_power)
                .collect();
            rmse(&train_watts[holdout..], &preds)
        })?;
        let final_cfg = lstm_cfg_from(&best.best_params, &cfg.lstm_base);
        let (stack, _) = train_lstm(&train_features, &train_targets_scaled, &final_cfg)?;
        Ok(forward_sequence(&stack, &test_features)?
            .into_iter()
            .map(unscale_power)
            .collect())
    };

    // NARX-LSTM pipeline. Each draw runs the whole pipeline on the
    // training rows (it sub-splits internally for its own validation);
    // the final fit runs on the full data so its internal split lands on
    // exactly the comparison's train/test rows.
    let hybrid_run = || -> Result<Vec<f64>> {
        let mut space = lstm_space(3);
        space.push("narx_hidden", ParamRange::Discrete(vec![8.0, 12.0, 16.0]));
        space.push(
            "narx_lr",
            ParamRange::Continuous {
                lo: 0.05,
                hi: 0.5,
                log_scale: true,
            },
        );
        let pipeline_cfg = |draw: &[(String, f64)]| PipelineConfig {
            narx: NarxConfig {
                hidden_units: param(draw, "narx_hidden").unwrap() as usize,
                learning_rate: param(draw, "narx_lr").unwrap(),
                ..cfg.narx_base
            },
            lstm: lstm_cfg_from(draw, &cfg.lstm_base),
            train_fraction: cfg.train_fraction,
        };
        let best = randomized_search(&space, |draw| {
            let (_, report) = train_hybrid(&train, &pipeline_cfg(draw))?;
            Ok(report.test_metrics.expect("pipeline reports metrics").rmse)
        })?;
        let (_, report) = train_hybrid(data, &pipeline_cfg(&best.best_params))?;
        report.test_predictions.ok_or(Error::EmptyInput)
    };

    let contenders: Vec<Contender<'_>> = vec![
        ("extra_trees".to_string(), Box::new(et_run)),
        ("knn".to_string(), Box::new(knn_run)),
        ("lstm".to_string(), Box::new(lstm_run)),
        ("narx_lstm".to_string(), Box::new(hybrid_run)),
    ];
    run_comparison(&test_watts, contenders)
}

/// Training outputs the pipeline hands back along with a model: held-out
/// metrics in watts, the stage trace, the per-epoch loss curves of both
/// stages, and whatever optional analyses were run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub test_metrics: Option<Metrics>,
    /// Held-out predictions in watts, aligned with the test rows.
    pub test_predictions: Option<Vec<f64>>,
    /// Pipeline stages in execution order.
    pub stage_trace: Vec<String>,
    pub narx_trace: Vec<f64>,
    pub lstm_trace: Vec<f64>,
    pub cv: Option<CvReport>,
    pub comparison: Option<ComparisonReport>,
}
