//! Records, scaling, supervised windows and chronological splits.
//!
//! A [`Dataset`] is a uniformly sampled weather/power series: strictly
//! increasing timestamps with a fixed step, finite values, physical ranges
//! enforced at construction. Power is optional so that forecast-time
//! exogenous data (weather without the answer) can flow through the same
//! type, but it must be present on all rows or none.
//!
//! Supervised windows follow the tapped-delay convention: the row anchored
//! at step n holds the exogenous vectors u(n)..u(n-d_u+1) newest first,
//! then the power lags y(n)..y(n-d_y+1) newest first, and its target is
//! y(n+1). With N records and L = max(d_u, d_y) that yields exactly N - L
//! rows. d_y = 0 drops the output lags entirely, which turns a NARX
//! regressor into a plain time-delay one.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::{Error, Result};

/// Number of exogenous weather features per record.
pub const FEATURE_COUNT: usize = 4;

/// Feature names in record order. Rankings and reports use these.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "irradiance",
    "temperature",
    "wind_speed",
    "relative_humidity",
];

/// One sample of plant weather, with the produced power when known.
///
/// Units: unix seconds, W/m², °C, m/s, percent, watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: i64,
    pub irradiance: f64,
    pub temperature: f64,
    pub wind_speed: f64,
    pub relative_humidity: f64,
    pub pv_power: Option<f64>,
}

impl WeatherRecord {
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.irradiance,
            self.temperature,
            self.wind_speed,
            self.relative_humidity,
        ]
    }

    fn validate(&self, row: usize) -> Result<()> {
        let check = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() {
                return Err(Error::InvalidData {
                    row,
                    reason: format!("{name} is not finite"),
                });
            }
            Ok(())
        };
        check("irradiance", self.irradiance)?;
        check("temperature", self.temperature)?;
        check("wind_speed", self.wind_speed)?;
        check("relative_humidity", self.relative_humidity)?;
        if let Some(p) = self.pv_power {
            check("pv_power", p)?;
        }

        if self.irradiance < 0.0 {
            return Err(Error::InvalidData {
                row,
                reason: "irradiance must be >= 0".to_string(),
            });
        }
        if self.wind_speed < 0.0 {
            return Err(Error::InvalidData {
                row,
                reason: "wind_speed must be >= 0".to_string(),
            });
        }
        if !(0.0..=100.0).contains(&self.relative_humidity) {
            return Err(Error::InvalidData {
                row,
                reason: "relative_humidity must be in [0, 100]".to_string(),
            });
        }
        if matches!(self.pv_power, Some(p) if p < 0.0) {
            return Err(Error::InvalidData {
                row,
                reason: "pv_power must be >= 0".to_string(),
            });
        }
        Ok(())
    }
}

/// Uniformly sampled series of validated records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<WeatherRecord>,
    step_seconds: i64,
}

impl Dataset {
    /// Validates and wraps a record series. Requirements: at least one
    /// record, finite values in physical ranges, timestamps increasing by
    /// exactly `step_seconds`, and power present on all rows or none.
    pub fn new(records: Vec<WeatherRecord>, step_seconds: i64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        if step_seconds <= 0 {
            return Err(Error::InvalidParameter {
                name: "step_seconds",
                reason: "must be positive".to_string(),
            });
        }
        let has_power = records[0].pv_power.is_some();
        for (i, rec) in records.iter().enumerate() {
            rec.validate(i)?;
            if rec.pv_power.is_some() != has_power {
                return Err(Error::InvalidData {
                    row: i,
                    reason: "pv_power must be present on all rows or none".to_string(),
                });
            }
            if i > 0 {
                let gap = rec.timestamp - records[i - 1].timestamp;
                if gap != step_seconds {
                    return Err(Error::InvalidData {
                        row: i,
                        reason: format!("timestamp gap {gap}s, expected {step_seconds}s"),
                    });
                }
            }
        }
        Ok(Dataset {
            records,
            step_seconds,
        })
    }

    /// Wraps records that bypass value-range validation. Used for scaled
    /// copies, whose unitless values legitimately leave the physical
    /// ranges. Callers must preserve the ordering invariants themselves.
    pub(crate) fn from_validated(records: Vec<WeatherRecord>, step_seconds: i64) -> Self {
        Dataset {
            records,
            step_seconds,
        }
    }

    pub fn records(&self) -> &[WeatherRecord] {
        &self.records
    }

    pub fn step_seconds(&self) -> i64 {
        self.step_seconds
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_power(&self) -> bool {
        self.records.first().is_some_and(|r| r.pv_power.is_some())
    }

    /// Power column in watts, if present.
    pub fn powers(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.pv_power).collect()
    }

    /// Exogenous features as an N x 4 matrix in record order.
    pub fn features_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(0, 0);
        for rec in &self.records {
            m.push_row(&rec.features()).expect("fixed feature width");
        }
        m
    }
}

/// Columns a scaler knows about, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Irradiance,
    Temperature,
    WindSpeed,
    RelativeHumidity,
    PvPower,
}

impl Column {
    pub const ALL: [Column; 5] = [
        Column::Irradiance,
        Column::Temperature,
        Column::WindSpeed,
        Column::RelativeHumidity,
        Column::PvPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Irradiance => "irradiance",
            Column::Temperature => "temperature",
            Column::WindSpeed => "wind_speed",
            Column::RelativeHumidity => "relative_humidity",
            Column::PvPower => "pv_power",
        }
    }

    fn index(self) -> usize {
        match self {
            Column::Irradiance => 0,
            Column::Temperature => 1,
            Column::WindSpeed => 2,
            Column::RelativeHumidity => 3,
            Column::PvPower => 4,
        }
    }
}

impl core::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Column::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or(Error::InvalidParameter {
                name: "column",
                reason: format!("unknown column `{s}`"),
            })
    }
}

/// Per-column min-max ranges fitted on training data.
///
/// Transforms map [min, max] onto [0, 1]; values outside the fitted range
/// map outside [0, 1] by the same affine rule, deliberately unclipped so
/// that unseen extremes stay distinguishable. A column with max == min
/// carries no information and scales to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    ranges: [(f64, f64); 5],
}

impl MinMaxScaler {
    /// Identity scaler, mapping every column onto itself.
    pub fn identity() -> Self {
        MinMaxScaler {
            ranges: [(0.0, 1.0); 5],
        }
    }

    /// Rebuilds a scaler from stored per-column ranges, in
    /// [`Column::ALL`] order. Used when deserializing trained models.
    pub fn from_ranges(ranges: [(f64, f64); 5]) -> Self {
        MinMaxScaler { ranges }
    }

    pub fn range(&self, column: Column) -> (f64, f64) {
        self.ranges[column.index()]
    }

    pub fn scale_value(&self, value: f64, column: Column) -> f64 {
        let (min, max) = self.ranges[column.index()];
        if max == min {
            0.0
        } else {
            (value - min) / (max - min)
        }
    }

    pub fn unscale_value(&self, value: f64, column: Column) -> f64 {
        let (min, max) = self.ranges[column.index()];
        if max == min {
            min
        } else {
            min + value * (max - min)
        }
    }

    pub fn scale_features(&self, features: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for (i, (v, c)) in features.iter().zip(Column::ALL).enumerate() {
            out[i] = self.scale_value(*v, c);
        }
        out
    }
}

/// Fits per-column [min, max] on the dataset. Requires the power column:
/// scalers exist to prepare training data, and training data has targets.
pub fn fit_scaler(data: &Dataset) -> Result<MinMaxScaler> {
    if !data.has_power() {
        return Err(Error::InvalidData {
            row: 0,
            reason: "cannot fit scaler without pv_power column".to_string(),
        });
    }
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 5];
    for rec in data.records() {
        let values = [
            rec.irradiance,
            rec.temperature,
            rec.wind_speed,
            rec.relative_humidity,
            rec.pv_power.expect("checked above"),
        ];
        for (range, v) in ranges.iter_mut().zip(values) {
            range.0 = range.0.min(v);
            range.1 = range.1.max(v);
        }
    }
    Ok(MinMaxScaler { ranges })
}

/// Applies the scaler to every column, returning a unitless copy. Power is
/// scaled when present and left absent otherwise.
pub fn transform(scaler: &MinMaxScaler, data: &Dataset) -> Dataset {
    let records = data
        .records()
        .iter()
        .map(|r| WeatherRecord {
            timestamp: r.timestamp,
            irradiance: scaler.scale_value(r.irradiance, Column::Irradiance),
            temperature: scaler.scale_value(r.temperature, Column::Temperature),
            wind_speed: scaler.scale_value(r.wind_speed, Column::WindSpeed),
            relative_humidity: scaler.scale_value(r.relative_humidity, Column::RelativeHumidity),
            pv_power: r.pv_power.map(|p| scaler.scale_value(p, Column::PvPower)),
        })
        .collect();
    Dataset::from_validated(records, data.step_seconds())
}

/// Tapped-delay training rows plus their one-step-ahead targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedWindows {
    inputs: Matrix,
    targets: Vec<f64>,
    n_features: usize,
    d_u: usize,
    d_y: usize,
}

impl SupervisedWindows {
    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Row width: d_u feature blocks plus d_y power lags.
    pub fn width(&self) -> usize {
        self.d_u * self.n_features + self.d_y
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn d_u(&self) -> usize {
        self.d_u
    }

    pub fn d_y(&self) -> usize {
        self.d_y
    }

    /// Concatenates window sets built with identical lag structure, e.g.
    /// from separate contiguous segments of one series.
    pub fn concat(parts: &[SupervisedWindows]) -> Result<SupervisedWindows> {
        let first = parts.first().ok_or(Error::EmptyInput)?;
        let mut inputs = Matrix::zeros(0, first.width());
        let mut targets = Vec::new();
        for part in parts {
            if (part.n_features, part.d_u, part.d_y) != (first.n_features, first.d_u, first.d_y) {
                return Err(Error::DimensionMismatch {
                    expected: first.width(),
                    actual: part.width(),
                });
            }
            for row in part.inputs.iter_rows() {
                inputs.push_row(row)?;
            }
            targets.extend_from_slice(&part.targets);
        }
        Ok(SupervisedWindows {
            inputs,
            targets,
            n_features: first.n_features,
            d_u: first.d_u,
            d_y: first.d_y,
        })
    }
}

/// Builds supervised windows from an exogenous series `u` (one row per
/// step, any number of features) and target series `y` of equal length.
///
/// Each row is anchored at a step n and reads newest first:
/// u(n)..u(n-d_u+1) then y(n)..y(n-d_y+1), with target y(n+1). Output has
/// exactly `len - max(d_u, d_y)` rows. `d_u` must be at least 1; `d_y` of
/// 0 omits the power lags.
pub fn make_windows_series(
    u: &Matrix,
    y: &[f64],
    d_u: usize,
    d_y: usize,
) -> Result<SupervisedWindows> {
    if d_u == 0 {
        return Err(Error::InvalidParameter {
            name: "d_u",
            reason: "must be at least 1".to_string(),
        });
    }
    if u.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: u.rows(),
            actual: y.len(),
        });
    }
    let n = y.len();
    let lag = d_u.max(d_y);
    if n < lag + 1 {
        return Err(Error::InsufficientData {
            required: lag + 1,
            actual: n,
        });
    }
    let n_features = u.cols();
    let width = d_u * n_features + d_y;
    let mut inputs = Matrix::zeros(0, width);
    let mut targets = Vec::with_capacity(n - lag);
    let mut row = Vec::with_capacity(width);
    for anchor in (lag - 1)..(n - 1) {
        row.clear();
        for k in 0..d_u {
            row.extend_from_slice(u.row(anchor - k));
        }
        for k in 0..d_y {
            row.push(y[anchor - k]);
        }
        inputs.push_row(&row)?;
        targets.push(y[anchor + 1]);
    }
    Ok(SupervisedWindows {
        inputs,
        targets,
        n_features,
        d_u,
        d_y,
    })
}

/// Windows over a dataset's four weather features and its power column.
pub fn make_windows(data: &Dataset, d_u: usize, d_y: usize) -> Result<SupervisedWindows> {
    let y = data.powers().ok_or(Error::InvalidData {
        row: 0,
        reason: "cannot build windows without pv_power column".to_string(),
    })?;
    make_windows_series(&data.features_matrix(), &y, d_u, d_y)
}

/// Splits chronologically: the first `floor(fraction * len)` records train,
/// the rest test. Both sides must end up non-empty.
pub fn split_chronological(data: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "train_fraction",
            reason: "must lie strictly between 0 and 1".to_string(),
        });
    }
    let n = data.len();
    let n_train = crate::float::floor(train_fraction * n as f64) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n,
        });
    }
    let train = Dataset::from_validated(data.records()[..n_train].to_vec(), data.step_seconds());
    let test = Dataset::from_validated(data.records()[n_train..].to_vec(), data.step_seconds());
    Ok((train, test))
}
