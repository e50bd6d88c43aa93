//! CSV ingestion and emission for the weather schema.
//!
//! Header: `timestamp,irradiance,temperature,wind_speed,relative_humidity,pv_power`,
//! with the power column optional (a pure feature file omits it). Timestamps
//! are integer epoch seconds; floats are written with Rust's shortest
//! round-trip formatting, so write-then-parse reproduces every value bit for
//! bit. Parse failures name the offending line and column.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use heliofor_core::data::{Dataset, WeatherRecord};

const BASE_HEADER: &str = "timestamp,irradiance,temperature,wind_speed,relative_humidity";
const POWER_HEADER: &str = "timestamp,irradiance,temperature,wind_speed,relative_humidity,pv_power";
pub const FORECAST_HEADER: &str = "timestamp,predicted_power";

pub fn parse_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    parse_str(&text, &path.display().to_string())
}

/// Parses CSV text. `origin` prefixes every diagnostic (normally the file
/// path); line numbers are 1-based with the header on line 1.
pub fn parse_str(text: &str, origin: &str) -> Result<Dataset> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header = match lines.next() {
        Some(h) => h,
        None => bail!("{origin}: empty file, expected a CSV header"),
    };
    let has_power = match header {
        BASE_HEADER => false,
        POWER_HEADER => true,
        other => bail!(
            "{origin}:1: bad header `{other}`, expected `{POWER_HEADER}` \
             (pv_power column optional)"
        ),
    };
    let n_fields = if has_power { 6 } else { 5 };

    let mut records: Vec<WeatherRecord> = Vec::new();
    let mut step: i64 = 1; // placeholder until a second row fixes the grid
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != n_fields {
            bail!("{origin}:{line}: expected {n_fields} fields, got {}", fields.len());
        }
        let timestamp: i64 = fields[0].parse().map_err(|_| {
            anyhow::anyhow!("{origin}:{line}: column timestamp: cannot parse `{}` as an integer", fields[0])
        })?;
        let float = |col: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[col].parse().map_err(|_| {
                anyhow::anyhow!("{origin}:{line}: column {name}: cannot parse `{}` as a number", fields[col])
            })?;
            if !v.is_finite() {
                bail!("{origin}:{line}: column {name}: value is not finite");
            }
            Ok(v)
        };
        let irradiance = float(1, "irradiance")?;
        let temperature = float(2, "temperature")?;
        let wind_speed = float(3, "wind_speed")?;
        let relative_humidity = float(4, "relative_humidity")?;
        let pv_power = if has_power { Some(float(5, "pv_power")?) } else { None };

        if irradiance < 0.0 {
            bail!("{origin}:{line}: irradiance out of range ({irradiance} is negative)");
        }
        if wind_speed < 0.0 {
            bail!("{origin}:{line}: wind_speed out of range ({wind_speed} is negative)");
        }
        if !(0.0..=100.0).contains(&relative_humidity) {
            bail!("{origin}:{line}: relative_humidity out of range ({relative_humidity} not in [0, 100])");
        }
        if let Some(p) = pv_power {
            if p < 0.0 {
                bail!("{origin}:{line}: pv_power out of range ({p} is negative)");
            }
        }

        if let Some(prev) = records.last() {
            let gap = timestamp - prev.timestamp;
            if gap <= 0 {
                bail!("{origin}:{line}: column timestamp: must increase (gap {gap}s)");
            }
            if records.len() == 1 {
                step = gap;
            } else if gap != step {
                bail!("{origin}:{line}: column timestamp: gap {gap}s breaks the uniform {step}s grid");
            }
        }
        records.push(WeatherRecord {
            timestamp,
            irradiance,
            temperature,
            wind_speed,
            relative_humidity,
            pv_power,
        });
    }
    if records.is_empty() {
        bail!("{origin}: no data rows");
    }
    // The loop already enforced everything Dataset::new checks, with better
    // diagnostics; a failure here would be a bug, not bad input.
    Dataset::new(records, step).with_context(|| format!("{origin}: validation failed"))
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let has_power = data.has_power();
    let mut out = String::new();
    out.push_str(if has_power { POWER_HEADER } else { BASE_HEADER });
    out.push('\n');
    for rec in data.records() {
        write!(
            out,
            "{},{},{},{},{}",
            rec.timestamp, rec.irradiance, rec.temperature, rec.wind_speed, rec.relative_humidity
        )
        .expect("string write");
        if let Some(p) = rec.pv_power {
            write!(out, ",{p}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Per-step forecast CSV. An `actual_power` column appears when the future
/// file carried measurements; a zero-step forecast is the header alone.
pub fn forecast_to_csv(timestamps: &[i64], predicted: &[f64], actual: Option<&[f64]>) -> String {
    let mut out = String::from(FORECAST_HEADER);
    if actual.is_some() {
        out.push_str(",actual_power");
    }
    out.push('\n');
    for (i, (ts, p)) in timestamps.iter().zip(predicted).enumerate() {
        write!(out, "{ts},{p}").expect("string write");
        if let Some(a) = actual {
            write!(out, ",{}", a[i]).expect("string write");
        }
        out.push('\n');
    }
    out
}
