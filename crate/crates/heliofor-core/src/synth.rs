//! Synthetic photovoltaic plant generator. Produces a full weather +
//! power dataset from a handful of physical knobs, with every random
//! draw tied to a named substream of one seed so regeneration is exact.
//!
//! The model is deliberately simple but physically shaped:
//!
//! - Clear-sky irradiance is a half-sine between sunrise and sunset whose
//!   peak and day length swing over the year.
//! - Cloud cover is an AR(1) latent process squashed through a sigmoid,
//!   multiplying irradiance by a factor in (0, 1].
//! - Temperature carries a seasonal term, a diurnal term peaked in the
//!   early afternoon, and noise. Cell temperature adds 0.03 degrees per
//!   W/m² of irradiance.
//! - Humidity anti-correlates with temperature; wind is folded Gaussian
//!   and independent of everything else (a deliberate zero-importance
//!   feature for ranking checks).
//! - Power follows the irradiance-temperature model
//!   rated * efficiency * (G / 1000) * (1 - coeff * (T_cell - 25)),
//!   scaled by a multiplicative drift factor so nights stay at exactly
//!   zero watts. The drift is itself AR(1) (soiling, haze residue,
//!   inverter derating episodes lasting hours rather than one step), so
//!   recent power readings carry predictive information that the weather
//!   columns do not; models with access to lagged power can remove most
//!   of the drift, models without it cannot.
//!
//! Time is measured from the start of the series: the first record sits at
//! local midnight by construction and `start_timestamp` is only a label.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::data::{Dataset, WeatherRecord, FEATURE_NAMES};
use crate::float;
use crate::linear::FeatureRanking;
use crate::rng;
use crate::{Error, Result};

const SECONDS_PER_DAY: i64 = 86400;
const DAYS_PER_YEAR: f64 = 365.0;
const TAU: f64 = 2.0 * core::f64::consts::PI;

/// Stationary standard deviation of the multiplicative power drift.
const POWER_DRIFT_STD: f64 = 0.07;
/// AR(1) coefficient of the power drift; a deviation decays over roughly
/// 1 / (1 - ρ) = 50 steps, a multi-hour episode at the default step.
const POWER_DRIFT_PERSISTENCE: f64 = 0.98;

/// Physical description of the simulated plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantSpec {
    /// Nameplate rating in watts.
    pub rated_power: f64,
    /// System efficiency in (0, 1].
    pub efficiency: f64,
    /// Fractional power loss per degree of cell temperature above 25 C.
    pub temp_coeff: f64,
    /// Shifts the seasonal cycle; 0 peaks mid-year.
    pub latitude_phase: f64,
    pub noise_seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            rated_power: 100_000.0,
            efficiency: 0.9,
            temp_coeff: 0.004,
            latitude_phase: 0.0,
            noise_seed: 7,
        }
    }
}

/// Sampling window and weather-process knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Unix timestamp label for the first record.
    pub start_timestamp: i64,
    pub days: usize,
    /// Must divide a day exactly.
    pub step_seconds: i64,
    /// AR(1) coefficient of the cloud latent process, in [0, 1).
    pub cloud_persistence: f64,
    /// Maximum fraction of irradiance the clouds remove, in [0, 1].
    pub cloud_depth: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start_timestamp: 1_672_531_200, // 2023-01-01T00:00:00Z
            days: 365,
            step_seconds: 300,
            cloud_persistence: 0.95,
            cloud_depth: 0.6,
        }
    }
}

fn validate(spec: &PlantSpec, cfg: &SynthConfig) -> Result<()> {
    if !(spec.rated_power > 0.0 && spec.rated_power.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "rated_power",
            reason: "must be positive and finite".to_string(),
        });
    }
    if !(spec.efficiency > 0.0 && spec.efficiency <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "efficiency",
            reason: "must lie in (0, 1]".to_string(),
        });
    }
    if !(spec.temp_coeff >= 0.0 && spec.temp_coeff.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "temp_coeff",
            reason: "must be nonnegative and finite".to_string(),
        });
    }
    if !spec.latitude_phase.is_finite() {
        return Err(Error::InvalidParameter {
            name: "latitude_phase",
            reason: "must be finite".to_string(),
        });
    }
    if cfg.days == 0 {
        return Err(Error::InvalidParameter {
            name: "days",
            reason: "must be at least 1".to_string(),
        });
    }
    if cfg.step_seconds <= 0 || SECONDS_PER_DAY % cfg.step_seconds != 0 {
        return Err(Error::InvalidParameter {
            name: "step_seconds",
            reason: "must be positive and divide 86400 exactly".to_string(),
        });
    }
    if !(0.0..1.0).contains(&cfg.cloud_persistence) {
        return Err(Error::InvalidParameter {
            name: "cloud_persistence",
            reason: "must lie in [0, 1)".to_string(),
        });
    }
    if !(0.0..=1.0).contains(&cfg.cloud_depth) {
        return Err(Error::InvalidParameter {
            name: "cloud_depth",
            reason: "must lie in [0, 1]".to_string(),
        });
    }
    Ok(())
}

/// Generates the full dataset, power column included. Bit-identical for
/// identical inputs.
pub fn generate(spec: &PlantSpec, cfg: &SynthConfig) -> Result<Dataset> {
    validate(spec, cfg)?;
    let steps_per_day = (SECONDS_PER_DAY / cfg.step_seconds) as usize;
    let n = cfg.days * steps_per_day;

    // One substream per noise source keeps the processes independent and
    // insensitive to each other's draw counts.
    let mut cloud_rng = rng::stream(spec.noise_seed, 0);
    let mut temp_rng = rng::stream(spec.noise_seed, 1);
    let mut humidity_rng = rng::stream(spec.noise_seed, 2);
    let mut wind_rng = rng::stream(spec.noise_seed, 3);
    let mut power_rng = rng::stream(spec.noise_seed, 4);

    let rho = cfg.cloud_persistence;
    let innovation_scale = float::sqrt(1.0 - rho * rho);
    let mut cloud_latent = 0.0;

    let drift_rho = POWER_DRIFT_PERSISTENCE;
    let drift_innovation = float::sqrt(1.0 - drift_rho * drift_rho);
    let mut power_drift = 0.0;

    let mut records = Vec::with_capacity(n);
    for k in 0..n {
        let elapsed = k as i64 * cfg.step_seconds;
        let day = (elapsed / SECONDS_PER_DAY) as f64;
        let hour = (elapsed % SECONDS_PER_DAY) as f64 / 3600.0;
        let theta = TAU * day / DAYS_PER_YEAR + spec.latitude_phase;

        let daylight = 12.0 + 3.0 * float::sin(theta);
        let sunrise = 12.0 - daylight / 2.0;
        let sunset = 12.0 + daylight / 2.0;
        let peak = 1000.0 * (0.8 + 0.2 * float::sin(theta));
        let clear_sky = if hour > sunrise && hour < sunset {
            peak * float::sin(core::f64::consts::PI * (hour - sunrise) / daylight)
        } else {
            0.0
        };

        cloud_latent = rho * cloud_latent + innovation_scale * rng::normal(&mut cloud_rng, 0.0, 1.0);
        let attenuation = 1.0 - cfg.cloud_depth * float::sigmoid(1.5 * cloud_latent);
        let irradiance = clear_sky * attenuation;

        let temperature = 15.0
            + 10.0 * float::sin(theta)
            + 5.0 * float::sin(TAU * (hour - 9.0) / 24.0)
            + rng::normal(&mut temp_rng, 0.0, 0.5);

        let humidity_raw =
            70.0 - 1.2 * (temperature - 15.0) + rng::normal(&mut humidity_rng, 0.0, 3.0);
        let relative_humidity = humidity_raw.clamp(0.0, 100.0);

        let wind_speed = float::abs(rng::normal(&mut wind_rng, 3.0, 1.5));

        let cell_temp = temperature + 0.03 * irradiance;
        // Multiplicative drift keeps night power at exactly zero; its
        // AR(1) state evolves through the night even while invisible.
        power_drift = drift_rho * power_drift
            + drift_innovation * rng::normal(&mut power_rng, 0.0, POWER_DRIFT_STD);
        let pv_power = (spec.rated_power
            * spec.efficiency
            * (irradiance / 1000.0)
            * (1.0 - spec.temp_coeff * (cell_temp - 25.0))
            * (1.0 + power_drift))
            .max(0.0);

        records.push(WeatherRecord {
            timestamp: cfg.start_timestamp + elapsed,
            irradiance,
            temperature,
            wind_speed,
            relative_humidity,
            pv_power: Some(pv_power),
        });
    }
    Dataset::new(records, cfg.step_seconds)
}

/// The importance the generator actually encodes, for checking rankers
/// against a known answer. Power depends on irradiance with relative
/// sensitivity 1 and on temperature (through the cell-temperature
/// derating) with relative sensitivity temp_coeff * 25 at typical swings;
/// wind and humidity never enter the power equation. Values are
/// normalized to sum to 1.
pub fn ground_truth_importance(spec: &PlantSpec) -> FeatureRanking {
    let raw = [1.0, spec.temp_coeff * 25.0, 0.0, 0.0];
    let total: f64 = raw.iter().sum();
    let mut entries: Vec<(alloc::string::String, f64)> = FEATURE_NAMES
        .iter()
        .zip(raw)
        .map(|(name, v)| (name.to_string(), v / total))
        .collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    FeatureRanking {
        entries,
        no_signal: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            days: 3,
            step_seconds: 900,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generation_is_bit_identical_across_runs() {
        let spec = PlantSpec::default();
        let cfg = small_cfg();
        let a = generate(&spec, &cfg).unwrap();
        let b = generate(&spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn record_count_matches_days_times_steps() {
        let spec = PlantSpec::default();
        let a = generate(&spec, &small_cfg()).unwrap();
        assert_eq!(a.len(), 3 * 96);

        let year = SynthConfig::default();
        let steps = (86400 / year.step_seconds) as usize * year.days;
        assert_eq!(steps, 105_120);
    }

    #[test]
    fn night_power_is_exactly_zero() {
        let data = generate(&PlantSpec::default(), &small_cfg()).unwrap();
        let mut nights = 0;
        for rec in data.records() {
            if rec.irradiance == 0.0 {
                nights += 1;
                assert_eq!(rec.pv_power, Some(0.0));
            }
        }
        assert!(nights > 0);
    }

    #[test]
    fn physical_ranges_hold_over_a_year() {
        let spec = PlantSpec::default();
        let cfg = SynthConfig {
            days: 30,
            ..SynthConfig::default()
        };
        let data = generate(&spec, &cfg).unwrap();
        let ceiling = spec.rated_power * 1.5;
        for rec in data.records() {
            assert!(rec.irradiance >= 0.0 && rec.irradiance < 1300.0);
            assert!((0.0..=100.0).contains(&rec.relative_humidity));
            assert!(rec.wind_speed >= 0.0);
            let p = rec.pv_power.unwrap();
            assert!(p >= 0.0 && p < ceiling);
        }
    }

    #[test]
    fn timestamps_stride_the_configured_step() {
        let data = generate(&PlantSpec::default(), &small_cfg()).unwrap();
        let recs = data.records();
        assert_eq!(recs[0].timestamp, SynthConfig::default().start_timestamp);
        for w in recs.windows(2) {
            assert_eq!(w[1].timestamp - w[0].timestamp, 900);
        }
    }

    #[test]
    fn power_tracks_irradiance_in_daylight() {
        let data = generate(&PlantSpec::default(), &SynthConfig::default()).unwrap();
        let pairs: Vec<(f64, f64)> = data
            .records()
            .iter()
            .filter(|r| r.irradiance > 0.0)
            .map(|r| (r.irradiance, r.pv_power.unwrap()))
            .collect();
        assert!(pairs.len() > 10_000);
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in &pairs {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / libm::sqrt(sxx * syy);
        assert!(r > 0.9, "daylight correlation {r}");
    }

    #[test]
    fn zero_cloud_depth_removes_the_cloud_process_entirely() {
        let spec = PlantSpec::default();
        let mut a_cfg = small_cfg();
        a_cfg.cloud_depth = 0.0;
        a_cfg.cloud_persistence = 0.0;
        let mut b_cfg = small_cfg();
        b_cfg.cloud_depth = 0.0;
        b_cfg.cloud_persistence = 0.9;
        let a = generate(&spec, &a_cfg).unwrap();
        let b = generate(&spec, &b_cfg).unwrap();
        for (ra, rb) in a.records().iter().zip(b.records()) {
            assert_eq!(ra.irradiance, rb.irradiance);
        }
    }

    #[test]
    fn cloud_depth_reduces_mean_irradiance() {
        let spec = PlantSpec::default();
        let clear_cfg = SynthConfig {
            cloud_depth: 0.0,
            ..small_cfg()
        };
        let cloudy_cfg = SynthConfig {
            cloud_depth: 0.9,
            ..small_cfg()
        };
        let mean = |d: &Dataset| {
            d.records().iter().map(|r| r.irradiance).sum::<f64>() / d.len() as f64
        };
        let clear = generate(&spec, &clear_cfg).unwrap();
        let cloudy = generate(&spec, &cloudy_cfg).unwrap();
        assert!(mean(&cloudy) < mean(&clear));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let spec = PlantSpec::default();
        let mut cfg = small_cfg();
        cfg.step_seconds = 7;
        assert!(matches!(
            generate(&spec, &cfg),
            Err(Error::InvalidParameter {
                name: "step_seconds",
                ..
            })
        ));

        let mut bad_spec = spec;
        bad_spec.efficiency = 0.0;
        assert!(generate(&bad_spec, &small_cfg()).is_err());

        let mut bad_days = small_cfg();
        bad_days.days = 0;
        assert!(generate(&spec, &bad_days).is_err());

        let mut bad_rho = small_cfg();
        bad_rho.cloud_persistence = 1.0;
        assert!(generate(&spec, &bad_rho).is_err());
    }

    #[test]
    fn ground_truth_ranks_irradiance_first() {
        let ranking = ground_truth_importance(&PlantSpec::default());
        assert_eq!(ranking.entries[0].0, "irradiance");
        assert!(!ranking.no_signal);
        let total: f64 = ranking.entries.iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let by_name = |n: &str| ranking.entries.iter().find(|e| e.0 == n).unwrap().1;
        assert_eq!(by_name("wind_speed"), 0.0);
        assert_eq!(by_name("relative_humidity"), 0.0);
        assert!(by_name("temperature") > 0.0);

        let flat = ground_truth_importance(&PlantSpec {
            temp_coeff: 0.0,
            ..PlantSpec::default()
        });
        assert_eq!(flat.entries[0], ("irradiance".to_string(), 1.0));
        assert_eq!(flat.entries.iter().map(|e| e.1).sum::<f64>(), 1.0);
    }
}
