//! Run configuration.
//!
//! One TOML file drives every command. Every key has a default, so an empty
//! file (or no `--config` at all) is a complete, runnable configuration;
//! unknown keys are rejected rather than ignored. Per-stage seeds left unset
//! derive from the global `seed`, so one number pins the whole run while any
//! stage can still be re-seeded independently.
//!
//! The config hash reported by every command is the SHA-256 of the resolved
//! modeling configuration (defaults filled in, seeds derived). Filesystem
//! paths are excluded: moving outputs around does not change the experiment
//! identity.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use heliofor_core::hybrid::PipelineConfig;
use heliofor_core::lstm::{HeadActivation, LstmConfig};
use heliofor_core::narx::NarxConfig;
use heliofor_core::rng;
use heliofor_core::synth::{PlantSpec, SynthConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

// Salts for deriving stage seeds from the global seed.
const SALT_SYNTH: u64 = 1;
const SALT_NARX: u64 = 2;
const SALT_LSTM: u64 = 3;
const SALT_SEARCH: u64 = 4;

/// TOML integers are signed 64-bit, so this is the largest seed a config
/// file can hold.
const TOML_SEED_MAX: u64 = i64::MAX as u64;

/// Stage seed from the global seed. Masked into the TOML integer range so
/// a derived seed printed in a report pastes straight back into a config.
fn derive_seed(seed: u64, salt: u64) -> u64 {
    rng::mix(seed, salt) & TOML_SEED_MAX
}

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed. Every per-stage seed left unset derives from it.
    pub seed: u64,
    pub paths: PathsSection,
    pub synth: SynthSection,
    pub narx: NarxSection,
    pub lstm: LstmSection,
    pub pipeline: PipelineSection,
    pub search: SearchSection,
    pub cv: CvSection,
    pub forecast: ForecastSection,
    pub importance: ImportanceSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            paths: PathsSection::default(),
            synth: SynthSection::default(),
            narx: NarxSection::default(),
            lstm: LstmSection::default(),
            pipeline: PipelineSection::default(),
            search: SearchSection::default(),
            cv: CvSection::default(),
            forecast: ForecastSection::default(),
            importance: ImportanceSection::default(),
        }
    }
}

/// Input and output locations. Command-line flags override these; commands
/// that need an input not set in either place fail up front.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub out_dir: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub future: Option<PathBuf>,
}

/// Synthetic plant and weather generator. Defaults describe a 100 kW plant
/// sampled every 5 minutes for a year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub rated_power: f64,
    pub efficiency: f64,
    pub temp_coeff: f64,
    pub latitude_phase: f64,
    /// Default: derived from the global seed.
    pub noise_seed: Option<u64>,
    pub start_timestamp: i64,
    pub days: usize,
    pub step_seconds: i64,
    pub cloud_persistence: f64,
    pub cloud_depth: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let spec = PlantSpec::default();
        let cfg = SynthConfig::default();
        SynthSection {
            rated_power: spec.rated_power,
            efficiency: spec.efficiency,
            temp_coeff: spec.temp_coeff,
            latitude_phase: spec.latitude_phase,
            noise_seed: None,
            start_timestamp: cfg.start_timestamp,
            days: cfg.days,
            step_seconds: cfg.step_seconds,
            cloud_persistence: cfg.cloud_persistence,
            cloud_depth: cfg.cloud_depth,
        }
    }
}

impl SynthSection {
    pub fn plant_spec(&self) -> PlantSpec {
        PlantSpec {
            rated_power: self.rated_power,
            efficiency: self.efficiency,
            temp_coeff: self.temp_coeff,
            latitude_phase: self.latitude_phase,
            noise_seed: self.noise_seed.expect("seeds resolved"),
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            start_timestamp: self.start_timestamp,
            days: self.days,
            step_seconds: self.step_seconds,
            cloud_persistence: self.cloud_persistence,
            cloud_depth: self.cloud_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NarxSection {
    pub d_u: usize,
    pub d_y: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Default: derived from the global seed.
    pub seed: Option<u64>,
}

impl Default for NarxSection {
    fn default() -> Self {
        let c = NarxConfig::default();
        NarxSection {
            d_u: c.d_u,
            d_y: c.d_y,
            hidden_units: c.hidden_units,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            batch_size: c.batch_size,
            seed: None,
        }
    }
}

impl NarxSection {
    pub fn narx_config(&self) -> NarxConfig {
        NarxConfig {
            d_u: self.d_u,
            d_y: self.d_y,
            hidden_units: self.hidden_units,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed.expect("seeds resolved"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmSection {
    pub hidden_size: usize,
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub sequence_length: usize,
    /// `"linear"` or `"sigmoid"`.
    pub head: String,
    pub forget_bias: f64,
    /// Default: derived from the global seed.
    pub seed: Option<u64>,
}

impl Default for LstmSection {
    fn default() -> Self {
        let c = LstmConfig::default();
        LstmSection {
            hidden_size: c.hidden_size,
            layers: c.layers,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            momentum: c.momentum,
            batch_size: c.batch_size,
            sequence_length: c.sequence_length,
            head: "linear".to_string(),
            forget_bias: c.forget_bias,
            seed: None,
        }
    }
}

impl LstmSection {
    pub fn lstm_config(&self) -> Result<LstmConfig> {
        let head = match self.head.as_str() {
            "linear" => HeadActivation::Linear,
            "sigmoid" => HeadActivation::Sigmoid,
            other => bail!("config: lstm.head must be \"linear\" or \"sigmoid\", got \"{other}\""),
        };
        Ok(LstmConfig {
            hidden_size: self.hidden_size,
            layers: self.layers,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            sequence_length: self.sequence_length,
            head,
            forget_bias: self.forget_bias,
            seed: self.seed.expect("seeds resolved"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    /// Leading fraction of rows used for training; the rest is the test
    /// window.
    pub train_fraction: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            train_fraction: PipelineConfig::default().train_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    /// Randomized-search draws granted to each model in `compare`.
    pub budget: usize,
    /// Default: derived from the global seed.
    pub seed: Option<u64>,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            budget: 20,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    /// Fold count for `evaluate`; 0 disables cross-validation.
    pub k: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection { k: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSection {
    /// Step cap for `forecast`; unset means every row of the future file.
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImportanceSection {
    pub lambda: f64,
    pub l1_ratio: f64,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        ImportanceSection {
            lambda: 0.1,
            l1_ratio: 0.5,
        }
    }
}

/// The stage seeds after resolution, for report headers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSet {
    pub global: u64,
    pub synth: u64,
    pub narx: u64,
    pub lstm: u64,
    pub search: u64,
}

impl RunConfig {
    /// Reads a config file, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    /// Fills every unset stage seed from the global seed. Idempotent;
    /// explicit seeds are left alone.
    pub fn resolve_seeds(&mut self) -> Result<()> {
        let s = self.seed;
        if s > TOML_SEED_MAX {
            bail!("config: seed {s} exceeds the TOML integer range (max {TOML_SEED_MAX})");
        }
        self.synth.noise_seed.get_or_insert(derive_seed(s, SALT_SYNTH));
        self.narx.seed.get_or_insert(derive_seed(s, SALT_NARX));
        self.lstm.seed.get_or_insert(derive_seed(s, SALT_LSTM));
        self.search.seed.get_or_insert(derive_seed(s, SALT_SEARCH));
        Ok(())
    }

    /// Panics if called before [`resolve_seeds`].
    pub fn seed_set(&self) -> SeedSet {
        SeedSet {
            global: self.seed,
            synth: self.synth.noise_seed.expect("seeds resolved"),
            narx: self.narx.seed.expect("seeds resolved"),
            lstm: self.lstm.seed.expect("seeds resolved"),
            search: self.search.seed.expect("seeds resolved"),
        }
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            narx: self.narx.narx_config(),
            lstm: self.lstm.lstm_config()?,
            train_fraction: self.pipeline.train_fraction,
        })
    }

    /// Canonical TOML of the resolved modeling configuration. Key order is
    /// the struct order, so the text (and its hash) is stable.
    pub fn canonical_toml(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            seed: u64,
            synth: &'a SynthSection,
            narx: &'a NarxSection,
            lstm: &'a LstmSection,
            pipeline: &'a PipelineSection,
            search: &'a SearchSection,
            cv: &'a CvSection,
            forecast: &'a ForecastSection,
            importance: &'a ImportanceSection,
        }
        toml::to_string(&Canonical {
            seed: self.seed,
            synth: &self.synth,
            narx: &self.narx,
            lstm: &self.lstm,
            pipeline: &self.pipeline,
            search: &self.search,
            cv: &self.cv,
            forecast: &self.forecast,
            importance: &self.importance,
        })
        .expect("static schema serializes")
    }

    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write as _;
            write!(hex, "{byte:02x}").expect("string write");
        }
        hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_equals_defaults() {
        let parsed: RunConfig = toml::from_str("").unwrap();
        assert_eq!(parsed, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = toml::from_str::<RunConfig>("mystery = 1\n");
        assert!(top.unwrap_err().to_string().contains("mystery"));
        let nested = toml::from_str::<RunConfig>("[narx]\nd_u = 4\nwhat = 1\n");
        assert!(nested.unwrap_err().to_string().contains("what"));
    }

    #[test]
    fn stage_seeds_derive_from_the_global_seed() {
        let mut cfg = RunConfig::default();
        cfg.seed = 11;
        cfg.lstm.seed = Some(42);
        cfg.resolve_seeds().unwrap();
        let seeds = cfg.seed_set();
        assert_eq!(seeds.lstm, 42, "explicit seed overridden");
        assert_eq!(seeds.narx, derive_seed(11, SALT_NARX));
        assert_eq!(seeds.synth, derive_seed(11, SALT_SYNTH));
        assert_eq!(seeds.search, derive_seed(11, SALT_SEARCH));
        let all = [seeds.global, seeds.synth, seeds.narx, seeds.lstm, seeds.search];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j], "stage seeds collide");
            }
            assert!(all[i] <= TOML_SEED_MAX, "seed escapes the TOML range");
        }
    }

    #[test]
    fn resolution_is_idempotent_and_bounds_checked() {
        let mut a = RunConfig::default();
        a.resolve_seeds().unwrap();
        let mut b = a.clone();
        b.resolve_seeds().unwrap();
        assert_eq!(a, b);
        let mut huge = RunConfig::default();
        huge.seed = u64::MAX;
        let err = huge.resolve_seeds().unwrap_err().to_string();
        assert!(err.contains("TOML integer range"), "{err}");
    }

    #[test]
    fn hash_ignores_paths_but_not_parameters() {
        let mut a = RunConfig::default();
        a.resolve_seeds().unwrap();
        let mut b = a.clone();
        b.paths.out_dir = Some(PathBuf::from("elsewhere"));
        assert_eq!(a.sha256_hex(), b.sha256_hex());
        let mut c = a.clone();
        c.narx.epochs += 1;
        assert_ne!(a.sha256_hex(), c.sha256_hex());
        assert_eq!(a.sha256_hex().len(), 64);
    }

    #[test]
    fn head_names_map_to_activations() {
        let mut cfg = RunConfig::default();
        cfg.resolve_seeds().unwrap();
        cfg.lstm.head = "sigmoid".to_string();
        assert_eq!(cfg.lstm.lstm_config().unwrap().head, HeadActivation::Sigmoid);
        cfg.lstm.head = "softmax".to_string();
        let err = cfg.lstm.lstm_config().unwrap_err().to_string();
        assert!(err.contains("\"linear\" or \"sigmoid\""), "{err}");
    }

    #[test]
    fn sections_map_onto_core_configs() {
        let mut cfg = RunConfig::default();
        cfg.resolve_seeds().unwrap();
        let narx = cfg.narx.narx_config();
        assert_eq!(
            (narx.d_u, narx.d_y, narx.hidden_units, narx.epochs),
            (4, 2, 12, 60)
        );
        let pipeline = cfg.pipeline_config().unwrap();
        assert_eq!(pipeline.train_fraction, 0.8);
        let spec = cfg.synth.plant_spec();
        assert_eq!(spec.rated_power, 100_000.0);
        assert_eq!(cfg.synth.synth_config().days, 365);
    }
}
