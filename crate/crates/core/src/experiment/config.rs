use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::ModelSpec;
use crate::scenery::{GeneratingSet, DEFAULT_DEPTH};

/// A run description. Sections other than `model` and `seed` are optional
/// and only read by the command that needs them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub seed: u64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub battery: BatteryConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub usm: UsmConfig,
    #[serde(default)]
    pub q: QConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    #[serde(default)]
    pub nonergodic: NonErgodicConfig,
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

/// Explicit generating sets, or a generated battery when `sets` is empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    #[serde(default)]
    pub sets: Vec<GeneratingSet>,
    #[serde(default = "default_battery_count")]
    pub count: usize,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
}

fn default_battery_count() -> usize {
    20
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig { sets: Vec::new(), count: default_battery_count(), max_depth: DEFAULT_DEPTH }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub length: usize,
    pub trajectories: usize,
    pub past_length: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { length: 1000, trajectories: 1, past_length: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsmConfig {
    pub trajectories: usize,
    /// Checkpoints run 100, 1000, .. up to and including this.
    pub max_n: usize,
    /// Gate on the battery error at the last checkpoint.
    pub tolerance: f64,
    /// Final distributions further apart than this mean no common limit.
    pub separation: f64,
}

impl Default for UsmConfig {
    fn default() -> Self {
        UsmConfig { trajectories: 1, max_n: 100_000, tolerance: 0.01, separation: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QConfig {
    pub samples: u64,
    pub scenery_n: usize,
    pub empirical_tolerance: f64,
    pub se_multiple: f64,
    /// Fraction of entries that must meet the Monte Carlo gate.
    pub min_pass_fraction: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig { samples: 100_000, scenery_n: 100_000, empirical_tolerance: 0.012, se_multiple: 4.0, min_pass_fraction: 0.95 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    pub n: usize,
    pub m: usize,
    pub set: Option<GeneratingSet>,
    pub mean_tolerance: f64,
    pub variance_tolerance: f64,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig { n: 10_000, m: 300, set: None, mean_tolerance: 0.1, variance_tolerance: 0.25 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub prefixes: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub depth: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { prefixes: 500, min_length: 1, max_length: 50, depth: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonErgodicConfig {
    pub trajectories: usize,
    pub n: usize,
    pub component_tolerance: f64,
    pub separation: f64,
}

impl Default for NonErgodicConfig {
    fn default() -> Self {
        NonErgodicConfig { trajectories: 50, n: 10_000, component_tolerance: 0.02, separation: 0.1 }
    }
}

/// Hex SHA-256 of the raw config bytes.
pub fn config_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Geometric checkpoints `100, 1000, ..` capped by `max_n`, which is always last.
pub fn checkpoints(max_n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 100;
    while n < max_n {
        out.push(n);
        n *= 10;
    }
    out.push(max_n);
    out
}
