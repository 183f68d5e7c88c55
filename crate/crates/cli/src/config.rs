use std::path::{Path, PathBuf};

use mvlevy::coefficient::CoefficientSpec;
use mvlevy::consistency::CompareSetup;
use mvlevy::fractional_fp::{FpOptions, GaussianBump};
use mvlevy::particles::{InitialLaw, SimulationConfig};
use mvlevy::variation_checks::H1Grids;
use serde::{Deserialize, Serialize};

/// One file drives every subcommand; each reads only its own sections.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chaos: Option<ChaosSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h1: Option<H1Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjoint: Option<AdjointSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub kde_half_width: f64,
    pub kde_points: usize,
    /// Frequencies for the characteristic-function check of the final marginal.
    pub cf_xis: Vec<f64>,
    /// Defaults to `5/√n`.
    pub cf_tolerance: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            kde_half_width: 10.0,
            kde_points: 512,
            cf_xis: vec![0.25, 0.5, 1.0, 2.0],
            cf_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSection {
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub n_ref: usize,
    #[serde(default)]
    pub max_slope: Option<f64>,
    #[serde(default)]
    pub require_monotone: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub alpha: f64,
    #[serde(default = "one")]
    pub k_prime: f64,
    pub sigma: CoefficientSpec,
    pub initial_law: InitialLaw,
    pub half_width: f64,
    pub grid_points: usize,
    pub horizon: f64,
    /// Defaults to 0.9 of the stability bound at `t = 0`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub options: FpOptions,
    /// Runs the constant-σ comparison against the exact solution for these α.
    #[serde(default)]
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub alphas: Vec<f64>,
    /// Defaults to 0.9 of each α's stability bound.
    #[serde(default)]
    pub dt: Option<f64>,
    pub max_error: f64,
    #[serde(default = "ratio_window")]
    pub ratio_window: (f64, f64),
}

fn one() -> f64 {
    1.0
}

fn ratio_window() -> (f64, f64) {
    (12.0, 20.0)
}

/// The setup keys plus the pass criteria, side by side in one table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareSection {
    #[serde(flatten)]
    pub setup: CompareSetup,
    pub max_final_l1: Option<f64>,
    pub require_decreasing: bool,
}

// `flatten` would let unknown keys through, so split the table by hand.
impl<'de> Deserialize<'de> for CompareSection {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let mut table = toml::Table::deserialize(d)?;
        let max_final_l1 = match table.remove("max_final_l1") {
            Some(v) => Some(v.try_into().map_err(D::Error::custom)?),
            None => None,
        };
        let require_decreasing = match table.remove("require_decreasing") {
            Some(v) => v.try_into().map_err(D::Error::custom)?,
            None => false,
        };
        let setup = toml::Value::Table(table).try_into().map_err(D::Error::custom)?;
        Ok(Self {
            setup,
            max_final_l1,
            require_decreasing,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub alphas: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub dt: f64,
    pub draws: usize,
    pub xis: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H1Section {
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
    pub k1: f64,
    #[serde(default)]
    pub grids: H1Grids,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default)]
    pub empirical_gap: Option<EmpiricalGapSection>,
    #[serde(default)]
    pub vasdis: Option<VasdisSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalGapSection {
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub reference_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VasdisSection {
    pub pairs: usize,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjointSection {
    pub alpha: f64,
    /// `K` in the jump density `K|y|^{-1-α}`.
    #[serde(default = "one")]
    pub k: f64,
    pub half_width: f64,
    pub grid_points: usize,
    pub tolerance: f64,
    pub cases: Vec<AdjointCase>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjointCase {
    pub name: String,
    pub sigma: CoefficientSpec,
    pub nu: InitialLaw,
    pub phi: Vec<GaussianBump>,
    pub psi: Vec<GaussianBump>,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("AC1", include_str!("../presets/AC1.toml")),
    ("AC2", include_str!("../presets/AC2.toml")),
    ("AC3", include_str!("../presets/AC3.toml")),
    ("AC4", include_str!("../presets/AC4.toml")),
    ("AC5", include_str!("../presets/AC5.toml")),
    ("AC6", include_str!("../presets/AC6.toml")),
    ("AC7", include_str!("../presets/AC7.toml")),
    ("AC8", include_str!("../presets/AC8.toml")),
    ("AC9", include_str!("../presets/AC9.toml")),
    ("AC10", include_str!("../presets/AC10.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, t)| *t)
}

pub fn parse(text: &str, origin: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(text).map_err(|e| format!("{origin}: {e}"))
}

pub fn load(config: Option<&Path>, preset: Option<&str>) -> Result<ExperimentConfig, String> {
    match (config, preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse(&text, &path.display().to_string())
        }
        (None, Some(name)) => {
            let text = preset_text(name).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                format!("unknown preset `{name}`; available: {}", names.join(", "))
            })?;
            parse(text, &format!("preset {name}"))
        }
        (Some(_), Some(_)) => Err("give either --config or --preset, not both".into()),
        (None, None) => Err("no configuration: pass --config <file> or --preset <AC1..AC10>".into()),
    }
}
