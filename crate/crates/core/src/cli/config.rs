//! TOML experiment configuration. Physics keys carry their unit in the name
//! and have no defaults; analysis knobs default to documented values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{FitFamily, Parameterization, TimePolicy};
use crate::dynamics::{Averaging, PhaseMode};
use crate::error::{Error, Result};
use crate::model::DiagPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub run: RunSection,
    #[serde(default)]
    pub seeds: SeedSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Synthetic,
    Ingest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Registered model family applied to the base perturbation.
    pub family: String,
    pub levels_count: Option<usize>,
    pub delta_energy: Option<f64>,
    pub wavenumber_k: Option<f64>,
    pub g_exponent: Option<f64>,
    pub hbar: Option<f64>,
    pub gamma_cl_rate: Option<f64>,
    pub cutoff_bandwidth_levels: Option<f64>,
    pub c_norm: Option<f64>,
    /// Spectral floor of the band profile; defaults to `delta_energy / hbar`.
    pub omega_min_rate: Option<f64>,
    /// Level jitter in units of the spacing, in `[0, 1)`.
    pub level_jitter_spacing: Option<f64>,
    pub diagonal: Option<DiagPolicy>,
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub parameterization: Parameterization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DxGrid {
    Values(Vec<f64>),
    Linear { start: f64, step: f64, count: usize },
}

impl DxGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            DxGrid::Values(v) => v.clone(),
            DxGrid::Linear { start, step, count } => {
                (0..*count).map(|i| start + step * i as f64).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreparationSpec {
    Eigenstate {
        reference: usize,
    },
    /// Ensemble of central eigenstates (`run.references` of them).
    Eigenstates {
        #[serde(default)]
        averaging: Averaging,
    },
    Wavepacket {
        sigma_energy: f64,
        #[serde(default)]
        phase: PhaseMode,
        center_energy: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub dx_grid: DxGrid,
    pub preparation: PreparationSpec,
    /// Explicit time grid for `decay`; sweeps choose their own grids.
    pub t_max_time: Option<f64>,
    #[serde(default = "default_time_points")]
    pub time_points: usize,
    #[serde(default = "default_references")]
    pub references: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_fit_family")]
    pub fit_family: FitFamily,
    #[serde(default)]
    pub sweep_time: TimePolicy,
    /// Bin width of the factorization diagnostic; defaults to `2 * delta_energy`.
    pub bin_width_energy: Option<f64>,
    #[serde(default = "default_half_bins")]
    pub half_bins: usize,
}

fn default_time_points() -> usize {
    512
}
fn default_references() -> usize {
    20
}
fn default_realizations() -> usize {
    50
}
fn default_fit_family() -> FitFamily {
    FitFamily::Exponential
}
fn default_half_bins() -> usize {
    10
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub levels: Option<u64>,
    pub perturbation: Option<u64>,
    pub randomize: Option<u64>,
    pub wavepacket: Option<u64>,
}

/// Every seed resolved; written to the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub levels: u64,
    pub perturbation: u64,
    pub randomize: u64,
    pub wavepacket: u64,
}

impl SeedSection {
    /// Fills missing seeds from OS entropy.
    pub fn resolve(&self) -> Seeds {
        let pick = |s: Option<u64>| s.unwrap_or_else(rand::random);
        Seeds {
            levels: pick(self.levels),
            perturbation: pick(self.perturbation),
            randomize: pick(self.randomize),
            wavepacket: pick(self.wavepacket),
        }
    }
}

impl From<Seeds> for SeedSection {
    fn from(s: Seeds) -> Self {
        Self {
            levels: Some(s.levels),
            perturbation: Some(s.perturbation),
            randomize: Some(s.randomize),
            wavepacket: Some(s.wavepacket),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("runs"),
        }
    }
}

/// Physics parameters of a synthetic model after validation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPhysics {
    pub levels_count: usize,
    pub delta_energy: f64,
    pub wavenumber_k: f64,
    pub g_exponent: f64,
    pub hbar: f64,
    pub gamma_cl_rate: f64,
    /// Absent for families without a band cutoff.
    pub cutoff_bandwidth_levels: Option<f64>,
    pub c_norm: f64,
    pub omega_min_rate: f64,
    pub level_jitter_spacing: f64,
    pub diagonal: DiagPolicy,
}

fn required<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("model.{key} is required")))
}

fn positive(value: f64, key: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config(format!(
            "model.{key} must be positive and finite, got {value}"
        )))
    }
}

impl ModelSection {
    pub fn synthetic_physics(&self) -> Result<SyntheticPhysics> {
        let delta = positive(required(self.delta_energy, "delta_energy")?, "delta_energy")?;
        let hbar = positive(required(self.hbar, "hbar")?, "hbar")?;
        let g = required(self.g_exponent, "g_exponent")?;
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::Config(format!(
                "model.g_exponent must lie in [0, 1], got {g}"
            )));
        }
        let n = required(self.levels_count, "levels_count")?;
        if n < 2 {
            return Err(Error::Config(
                "model.levels_count must be at least 2".into(),
            ));
        }
        let jitter = self.level_jitter_spacing.unwrap_or(0.0);
        if !(0.0..1.0).contains(&jitter) {
            return Err(Error::Config(format!(
                "model.level_jitter_spacing must lie in [0, 1), got {jitter}"
            )));
        }
        Ok(SyntheticPhysics {
            levels_count: n,
            delta_energy: delta,
            wavenumber_k: positive(required(self.wavenumber_k, "wavenumber_k")?, "wavenumber_k")?,
            g_exponent: g,
            hbar,
            gamma_cl_rate: positive(
                required(self.gamma_cl_rate, "gamma_cl_rate")?,
                "gamma_cl_rate",
            )?,
            cutoff_bandwidth_levels: match self.cutoff_bandwidth_levels {
                Some(b) => Some(positive(b, "cutoff_bandwidth_levels")?),
                None if self.family_needs_cutoff() => {
                    return Err(Error::Config(
                        "model.cutoff_bandwidth_levels is required".into(),
                    ))
                }
                None => None,
            },
            c_norm: positive(required(self.c_norm, "c_norm")?, "c_norm")?,
            omega_min_rate: positive(
                self.omega_min_rate.unwrap_or(delta / hbar),
                "omega_min_rate",
            )?,
            level_jitter_spacing: jitter,
            diagonal: self.diagonal.unwrap_or_default(),
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| Error::Config(e.message().to_string() + &span_hint(&e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path`; relative model paths resolve against the config directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(p) = &cfg.model.path {
            if p.is_relative() {
                cfg.model.path = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.model.kind {
            ModelKind::Synthetic => {
                self.model.synthetic_physics()?;
            }
            ModelKind::Ingest => {
                if self.model.path.is_none() {
                    return Err(Error::Config(
                        "model.path is required for kind = \"ingest\"".into(),
                    ));
                }
            }
        }
        if self.model.cutoff_bandwidth_levels.is_none() && self.model.family_needs_cutoff() {
            return Err(Error::Config(
                "model.cutoff_bandwidth_levels is required".into(),
            ));
        }
        let grid = self.run.dx_grid.values();
        if grid.is_empty() || grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config(
                "run.dx_grid must hold finite nonnegative values".into(),
            ));
        }
        if let Some(t) = self.run.t_max_time {
            positive(t, "t_max_time")
                .map_err(|_| Error::Config("run.t_max_time must be positive".into()))?;
        }
        if let PreparationSpec::Wavepacket { sigma_energy, .. } = &self.run.preparation {
            if !(*sigma_energy > 0.0) {
                return Err(Error::Config(
                    "run.preparation.sigma_energy must be positive".into(),
                ));
            }
        }
        if self.run.time_points < 2 {
            return Err(Error::Config("run.time_points must be at least 2".into()));
        }
        Ok(())
    }

    pub fn check_paths(&self) -> Result<()> {
        if let Some(p) = &self.model.path {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "model.path {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }
}

impl ModelSection {
    fn family_needs_cutoff(&self) -> bool {
        matches!(self.family.as_str(), "mbh" | "rmbh")
    }
}

fn span_hint(e: &toml::de::Error) -> String {
    e.span()
        .map(|s| format!(" (at byte {})", s.start))
        .unwrap_or_default()
}
