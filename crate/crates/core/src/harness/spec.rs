//! TOML configuration files for the experiment runner and the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array_model::{ArrayConfig, ModelTag};
use crate::error::{JacError, Result};
use crate::estimators::JacConfig;

/// Array geometry as written in config files; spacing defaults to half a wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySpec {
    pub n_antennas: usize,
    pub carrier_hz: f64,
    pub spacing_m: Option<f64>,
    pub ideal_c: bool,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self { n_antennas: 200, carrier_hz: 30e9, spacing_m: None, ideal_c: true }
    }
}

impl ArraySpec {
    pub fn build(&self) -> Result<ArrayConfig> {
        match self.spacing_m {
            Some(d) => ArrayConfig::new(self.n_antennas, d, self.carrier_hz, self.ideal_c),
            None => ArrayConfig::half_wavelength(self.n_antennas, self.carrier_hz, self.ideal_c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    SnrDb,
    Snapshots,
    DistanceM,
    NAntennas,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::SnrDb => "snr_db",
            SweepVar::Snapshots => "snapshots",
            SweepVar::DistanceM => "distance_m",
            SweepVar::NAntennas => "n_antennas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    JacIsf,
    JacGd,
    MusicOnly,
    PolarGrid,
}

impl SweepMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMethod::JacIsf => "jac_isf",
            SweepMethod::JacGd => "jac_gd",
            SweepMethod::MusicOnly => "music_only",
            SweepMethod::PolarGrid => "polar_grid",
        }
    }
}

/// Whether each trial draws a fresh source position or all trials of a
/// sweep value share one (noise-only averaging).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PositionScope {
    #[default]
    PerTrial,
    PerValue,
}

/// Settings held constant across a sweep. A range field overrides the
/// matching scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedSpec {
    pub n_antennas: usize,
    pub carrier_hz: f64,
    pub ideal_c: bool,
    pub snapshots: usize,
    pub snr_db: f64,
    pub r_m: f64,
    pub r_range_m: Option<[f64; 2]>,
    pub theta_deg: f64,
    pub theta_range_deg: Option<[f64; 2]>,
    pub model: ModelTag,
}

impl Default for FixedSpec {
    fn default() -> Self {
        Self {
            n_antennas: 200,
            carrier_hz: 30e9,
            ideal_c: true,
            snapshots: 8,
            snr_db: 10.0,
            r_m: 20.0,
            r_range_m: None,
            theta_deg: 0.0,
            theta_range_deg: None,
            model: ModelTag::Exact,
        }
    }
}

/// Polar-grid baseline dictionary. `distance_points = 0` scales it with the
/// array as `max(1, N / 64)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolarGridSpec {
    pub angle_points: usize,
    pub distance_points: usize,
    pub r_min_m: f64,
    pub r_max_m: f64,
}

impl Default for PolarGridSpec {
    fn default() -> Self {
        Self { angle_points: 256, distance_points: 16, r_min_m: 3.0, r_max_m: 200.0 }
    }
}

impl PolarGridSpec {
    pub fn distance_points_for(&self, n_antennas: usize) -> usize {
        if self.distance_points == 0 {
            (n_antennas / 64).max(1)
        } else {
            self.distance_points
        }
    }
}

pub const DEFAULT_TRIALS: usize = 200;

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// A Monte-Carlo sweep over one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    #[serde(default)]
    pub fixed: FixedSpec,
    pub methods: Vec<SweepMethod>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub position_scope: PositionScope,
    #[serde(default)]
    pub estimator: JacConfig,
    #[serde(default)]
    pub polar_grid: PolarGridSpec,
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(JacError::InvalidConfig(format!("{name} must be an ordered finite pair, got {r:?}")));
    }
    Ok(())
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| JacError::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(JacError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(JacError::InvalidConfig("values must not be empty".into()));
        }
        if self.methods.is_empty() {
            return Err(JacError::InvalidConfig("methods must not be empty".into()));
        }
        for &v in &self.values {
            let ok = match self.sweep_var {
                SweepVar::SnrDb => !v.is_nan(),
                SweepVar::Snapshots => v >= 1.0 && v.fract() == 0.0,
                SweepVar::DistanceM => v > 0.0 && v.is_finite(),
                SweepVar::NAntennas => v >= 2.0 && v.fract() == 0.0,
            };
            if !ok {
                return Err(JacError::InvalidConfig(format!("invalid {} value {v}", self.sweep_var.name())));
            }
        }
        let f = &self.fixed;
        if let Some(r) = f.r_range_m {
            check_range("r_range_m", r)?;
            if r[0] <= 0.0 {
                return Err(JacError::InvalidConfig("r_range_m must be positive".into()));
            }
        } else if !(f.r_m > 0.0) {
            return Err(JacError::InvalidConfig(format!("r_m must be positive, got {}", f.r_m)));
        }
        let theta_ok = |t: f64| t.abs() < 90.0;
        if let Some(t) = f.theta_range_deg {
            check_range("theta_range_deg", t)?;
            if !(theta_ok(t[0]) && theta_ok(t[1])) {
                return Err(JacError::InvalidConfig("theta_range_deg must lie in (-90, 90)".into()));
            }
        } else if !theta_ok(f.theta_deg) {
            return Err(JacError::InvalidConfig(format!("theta_deg must lie in (-90, 90), got {}", f.theta_deg)));
        }
        if f.snapshots == 0 {
            return Err(JacError::InvalidConfig("snapshots must be at least 1".into()));
        }
        self.estimator.isf.validate()?;
        self.estimator.gd.validate()?;
        let g = &self.polar_grid;
        if g.angle_points == 0 || !(g.r_min_m > 0.0 && g.r_min_m < g.r_max_m) {
            return Err(JacError::InvalidConfig("invalid polar_grid settings".into()));
        }
        // build every array once so geometry errors surface before running
        for vi in 0..self.values.len() {
            let (cfg, _, _) = self.point(vi)?;
            self.estimator.music.validate(cfg.n_antennas)?;
        }
        Ok(())
    }

    /// Array, snapshot count and SNR at sweep value `vi`.
    pub fn point(&self, vi: usize) -> Result<(ArrayConfig, usize, f64)> {
        let v = self.values[vi];
        let f = &self.fixed;
        let n = if self.sweep_var == SweepVar::NAntennas { v as usize } else { f.n_antennas };
        let t = if self.sweep_var == SweepVar::Snapshots { v as usize } else { f.snapshots };
        let snr = if self.sweep_var == SweepVar::SnrDb { v } else { f.snr_db };
        Ok((ArrayConfig::half_wavelength(n, f.carrier_hz, f.ideal_c)?, t, snr))
    }
}

/// Settings for `jac simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub array: ArraySpec,
    pub snapshots: usize,
    pub snr_db: f64,
    pub r_m: f64,
    pub theta_deg: f64,
    pub model: ModelTag,
    pub seed: u64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            array: ArraySpec::default(),
            snapshots: 4,
            snr_db: 10.0,
            r_m: 20.0,
            theta_deg: 30.0,
            model: ModelTag::Exact,
            seed: 0,
        }
    }
}

/// Settings for `jac estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSpec {
    pub array: ArraySpec,
    pub method: crate::estimators::Method,
    pub estimator: JacConfig,
    /// Source position used to report NMSE against the true channel.
    pub truth_r_m: Option<f64>,
    pub truth_theta_deg: Option<f64>,
    pub truth_model: ModelTag,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            array: ArraySpec::default(),
            method: crate::estimators::Method::Gd,
            estimator: JacConfig::default(),
            truth_r_m: None,
            truth_theta_deg: None,
            truth_model: ModelTag::Exact,
        }
    }
}

/// Parameter grid for `jac crlb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrlbGridSpec {
    pub array: ArraySpec,
    pub theta_deg: Vec<f64>,
    pub r_m: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub snapshots: Vec<usize>,
}

impl Default for CrlbGridSpec {
    fn default() -> Self {
        Self {
            array: ArraySpec { n_antennas: 32, ..ArraySpec::default() },
            theta_deg: vec![20.0],
            r_m: vec![10.0, 20.0, 50.0, 100.0, 200.0],
            snr_db: vec![10.0],
            snapshots: vec![4],
        }
    }
}

/// Settings for `jac bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub n_list: Vec<usize>,
    pub snapshots: usize,
    pub methods: Vec<SweepMethod>,
    pub repetitions: usize,
    pub carrier_hz: f64,
    pub polar_angle_points: usize,
    /// Antennas per distance point of the polar grid (`S = N / this`).
    pub polar_antennas_per_distance: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            n_list: vec![256, 512, 1024, 2048],
            snapshots: 4,
            methods: vec![SweepMethod::JacIsf, SweepMethod::PolarGrid],
            repetitions: 7,
            carrier_hz: 30e9,
            polar_angle_points: 64,
            polar_antennas_per_distance: 64,
            seed: 1,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(JacError::InvalidConfig("n_list must be non-empty and strictly ascending".into()));
        }
        if self.repetitions < 5 {
            return Err(JacError::InvalidConfig("at least 5 repetitions are required".into()));
        }
        if self.snapshots == 0 || self.polar_angle_points == 0 || self.polar_antennas_per_distance == 0 {
            return Err(JacError::InvalidConfig("snapshots and polar grid sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Parses any of the config types from TOML, mapping syntax and schema
/// errors to [`JacError::InvalidConfig`].
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| JacError::InvalidConfig(e.to_string()))
}
