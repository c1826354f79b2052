//! Joint autocorrelation / cross-correlation estimation of the near-field
//! channel.
//!
//! The curvature parameter `p1` is read off the magnitude autocorrelation
//! spectrum, which does not depend on `p2`. Two estimators are provided:
//! inverse-sinc (ISF), which inverts the main lobe lag by lag, and gradient
//! descent (GD), which fits `|sinc|` to every lag under an L1 loss. With `p1`
//! known the quadratic phase is removed and `p2` is found by MUSIC as in the
//! far field.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array_model::{
    channel_quadratic, position_from_params, ArrayConfig, ChannelParams, ResolvedPosition,
};
use crate::autocorr::{
    autocorr_spectrum, constant_modulus_power, lag_scale, lag_zero_power, sinc, sinc_derivative,
    AutocorrSpectrum,
};
use crate::error::{JacError, Result};
use crate::music::{estimate_p2_music_detailed, MusicConfig};

const ARCSINC_DOMAIN_TOL: f64 = 1e-9;
const ARCSINC_TOL: f64 = 1e-12;

/// Inverse of `sinc` on its monotone branch `[-pi, 0]`.
pub fn arcsinc(c: f64) -> Result<f64> {
    if !(-ARCSINC_DOMAIN_TOL..=1.0 + ARCSINC_DOMAIN_TOL).contains(&c) {
        return Err(JacError::ArcsincDomain(c));
    }
    let c = c.clamp(0.0, 1.0);
    if c == 1.0 {
        return Ok(0.0);
    }
    if c == 0.0 {
        return Ok(-PI);
    }
    // sinc is increasing on [-pi, 0]
    let (mut lo, mut hi) = (-PI, 0.0);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = sinc(mid);
        if (v - c).abs() < ARCSINC_TOL {
            break;
        }
        if v < c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < f64::EPSILON {
            break;
        }
    }
    Ok(mid)
}

/// How the autocorrelation spectrum is scaled to unit signal power before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerNormalization {
    /// Use the raw spectrum (assumes unit transmit power).
    None,
    /// Divide by the mean `|Y|^2` over the window; biased low by `1 / (1 + sigma^2)` under noise.
    LagZero,
    /// Divide by the moment-based constant-modulus power estimate, falling
    /// back to the lag-0 power when the estimate is not positive.
    #[default]
    ConstantModulus,
}

/// Power used to normalize the spectrum of `y`.
pub fn signal_power(y: &DMatrix<Complex64>, xi: usize, mode: PowerNormalization) -> f64 {
    match mode {
        PowerNormalization::None => 1.0,
        PowerNormalization::LagZero => lag_zero_power(y, xi),
        PowerNormalization::ConstantModulus => {
            constant_modulus_power(y).unwrap_or_else(|| lag_zero_power(y, xi))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsfConfig {
    /// Main-lobe threshold.
    pub delta: f64,
    /// Lag count; `None` selects `floor(N / 2)`.
    pub xi: Option<usize>,
}

impl Default for IsfConfig {
    fn default() -> Self {
        Self { delta: 0.1, xi: None }
    }
}

impl IsfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(JacError::InvalidConfig(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Start from `p1_init`.
    None,
    #[default]
    Isf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Analytic,
    CentralDifference,
}

/// Gradient-descent settings.
///
/// The iteration runs on the normalized curvature `z = k d^2 (N - xi) xi p1`
/// (the sinc argument at the largest lag) with the gradient divided by `xi`,
/// so `alpha0` is a step in sinc-argument units independent of `N`, `d` and
/// the wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub alpha0: f64,
    pub gamma: f64,
    pub n_itr: usize,
    pub warm_start: WarmStart,
    pub gradient_mode: GradientMode,
    pub p1_init: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.5,
            gamma: 0.05,
            n_itr: 300,
            warm_start: WarmStart::Isf,
            gradient_mode: GradientMode::Analytic,
            p1_init: 0.0,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) {
            return Err(JacError::InvalidConfig(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !(self.gamma >= 0.0) {
            return Err(JacError::InvalidConfig(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.n_itr == 0 {
            return Err(JacError::InvalidConfig("n_itr must be at least 1".into()));
        }
        Ok(())
    }

    /// Inverse-time-decay learning rate for the 1-based iteration `n`.
    pub fn learning_rate(&self, n: usize) -> f64 {
        self.alpha0 / (1.0 + self.gamma * (n as f64 - 1.0))
    }
}

/// Smallest lag with `c_hat[eta] <= delta`, or `xi` when there is none.
pub fn mainlobe_cutoff(c_hat: &AutocorrSpectrum, delta: f64) -> usize {
    c_hat
        .values
        .iter()
        .position(|&c| c <= delta)
        .map(|i| i + 1)
        .unwrap_or(c_hat.xi)
}

/// ISF curvature estimate: mean of the per-lag inversions over the main lobe.
/// Returns `(p1_hat, n_eta)`.
pub fn estimate_p1_isf(c_hat: &AutocorrSpectrum, cfg: &ArrayConfig, isf: &IsfConfig) -> Result<(f64, usize)> {
    isf.validate()?;
    let xi = c_hat.xi;
    if xi == 0 || xi >= cfg.n_antennas {
        return Err(JacError::LagOutOfRange { xi, n: cfg.n_antennas });
    }
    let n_eta = mainlobe_cutoff(c_hat, isf.delta);
    let scale = lag_scale(cfg, xi);
    let mut sum = 0.0;
    for eta in 1..=n_eta {
        let c = c_hat.at(eta).clamp(0.0, 1.0);
        sum += arcsinc(c)? / (scale * eta as f64);
    }
    Ok((sum / n_eta as f64, n_eta))
}

/// L1 misfit between the spectrum and the `|sinc|` model over all lags.
pub fn gd_loss(p1: f64, c_hat: &AutocorrSpectrum, cfg: &ArrayConfig, xi: usize) -> f64 {
    let scale = lag_scale(cfg, xi);
    c_hat
        .values
        .iter()
        .enumerate()
        .map(|(i, &c)| (c - sinc(scale * (i + 1) as f64 * p1).abs()).abs())
        .sum()
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `dLoss/dp1`, analytic or by central differences.
pub fn gd_gradient(p1: f64, c_hat: &AutocorrSpectrum, cfg: &ArrayConfig, xi: usize, mode: GradientMode) -> f64 {
    match mode {
        GradientMode::Analytic => {
            let scale = lag_scale(cfg, xi);
            c_hat
                .values
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let a = scale * (i + 1) as f64;
                    let x = a * p1;
                    if x == 0.0 {
                        return 0.0;
                    }
                    let s = sinc(x);
                    -sign(c - s.abs()) * sign(s) * a * sinc_derivative(x)
                })
                .sum()
        }
        GradientMode::CentralDifference => {
            let h = 1e-9 * p1.abs().max(1.0);
            (gd_loss(p1 + h, c_hat, cfg, xi) - gd_loss(p1 - h, c_hat, cfg, xi)) / (2.0 * h)
        }
    }
}

/// Outcome of the gradient-descent fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdDiagnostics {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    /// Iteration (0 = initial point) at which the returned estimate was found.
    pub best_iteration: usize,
}

/// Gradient-descent curvature estimate. Returns the lowest-loss iterate.
pub fn estimate_p1_gd(c_hat: &AutocorrSpectrum, cfg: &ArrayConfig, gd: &GdConfig) -> Result<(f64, GdDiagnostics)> {
    estimate_p1_gd_with_isf(c_hat, cfg, gd, &IsfConfig::default())
}

/// As [`estimate_p1_gd`], with explicit ISF settings for the warm start.
pub fn estimate_p1_gd_with_isf(
    c_hat: &AutocorrSpectrum,
    cfg: &ArrayConfig,
    gd: &GdConfig,
    isf: &IsfConfig,
) -> Result<(f64, GdDiagnostics)> {
    gd.validate()?;
    let xi = c_hat.xi;
    if xi == 0 || xi >= cfg.n_antennas {
        return Err(JacError::LagOutOfRange { xi, n: cfg.n_antennas });
    }
    let p1_start = match gd.warm_start {
        WarmStart::None => gd.p1_init,
        WarmStart::Isf => estimate_p1_isf(c_hat, cfg, isf)?.0,
    };
    // z = scale * xi * p1; dL/dz = dL/dp1 / (scale * xi); normalized by xi
    let z_per_p1 = lag_scale(cfg, xi) * xi as f64;
    let grad_norm = 1.0 / (z_per_p1 * xi as f64);

    let mut z = p1_start * z_per_p1;
    let initial_loss = gd_loss(p1_start, c_hat, cfg, xi);
    let mut best = (p1_start, initial_loss, 0usize);

    for n in 1..=gd.n_itr {
        let p1 = z / z_per_p1;
        let grad = gd_gradient(p1, c_hat, cfg, xi, gd.gradient_mode);
        if !grad.is_finite() {
            return Err(JacError::NonFiniteGradient { iteration: n, p1 });
        }
        z -= gd.learning_rate(n) * grad * grad_norm;
        // the loss is even in p1; physical sources have p1 <= 0
        z = -z.abs();
        let p1 = z / z_per_p1;
        let loss = gd_loss(p1, c_hat, cfg, xi);
        if loss < best.1 {
            best = (p1, loss, n);
        }
    }

    Ok((
        best.0,
        GdDiagnostics {
            initial_loss,
            final_loss: best.1,
            iterations: gd.n_itr,
            best_iteration: best.2,
        },
    ))
}

/// Removes the quadratic phase: `Y~[n, t] = exp(-j k p1 x_n^2) Y[n, t]`.
/// `literal_sign` applies `exp(+j k p1 x_n^2)` instead, which doubles the
/// curvature rather than cancelling it; kept for comparison only.
pub fn equivalent_farfield(
    y: &DMatrix<Complex64>,
    p1_hat: f64,
    cfg: &ArrayConfig,
    literal_sign: bool,
) -> DMatrix<Complex64> {
    let sgn = if literal_sign { 1.0 } else { -1.0 };
    let comp: Vec<Complex64> = (0..y.nrows())
        .map(|i| {
            let x = cfg.antenna_x(i);
            Complex64::from_polar(1.0, sgn * cfg.wavenumber * p1_hat * x * x)
        })
        .collect();
    DMatrix::from_fn(y.nrows(), y.ncols(), |i, t| comp[i] * y[(i, t)])
}

/// Which curvature estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Isf,
    Gd,
    /// Far-field MUSIC only (`p1 = 0`).
    MusicOnly,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Isf => "jac_isf",
            Method::Gd => "jac_gd",
            Method::MusicOnly => "music_only",
        }
    }
}

/// Full set of knobs for [`jac_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct JacConfig {
    pub isf: IsfConfig,
    pub gd: GdConfig,
    pub music: MusicConfig,
    pub normalization: PowerNormalization,
    /// Curvatures with `p1 >= -p1_floor` are reported as far field. `None`
    /// uses [`resolvable_curvature`] of the array.
    pub p1_floor: Option<f64>,
    pub literal_sign: bool,
}

/// Smallest curvature whose quadratic phase across the aperture reaches
/// `pi / 8`, i.e. `lambda / (16 D^2)`.
pub fn resolvable_curvature(cfg: &ArrayConfig) -> f64 {
    let d = cfg.aperture();
    cfg.wavelength_m / (16.0 * d * d)
}

/// Distance part of an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeEstimate {
    Meters(f64),
    FarField,
}

impl RangeEstimate {
    pub fn meters(&self) -> Option<f64> {
        match self {
            RangeEstimate::Meters(r) => Some(*r),
            RangeEstimate::FarField => None,
        }
    }
}

impl Serialize for RangeEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RangeEstimate::Meters(r) => s.serialize_f64(*r),
            RangeEstimate::FarField => s.serialize_str("far_field"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub n_eta: Option<usize>,
    pub final_loss: Option<f64>,
    /// GD steps plus MUSIC power-iteration steps.
    pub iterations: usize,
    pub method_tag: String,
}

/// Channel and position estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub p1_hat: f64,
    pub p2_hat: f64,
    pub theta_hat: f64,
    pub r_hat: RangeEstimate,
    pub h_hat: Vec<Complex64>,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    /// Assembles an estimate from `(p1, p2)`, rebuilding the channel and position.
    pub fn from_params(cfg: &ArrayConfig, p1_hat: f64, p2_hat: f64, p1_floor: f64, diagnostics: Diagnostics) -> Self {
        let params = ChannelParams { p1: p1_hat, p2: p2_hat };
        let resolved = position_from_params(&params, p1_floor);
        let r_hat = match resolved {
            ResolvedPosition::Near(p) => RangeEstimate::Meters(p.r_m),
            ResolvedPosition::FarField { .. } => RangeEstimate::FarField,
        };
        Self {
            p1_hat,
            p2_hat,
            theta_hat: resolved.theta_rad(),
            r_hat,
            h_hat: channel_quadratic(cfg, &params),
            diagnostics,
        }
    }

    pub fn params(&self) -> ChannelParams {
        ChannelParams { p1: self.p1_hat, p2: self.p2_hat }
    }

    /// Estimated `(p_x, p_z)`; `None` for far-field estimates.
    pub fn cartesian(&self) -> Option<(f64, f64)> {
        self.r_hat
            .meters()
            .map(|r| (r * self.theta_hat.sin(), r * self.theta_hat.cos()))
    }

    /// JSON record; `nmse_db` is included when the true channel is supplied.
    pub fn to_json(&self, truth: Option<&[Complex64]>) -> serde_json::Value {
        let mut v = serde_json::json!({
            "p1_hat": self.p1_hat,
            "p2_hat": self.p2_hat,
            "theta_deg": self.theta_hat.to_degrees(),
            "r_m": self.r_hat,
            "diagnostics": self.diagnostics,
        });
        if let Some(h) = truth {
            v["nmse_db"] = serde_json::json!(10.0 * crate::metrics::nmse(h, &self.h_hat).log10());
        }
        v
    }
}

/// Runs the full pipeline: autocorrelation, curvature, equivalent far-field
/// transform, MUSIC direction, channel reconstruction and position recovery.
pub fn jac_estimate(y: &DMatrix<Complex64>, cfg: &ArrayConfig, method: Method, jc: &JacConfig) -> Result<Estimate> {
    if y.nrows() != cfg.n_antennas {
        return Err(JacError::Dimension(format!(
            "signal has {} rows but the array has {} antennas",
            y.nrows(),
            cfg.n_antennas
        )));
    }
    let xi = jc.isf.xi.unwrap_or_else(|| cfg.default_xi());

    let (p1_hat, n_eta, final_loss, gd_iters) = match method {
        Method::MusicOnly => (0.0, None, None, 0),
        Method::Isf | Method::Gd => {
            let raw = autocorr_spectrum(y, xi)?;
            let c_hat = raw.normalized(signal_power(y, xi, jc.normalization));
            match method {
                Method::Isf => {
                    let (p1, n_eta) = estimate_p1_isf(&c_hat, cfg, &jc.isf)?;
                    (p1, Some(n_eta), Some(gd_loss(p1, &c_hat, cfg, xi)), 0)
                }
                _ => {
                    let (p1, diag) = estimate_p1_gd_with_isf(&c_hat, cfg, &jc.gd, &jc.isf)?;
                    let n_eta = (jc.gd.warm_start == WarmStart::Isf)
                        .then(|| mainlobe_cutoff(&c_hat, jc.isf.delta));
                    (p1, n_eta, Some(diag.final_loss), diag.iterations)
                }
            }
        }
    };

    let y_tilde = if p1_hat == 0.0 {
        y.clone()
    } else {
        equivalent_farfield(y, p1_hat, cfg, jc.literal_sign)
    };
    let (p2_hat, _, music_iters) = estimate_p2_music_detailed(&y_tilde, cfg, &jc.music)?;

    Ok(Estimate::from_params(
        cfg,
        p1_hat,
        p2_hat,
        jc.p1_floor.unwrap_or_else(|| resolvable_curvature(cfg)),
        Diagnostics {
            n_eta,
            final_loss,
            iterations: gd_iters + music_iters,
            method_tag: method.tag().to_string(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{
        channel_quadratic, params_from_position, synthesize_received, ModelTag, SourcePosition,
    };
    use crate::autocorr::model_autocorr;

    fn cfg200() -> ArrayConfig {
        ArrayConfig::half_wavelength(200, 30e9, true).unwrap()
    }

    fn noiseless_spectrum(cfg: &ArrayConfig, par: ChannelParams, xi: usize) -> AutocorrSpectrum {
        let h = channel_quadratic(cfg, &par);
        autocorr_spectrum(&DMatrix::from_column_slice(h.len(), 1, &h), xi).unwrap()
    }

    #[test]
    fn arcsinc_examples() {
        assert_eq!(arcsinc(1.0).unwrap(), 0.0);
        assert_eq!(arcsinc(0.0).unwrap(), -PI);
        let target = 1f64.sin();
        assert!((arcsinc(target).unwrap() + 1.0).abs() < 1e-9);
        for c in [0.01, 0.1, 0.5, 0.9, 0.999_999] {
            let y = arcsinc(c).unwrap();
            assert!((-PI..=0.0).contains(&y));
            assert!((sinc(y) - c).abs() < 1e-12);
        }
        assert!(arcsinc(1.0 + 1e-10).is_ok());
        assert!(arcsinc(-0.5).is_err());
        assert!(arcsinc(1.1).is_err());
    }

    #[test]
    fn mainlobe_cutoff_examples() {
        let c = AutocorrSpectrum::from_values(vec![0.9, 0.5, 0.05, 0.3], 4);
        assert_eq!(mainlobe_cutoff(&c, 0.1), 3);
        let c = AutocorrSpectrum::from_values(vec![0.9, 0.8, 0.7], 4);
        assert_eq!(mainlobe_cutoff(&c, 0.1), 3);
        let c = AutocorrSpectrum::from_values(vec![0.05, 0.9], 4);
        assert_eq!(mainlobe_cutoff(&c, 0.1), 1);
    }

    #[test]
    fn isf_far_field_is_zero() {
        let cfg = cfg200();
        let c = AutocorrSpectrum::from_values(vec![1.0; 100], 100);
        assert_eq!(estimate_p1_isf(&c, &cfg, &IsfConfig::default()).unwrap(), (0.0, 100));
    }

    #[test]
    fn isf_single_lag_path() {
        let cfg = cfg200();
        let mut values = vec![0.05; 100];
        values[0] = 0.02;
        let c = AutocorrSpectrum::from_values(values, 100);
        let (p1, n_eta) = estimate_p1_isf(&c, &cfg, &IsfConfig::default()).unwrap();
        assert_eq!(n_eta, 1);
        let expect = arcsinc(0.02).unwrap() / lag_scale(&cfg, 100);
        assert!((p1 - expect).abs() < 1e-15);
    }

    #[test]
    fn isf_noiseless_accuracy() {
        let cfg = cfg200();
        let par = params_from_position(&SourcePosition::from_degrees(20.0, 30.0).unwrap());
        let c = noiseless_spectrum(&cfg, par, 100);
        let (p1, _) = estimate_p1_isf(&c, &cfg, &IsfConfig::default()).unwrap();
        assert!(p1 <= 0.0);
        assert!(((p1 - par.p1) / par.p1).abs() < 0.05, "{p1} vs {}", par.p1);
    }

    #[test]
    fn loss_examples() {
        let cfg = cfg200();
        let flat = AutocorrSpectrum::from_values(vec![1.0; 100], 100);
        assert_eq!(gd_loss(0.0, &flat, &cfg, 100), 0.0);
        assert_eq!(gd_gradient(0.0, &flat, &cfg, 100, GradientMode::Analytic), 0.0);

        let par = params_from_position(&SourcePosition::from_degrees(20.0, 30.0).unwrap());
        let c = noiseless_spectrum(&cfg, par, 100);
        assert!(gd_loss(par.p1, &c, &cfg, 100) < 0.02 * 100.0);
        assert!(gd_loss(-0.2, &c, &cfg, 100) >= 0.0);
    }

    #[test]
    fn gradient_vanishes_near_noiseless_minimum() {
        let cfg = cfg200();
        let xi = 100;
        let par = params_from_position(&SourcePosition::from_degrees(30.0, -10.0).unwrap());
        // spectrum taken straight from the model so the minimum is exactly at p1
        let values = (1..=xi).map(|eta| model_autocorr(par.p1, eta, &cfg, xi)).collect();
        let c = AutocorrSpectrum::from_values(values, 100);
        let g = gd_gradient(par.p1, &c, &cfg, xi, GradientMode::Analytic);
        let total: f64 = (1..=xi).map(|eta| lag_scale(&cfg, xi) * eta as f64).sum();
        assert!(g.abs() < 1e-3 * total, "{g}");
    }

    #[test]
    fn gd_flat_spectrum_stays_at_zero() {
        let cfg = cfg200();
        let flat = AutocorrSpectrum::from_values(vec![1.0; 100], 100);
        let (p1, diag) = estimate_p1_gd(&flat, &cfg, &GdConfig::default()).unwrap();
        assert_eq!(p1, 0.0);
        assert_eq!(diag.iterations, 300);
        assert_eq!(diag.final_loss, 0.0);
    }

    #[test]
    fn gd_warm_start_converges() {
        let cfg = cfg200();
        let par = params_from_position(&SourcePosition::from_degrees(20.0, 30.0).unwrap());
        let c = noiseless_spectrum(&cfg, par, 100);
        let (p1, diag) = estimate_p1_gd(&c, &cfg, &GdConfig::default()).unwrap();
        assert!(((p1 - par.p1) / par.p1).abs() < 0.01, "{p1} vs {}", par.p1);
        assert!(diag.final_loss <= diag.initial_loss);
    }

    #[test]
    fn gd_best_iterate_never_worse_than_start() {
        let cfg = cfg200();
        let c = AutocorrSpectrum::from_values((1..=100).map(|e| (0.97f64).powi(e)).collect(), 100);
        for p1_init in [-0.001, -0.02, -0.3] {
            let gd = GdConfig { p1_init, warm_start: WarmStart::None, ..GdConfig::default() };
            let (_, diag) = estimate_p1_gd(&c, &cfg, &gd).unwrap();
            assert!(diag.final_loss <= diag.initial_loss);
        }
    }

    #[test]
    fn config_validation() {
        assert!(IsfConfig { delta: 0.0, xi: None }.validate().is_err());
        assert!(IsfConfig { delta: 1.0, xi: None }.validate().is_err());
        assert!(GdConfig { alpha0: 0.0, ..Default::default() }.validate().is_err());
        assert!(GdConfig { gamma: -1.0, ..Default::default() }.validate().is_err());
        assert!(GdConfig { n_itr: 0, ..Default::default() }.validate().is_err());
        let gd = GdConfig { alpha0: 2.0, gamma: 0.5, ..Default::default() };
        assert_eq!(gd.learning_rate(1), 2.0);
        assert_eq!(gd.learning_rate(3), 1.0);
    }

    #[test]
    fn equivalent_farfield_cancels_curvature() {
        let cfg = cfg200();
        let par = ChannelParams { p1: -0.02, p2: 0.3 };
        let h = channel_quadratic(&cfg, &par);
        let y = DMatrix::from_column_slice(200, 1, &h);
        let flat = equivalent_farfield(&y, par.p1, &cfg, false);
        let c = autocorr_spectrum(&flat, 100).unwrap();
        assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(flat.iter().zip(y.iter()).all(|(a, b)| (a.norm() - b.norm()).abs() < 1e-14));
        assert_eq!(equivalent_farfield(&y, 0.0, &cfg, false), y);

        // the literal sign doubles the curvature instead
        let doubled = equivalent_farfield(&y, par.p1, &cfg, true);
        let c2 = autocorr_spectrum(&doubled, 100).unwrap();
        let c_ref = noiseless_spectrum(&cfg, ChannelParams { p1: 2.0 * par.p1, p2: 0.0 }, 100);
        for (a, b) in c2.values.iter().zip(&c_ref.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn end_to_end_noiseless() {
        let cfg = cfg200();
        let pos = SourcePosition::from_degrees(20.0, 30.0).unwrap();
        let sig = synthesize_received(&cfg, &pos, 4, f64::INFINITY, 1, ModelTag::Quadratic).unwrap();
        let h = channel_quadratic(&cfg, &params_from_position(&pos));
        let jc = JacConfig::default();
        let gd = jac_estimate(&sig.samples, &cfg, Method::Gd, &jc).unwrap();
        let isf = jac_estimate(&sig.samples, &cfg, Method::Isf, &jc).unwrap();
        for est in [&gd, &isf] {
            assert!(crate::metrics::nmse(&h, &est.h_hat) < 1e-3);
            assert!((est.theta_hat - pos.theta_rad).abs().to_degrees() < 0.2);
            let r = est.r_hat.meters().unwrap();
            assert!((r - pos.r_m).abs() / pos.r_m < 0.05);
            assert!(est.h_hat.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        }
        let err = |e: &Estimate| (e.p1_hat - params_from_position(&pos).p1).abs();
        assert!(err(&gd) <= err(&isf));
        assert_eq!(gd.diagnostics.method_tag, "jac_gd");
    }

    #[test]
    fn far_field_source_degenerates() {
        let cfg = cfg200();
        let pos = SourcePosition::from_degrees(400.0, -20.0).unwrap();
        let sig = synthesize_received(&cfg, &pos, 4, f64::INFINITY, 2, ModelTag::Exact).unwrap();
        let est = jac_estimate(&sig.samples, &cfg, Method::Isf, &JacConfig::default()).unwrap();
        let rayleigh = crate::array_model::rayleigh_distance(&cfg);
        assert!(est.p1_hat.abs() <= 1.0 / (2.0 * rayleigh), "{}", est.p1_hat);
        let grid_step = 2.0 / JacConfig::default().music.grid_size as f64;
        assert!((est.p2_hat - pos.theta_rad.sin()).abs() < grid_step);
    }

    #[test]
    fn global_rotation_by_quarter_turn_is_bit_exact() {
        let cfg = cfg200();
        let pos = SourcePosition::from_degrees(35.0, -12.0).unwrap();
        let sig = synthesize_received(&cfg, &pos, 8, 5.0, 21, ModelTag::Exact).unwrap();
        let jc = JacConfig::default();
        for rot in [Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)] {
            let rotated = sig.samples.map(|v| v * rot);
            for method in [Method::Isf, Method::Gd] {
                let a = jac_estimate(&sig.samples, &cfg, method, &jc).unwrap();
                let b = jac_estimate(&rotated, &cfg, method, &jc).unwrap();
                assert_eq!(a.p1_hat, b.p1_hat);
                assert_eq!(a.p2_hat, b.p2_hat);
                assert_eq!(a.theta_hat, b.theta_hat);
                assert_eq!(a.r_hat, b.r_hat);
            }
        }
    }

    #[test]
    fn json_record_shape() {
        let cfg = ArrayConfig::half_wavelength(64, 30e9, true).unwrap();
        let est = Estimate::from_params(
            &cfg,
            0.0,
            0.25,
            1e-6,
            Diagnostics { n_eta: None, final_loss: None, iterations: 3, method_tag: "music_only".into() },
        );
        let truth: Vec<Complex64> = est.h_hat.iter().map(|v| v * 1.1).collect();
        let v = est.to_json(Some(&truth));
        assert_eq!(v["r_m"], "far_field");
        assert!((v["nmse_db"].as_f64().unwrap() - 10.0 * (0.01f64 / 1.21).log10()).abs() < 1e-9);
        assert!(est.to_json(None).get("nmse_db").is_none());
        assert_eq!(v["diagnostics"]["method_tag"], "music_only");
        assert!((v["theta_deg"].as_f64().unwrap() - 0.25f64.asin().to_degrees()).abs() < 1e-12);
    }
}
