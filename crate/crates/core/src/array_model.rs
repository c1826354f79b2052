//! Uniform linear array geometry, near-field channel synthesis and the
//! conversions between a source position and its channel parameters.
//!
//! Antenna `n` (1-based) sits at `x_n = n * d` on the x-axis; the phase
//! reference is the origin. A source at distance `r` and elevation `theta`
//! has cartesian coordinates `(r sin theta, r cos theta)` in the xOz plane.
//!
//! The near-field line-of-sight channel is parameterized by
//! `h[n] = exp(j k (p1 x_n^2 + p2 x_n))` with `p1 = -cos^2(theta) / (2 r)`
//! (curvature, always negative for a finite source) and `p2 = sin(theta)`
//! (direction at the reference antenna).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{JacError, Result};

/// Physical speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Rounded speed of light used for textbook-style numbers (lambda = 1 cm at 30 GHz).
pub const IDEAL_SPEED_OF_LIGHT: f64 = 3.0e8;

/// Geometry and carrier of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_antennas: usize,
    pub spacing_m: f64,
    pub carrier_hz: f64,
    pub wavelength_m: f64,
    pub wavenumber: f64,
    pub ideal_c: bool,
}

impl ArrayConfig {
    pub fn new(n_antennas: usize, spacing_m: f64, carrier_hz: f64, ideal_c: bool) -> Result<Self> {
        if n_antennas < 2 {
            return Err(JacError::InvalidConfig(format!(
                "array needs at least 2 antennas, got {n_antennas}"
            )));
        }
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(JacError::InvalidConfig(format!("antenna spacing must be positive, got {spacing_m}")));
        }
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return Err(JacError::InvalidConfig(format!("carrier must be positive, got {carrier_hz}")));
        }
        let c = if ideal_c { IDEAL_SPEED_OF_LIGHT } else { SPEED_OF_LIGHT };
        let wavelength_m = c / carrier_hz;
        Ok(Self {
            n_antennas,
            spacing_m,
            carrier_hz,
            wavelength_m,
            wavenumber: 2.0 * PI / wavelength_m,
            ideal_c,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(n_antennas: usize, carrier_hz: f64, ideal_c: bool) -> Result<Self> {
        let c = if ideal_c { IDEAL_SPEED_OF_LIGHT } else { SPEED_OF_LIGHT };
        Self::new(n_antennas, 0.5 * c / carrier_hz, carrier_hz, ideal_c)
    }

    /// Same carrier and spacing with a different antenna count.
    pub fn with_antennas(&self, n_antennas: usize) -> Result<Self> {
        Self::new(n_antennas, self.spacing_m, self.carrier_hz, self.ideal_c)
    }

    /// Physical aperture `D = N d`.
    pub fn aperture(&self) -> f64 {
        self.n_antennas as f64 * self.spacing_m
    }

    /// x-coordinate of the antenna with zero-based index `i` (i.e. `(i + 1) d`).
    #[inline]
    pub fn antenna_x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing_m
    }

    pub fn antenna_positions(&self) -> Vec<f64> {
        (0..self.n_antennas).map(|i| self.antenna_x(i)).collect()
    }

    /// Default autocorrelation lag count `floor(N / 2)`.
    pub fn default_xi(&self) -> usize {
        self.n_antennas / 2
    }
}

/// Fraunhofer boundary `2 (N d)^2 / lambda`.
pub fn rayleigh_distance(cfg: &ArrayConfig) -> f64 {
    let aperture = cfg.aperture();
    2.0 * aperture * aperture / cfg.wavelength_m
}

/// Lower end of the radiating near field, `0.62 sqrt(D^3 / lambda)`.
pub fn fresnel_lower_bound(cfg: &ArrayConfig) -> f64 {
    0.62 * (cfg.aperture().powi(3) / cfg.wavelength_m).sqrt()
}

/// User position in polar form relative to the reference antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePosition {
    pub r_m: f64,
    pub theta_rad: f64,
}

impl SourcePosition {
    pub fn new(r_m: f64, theta_rad: f64) -> Result<Self> {
        if !(r_m > 0.0 && r_m.is_finite()) {
            return Err(JacError::InvalidConfig(format!("distance must be positive, got {r_m}")));
        }
        if !(theta_rad.abs() < PI / 2.0) {
            return Err(JacError::InvalidConfig(format!(
                "elevation must lie in (-pi/2, pi/2), got {theta_rad}"
            )));
        }
        Ok(Self { r_m, theta_rad })
    }

    pub fn from_degrees(r_m: f64, theta_deg: f64) -> Result<Self> {
        Self::new(r_m, theta_deg.to_radians())
    }

    /// `(p_x, p_z)`.
    pub fn cartesian(&self) -> (f64, f64) {
        (self.r_m * self.theta_rad.sin(), self.r_m * self.theta_rad.cos())
    }

    pub fn from_cartesian(px: f64, pz: f64) -> Result<Self> {
        Self::new(px.hypot(pz), px.atan2(pz))
    }
}

/// Curvature/direction pair of the quadratic-phase channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Curvature parameter in 1/m; the curvature of arrival is `2 p1`.
    pub p1: f64,
    /// Sine of the angle of arrival at the reference antenna.
    pub p2: f64,
}

/// Result of inverting `(p1, p2)`: either a finite position or a
/// far-field source whose distance cannot be resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedPosition {
    Near(SourcePosition),
    FarField { theta_rad: f64 },
}

impl ResolvedPosition {
    pub fn theta_rad(&self) -> f64 {
        match self {
            ResolvedPosition::Near(p) => p.theta_rad,
            ResolvedPosition::FarField { theta_rad } => *theta_rad,
        }
    }

    pub fn range_m(&self) -> Option<f64> {
        match self {
            ResolvedPosition::Near(p) => Some(p.r_m),
            ResolvedPosition::FarField { .. } => None,
        }
    }
}

pub fn params_from_position(pos: &SourcePosition) -> ChannelParams {
    let c = pos.theta_rad.cos();
    ChannelParams {
        p1: -c * c / (2.0 * pos.r_m),
        p2: pos.theta_rad.sin(),
    }
}

/// Inverts [`params_from_position`]. `p2` is clamped to `[-1, 1]`; any
/// `p1 >= -p1_floor` is reported as far field.
pub fn position_from_params(par: &ChannelParams, p1_floor: f64) -> ResolvedPosition {
    let theta = par.p2.clamp(-1.0, 1.0).asin();
    if par.p1 < -p1_floor.abs() {
        let c = theta.cos();
        let r = -c * c / (2.0 * par.p1);
        if r > 0.0 && r.is_finite() && theta.abs() < PI / 2.0 {
            return ResolvedPosition::Near(SourcePosition { r_m: r, theta_rad: theta });
        }
    }
    ResolvedPosition::FarField { theta_rad: theta }
}

/// Local direction `beta(x) = 2 p1 x + p2` seen by an antenna at `x`.
pub fn local_direction(par: &ChannelParams, x: f64) -> f64 {
    2.0 * par.p1 * x + par.p2
}

/// Quadratic-phase channel `exp(j k (p1 x_n^2 + p2 x_n))`.
pub fn channel_quadratic(cfg: &ArrayConfig, par: &ChannelParams) -> Vec<Complex64> {
    let k = cfg.wavenumber;
    (0..cfg.n_antennas)
        .map(|i| {
            let x = cfg.antenna_x(i);
            Complex64::from_polar(1.0, k * (par.p1 * x * x + par.p2 * x))
        })
        .collect()
}

/// Spherical-wave channel `exp(-j k (|p - x_n| - |p|))` with exact distances.
pub fn channel_exact(cfg: &ArrayConfig, pos: &SourcePosition) -> Vec<Complex64> {
    let k = cfg.wavenumber;
    let (px, pz) = pos.cartesian();
    (0..cfg.n_antennas)
        .map(|i| {
            let x = cfg.antenna_x(i);
            let dist = (px - x).hypot(pz);
            Complex64::from_polar(1.0, -k * (dist - pos.r_m))
        })
        .collect()
}

/// Which channel generator produced a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    #[default]
    Exact,
    Quadratic,
}

impl std::str::FromStr for ModelTag {
    type Err = JacError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ModelTag::Exact),
            "quadratic" => Ok(ModelTag::Quadratic),
            other => Err(JacError::InvalidConfig(format!("unknown channel model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelTag::Exact => "exact",
            ModelTag::Quadratic => "quadratic",
        })
    }
}

/// Channel vector for `pos` under the chosen model.
pub fn channel_for(cfg: &ArrayConfig, pos: &SourcePosition, model: ModelTag) -> Vec<Complex64> {
    match model {
        ModelTag::Exact => channel_exact(cfg, pos),
        ModelTag::Quadratic => channel_quadratic(cfg, &params_from_position(pos)),
    }
}

/// N x T snapshot matrix with its generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    /// Rows are antennas, columns are snapshots.
    pub samples: DMatrix<Complex64>,
    pub snr_db: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub model_tag: ModelTag,
}

impl ReceivedSignal {
    /// Wraps an externally supplied matrix (e.g. one read from disk).
    pub fn from_samples(samples: DMatrix<Complex64>) -> Self {
        Self {
            samples,
            snr_db: f64::NAN,
            sigma2: f64::NAN,
            seed: 0,
            model_tag: ModelTag::Exact,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.samples.ncols()
    }
}

/// Per-antenna noise variance for unit signal power at `snr_db`.
/// `+inf` disables noise.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// `Y = h s^H + W` with unit-amplitude random-phase symbols and circular
/// Gaussian noise of variance `1 / SNR`. Deterministic in `seed`.
pub fn synthesize_received(
    cfg: &ArrayConfig,
    pos: &SourcePosition,
    snapshots: usize,
    snr_db: f64,
    seed: u64,
    model_tag: ModelTag,
) -> Result<ReceivedSignal> {
    if snapshots == 0 {
        return Err(JacError::InvalidConfig("snapshot count must be at least 1".into()));
    }
    if snr_db.is_nan() {
        return Err(JacError::InvalidConfig("SNR must not be NaN".into()));
    }
    let h = channel_for(cfg, pos, model_tag);
    let sigma2 = noise_variance(snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let symbols: Vec<Complex64> = (0..snapshots)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
        .collect();

    let n = cfg.n_antennas;
    let noise_std = (sigma2 / 2.0).sqrt();
    let mut samples = DMatrix::from_element(n, snapshots, Complex64::new(0.0, 0.0));
    for t in 0..snapshots {
        let s_conj = symbols[t].conj();
        for i in 0..n {
            let mut y = h[i] * s_conj;
            if sigma2 > 0.0 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                y += Complex64::new(re * noise_std, im * noise_std);
            }
            samples[(i, t)] = y;
        }
    }

    Ok(ReceivedSignal {
        samples,
        snr_db,
        sigma2,
        seed,
        model_tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg200() -> ArrayConfig {
        ArrayConfig::half_wavelength(200, 30e9, true).unwrap()
    }

    fn wrap(phase: f64) -> f64 {
        (phase + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn rayleigh_distance_values() {
        assert!((rayleigh_distance(&cfg200()) - 200.0).abs() < 1e-12);
        let physical = ArrayConfig::half_wavelength(200, 30e9, false).unwrap();
        let expected = 200.0 * SPEED_OF_LIGHT / IDEAL_SPEED_OF_LIGHT;
        assert!((rayleigh_distance(&physical) - expected).abs() < 1e-9);
        assert!((expected - 199.86).abs() < 0.01);

        let two = ArrayConfig::half_wavelength(2, 30e9, true).unwrap();
        assert!((rayleigh_distance(&two) - 2.0 * two.wavelength_m).abs() < 1e-15);
    }

    #[test]
    fn aperture_is_one_metre_for_reference_array() {
        assert!((cfg200().aperture() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_arrays() {
        assert!(ArrayConfig::half_wavelength(1, 30e9, true).is_err());
        assert!(ArrayConfig::new(8, 0.0, 30e9, true).is_err());
        assert!(SourcePosition::new(-1.0, 0.0).is_err());
        assert!(SourcePosition::new(1.0, PI / 2.0).is_err());
    }

    #[test]
    fn params_examples() {
        let p = params_from_position(&SourcePosition::new(50.0, 0.0).unwrap());
        assert!((p.p1 + 0.01).abs() < 1e-15 && p.p2.abs() < 1e-15);
        let p = params_from_position(&SourcePosition::from_degrees(20.0, 30.0).unwrap());
        assert!((p.p1 + 0.01875).abs() < 1e-12);
        assert!((p.p2 - 0.5).abs() < 1e-12);
        let far = params_from_position(&SourcePosition::new(1e12, 0.3).unwrap());
        assert!(far.p1.abs() < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        match position_from_params(&ChannelParams { p1: -0.01, p2: 0.0 }, 0.0) {
            ResolvedPosition::Near(p) => {
                assert!((p.r_m - 50.0).abs() < 1e-12);
                assert!(p.theta_rad.abs() < 1e-15);
            }
            other => panic!("expected near-field, got {other:?}"),
        }
        match position_from_params(&ChannelParams { p1: 0.0, p2: 0.5 }, 0.0) {
            ResolvedPosition::FarField { theta_rad } => {
                assert!((theta_rad - 30f64.to_radians()).abs() < 1e-12)
            }
            other => panic!("expected far field, got {other:?}"),
        }
        // out-of-range direction is clamped rather than producing NaN
        let clamped = position_from_params(&ChannelParams { p1: 0.0, p2: 1.0 + 1e-12 }, 0.0);
        assert!((clamped.theta_rad() - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn cartesian_roundtrip() {
        let pos = SourcePosition::new(37.5, -0.7).unwrap();
        let (x, z) = pos.cartesian();
        let back = SourcePosition::from_cartesian(x, z).unwrap();
        assert!((back.r_m - pos.r_m).abs() / pos.r_m < 1e-12);
        assert!((back.theta_rad - pos.theta_rad).abs() < 1e-12);
    }

    #[test]
    fn quadratic_channel_special_cases() {
        let cfg = cfg200();
        let ones = channel_quadratic(&cfg, &ChannelParams { p1: 0.0, p2: 0.0 });
        assert!(ones.iter().all(|h| (h - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let p2 = 0.3;
        let far = channel_quadratic(&cfg, &ChannelParams { p1: 0.0, p2 });
        for (i, h) in far.iter().enumerate() {
            let expect = Complex64::from_polar(1.0, cfg.wavenumber * p2 * (i + 1) as f64 * cfg.spacing_m);
            assert!((h - expect).norm() < 1e-12);
        }

        let near = channel_quadratic(&cfg, &ChannelParams { p1: -0.03, p2: -0.4 });
        assert!(near.iter().all(|h| (h.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn exact_channel_beyond_rayleigh_matches_far_field() {
        let cfg = cfg200();
        for theta_deg in [-60.0, -20.0, 0.0, 35.0, 60.0] {
            let pos = SourcePosition::from_degrees(10.0 * rayleigh_distance(&cfg), theta_deg).unwrap();
            let exact = channel_exact(&cfg, &pos);
            let far = channel_quadratic(&cfg, &ChannelParams { p1: 0.0, p2: pos.theta_rad.sin() });
            let worst = exact
                .iter()
                .zip(&far)
                .map(|(a, b)| wrap((a * b.conj()).arg()).abs())
                .fold(0.0, f64::max);
            assert!(worst < PI / 8.0, "theta {theta_deg}: {worst}");
        }
    }

    #[test]
    fn exact_and_quadratic_agree_in_fresnel_region() {
        let cfg = cfg200();
        // the reference antenna sits at one end, so the bound holds for twice the aperture
        let lo = fresnel_lower_bound(&cfg.with_antennas(400).unwrap());
        let hi = rayleigh_distance(&cfg);
        for r in [lo * 1.01, 5.0, 10.0, 20.0, 50.0, 150.0, hi * 0.99].into_iter().filter(|&r| r > lo) {
            for theta_deg in [-60.0, -30.0, 0.0, 30.0, 60.0] {
                let pos = SourcePosition::from_degrees(r, theta_deg).unwrap();
                let exact = channel_exact(&cfg, &pos);
                let quad = channel_quadratic(&cfg, &params_from_position(&pos));
                let worst = exact
                    .iter()
                    .zip(&quad)
                    .map(|(a, b)| wrap((a * b.conj()).arg()).abs())
                    .fold(0.0, f64::max);
                assert!(worst < PI / 8.0, "r {r} theta {theta_deg}: {worst}");
            }
        }
    }

    #[test]
    fn local_direction_matches_phase_slope() {
        let cfg = cfg200();
        let par = ChannelParams { p1: -0.02, p2: 0.35 };
        assert_eq!(local_direction(&par, 0.0), par.p2);
        assert_eq!(local_direction(&ChannelParams { p1: 0.0, p2: 0.2 }, 0.7), 0.2);

        let h = channel_quadratic(&cfg, &par);
        let bound = cfg.wavenumber * par.p1.abs() * cfg.spacing_m * cfg.spacing_m;
        for i in 0..cfg.n_antennas - 1 {
            let slope = (h[i + 1] * h[i].conj()).arg() / (cfg.wavenumber * cfg.spacing_m);
            let mid = 0.5 * (cfg.antenna_x(i) + cfg.antenna_x(i + 1));
            assert!((slope - local_direction(&par, mid)).abs() < bound.max(1e-12));
        }

        // finite-difference derivative of beta is the curvature of arrival 2 p1
        let step = 1e-3;
        let coa = (local_direction(&par, 0.5 + step) - local_direction(&par, 0.5 - step)) / (2.0 * step);
        assert!((coa - 2.0 * par.p1).abs() < 1e-12);
    }

    #[test]
    fn noiseless_synthesis_is_unit_modulus() {
        let cfg = ArrayConfig::half_wavelength(64, 30e9, true).unwrap();
        let pos = SourcePosition::from_degrees(15.0, 10.0).unwrap();
        let sig = synthesize_received(&cfg, &pos, 5, f64::INFINITY, 3, ModelTag::Exact).unwrap();
        assert_eq!(sig.samples.shape(), (64, 5));
        assert_eq!(sig.sigma2, 0.0);
        assert!(sig.samples.iter().all(|y| (y.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn synthesis_is_deterministic_and_rejects_zero_snapshots() {
        let cfg = ArrayConfig::half_wavelength(32, 30e9, true).unwrap();
        let pos = SourcePosition::from_degrees(12.0, -25.0).unwrap();
        let a = synthesize_received(&cfg, &pos, 4, 3.0, 99, ModelTag::Quadratic).unwrap();
        let b = synthesize_received(&cfg, &pos, 4, 3.0, 99, ModelTag::Quadratic).unwrap();
        assert_eq!(a, b);
        let c = synthesize_received(&cfg, &pos, 4, 3.0, 100, ModelTag::Quadratic).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(synthesize_received(&cfg, &pos, 0, 3.0, 1, ModelTag::Exact).is_err());
    }

    #[test]
    fn empirical_noise_variance_at_zero_db() {
        let cfg = ArrayConfig::half_wavelength(256, 30e9, true).unwrap();
        let pos = SourcePosition::from_degrees(30.0, 5.0).unwrap();
        let clean = synthesize_received(&cfg, &pos, 64, f64::INFINITY, 7, ModelTag::Exact).unwrap();
        let noisy = synthesize_received(&cfg, &pos, 64, 0.0, 7, ModelTag::Exact).unwrap();
        // same seed gives the same symbols, so the difference is pure noise
        let diff = &noisy.samples - &clean.samples;
        let var = diff.iter().map(|w| w.norm_sqr()).sum::<f64>() / diff.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "empirical variance {var}");
    }
}
