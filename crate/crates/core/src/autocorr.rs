//! Spatial autocorrelation of the received snapshots and its `|sinc|` model.
//!
//! For lag `eta` the estimate averages `Y[n, t] conj(Y[n - eta, t])` over the
//! fixed window `n = xi+1 ..= N` and all snapshots, then takes the magnitude.
//! For a quadratic-phase channel the products carry a linear phase ramp in
//! `n` whose slope depends on `p1` only, so the magnitude is independent of
//! the direction parameter `p2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::error::{JacError, Result};

/// `sin(x) / x` with `sinc(0) = 1`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Derivative of [`sinc`].
#[inline]
pub fn sinc_derivative(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // -x/3 + x^3/30
        -x / 3.0 + x * x * x / 30.0
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// Lag-indexed magnitude autocorrelation `c_hat[1..=xi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrSpectrum {
    /// `values[eta - 1]` holds `c_hat[eta]`.
    pub values: Vec<f64>,
    pub xi: usize,
    /// Averaging window `N - xi` in antennas.
    pub window_len: usize,
    pub snapshots_used: usize,
}

impl AutocorrSpectrum {
    /// Builds a spectrum from explicit lag values (lag 1 first).
    pub fn from_values(values: Vec<f64>, window_len: usize) -> Self {
        Self {
            xi: values.len(),
            values,
            window_len,
            snapshots_used: 0,
        }
    }

    /// `c_hat[eta]` for 1-based `eta`.
    pub fn at(&self, eta: usize) -> f64 {
        self.values[eta - 1]
    }

    /// Divides every lag by `power` (no-op for non-positive or non-finite power).
    pub fn normalized(&self, power: f64) -> Self {
        let mut out = self.clone();
        if power > 0.0 && power.is_finite() {
            out.values.iter_mut().for_each(|v| *v /= power);
        }
        out
    }

    /// CSV dump with header `eta,c_hat`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eta,c_hat\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, v));
        }
        s
    }
}

fn check_lag(n: usize, xi: usize) -> Result<()> {
    if xi == 0 || xi >= n {
        return Err(JacError::LagOutOfRange { xi, n });
    }
    Ok(())
}

/// Autocorrelation spectrum computed with FFT cross-correlation,
/// `O(T N log N)` for all lags at once.
pub fn autocorr_spectrum(y: &DMatrix<Complex64>, xi: usize) -> Result<AutocorrSpectrum> {
    let n = y.nrows();
    let t = y.ncols();
    check_lag(n, xi)?;
    if t == 0 {
        return Err(JacError::Dimension("signal has no snapshots".into()));
    }

    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let zero = Complex64::new(0.0, 0.0);
    let mut acc = vec![zero; len];
    let mut full = vec![zero; len];
    let mut window = vec![zero; len];
    for col in y.column_iter() {
        full.iter_mut().for_each(|v| *v = zero);
        window.iter_mut().for_each(|v| *v = zero);
        for (i, v) in col.iter().enumerate() {
            full[i] = *v;
            if i >= xi {
                window[i] = *v;
            }
        }
        fwd.process(&mut full);
        fwd.process(&mut window);
        for ((a, w), f) in acc.iter_mut().zip(&window).zip(&full) {
            *a += w * f.conj();
        }
    }
    inv.process(&mut acc);

    let scale = 1.0 / (len as f64 * t as f64 * (n - xi) as f64);
    let values = (1..=xi).map(|eta| acc[eta].norm() * scale).collect();
    Ok(AutocorrSpectrum {
        values,
        xi,
        window_len: n - xi,
        snapshots_used: t,
    })
}

/// Literal double-sum evaluation, `O(T xi (N - xi))`. Summation runs over
/// antennas in the outer loop and snapshots in the inner loop.
pub fn autocorr_spectrum_direct(y: &DMatrix<Complex64>, xi: usize) -> Result<AutocorrSpectrum> {
    let n = y.nrows();
    let t = y.ncols();
    check_lag(n, xi)?;
    if t == 0 {
        return Err(JacError::Dimension("signal has no snapshots".into()));
    }
    let scale = 1.0 / (t as f64 * (n - xi) as f64);
    let values = (1..=xi)
        .map(|eta| {
            let mut sum = Complex64::new(0.0, 0.0);
            for i in xi..n {
                for s in 0..t {
                    sum += y[(i, s)] * y[(i - eta, s)].conj();
                }
            }
            (sum * scale).norm()
        })
        .collect();
    Ok(AutocorrSpectrum {
        values,
        xi,
        window_len: n - xi,
        snapshots_used: t,
    })
}

/// Mean `|Y|^2` over the autocorrelation window (the lag-0 term).
pub fn lag_zero_power(y: &DMatrix<Complex64>, xi: usize) -> f64 {
    let n = y.nrows();
    let t = y.ncols();
    let mut sum = 0.0;
    for col in y.column_iter() {
        for v in col.iter().skip(xi) {
            sum += v.norm_sqr();
        }
    }
    sum / (t as f64 * (n - xi.min(n)) as f64)
}

/// Signal power of a constant-modulus signal in circular Gaussian noise,
/// from the second and fourth sample moments: `sqrt(2 M2^2 - M4)`.
/// Returns `None` when the moment combination is not positive (noise-dominated).
pub fn constant_modulus_power(y: &DMatrix<Complex64>) -> Option<f64> {
    let count = y.len() as f64;
    if count == 0.0 {
        return None;
    }
    let (m2, m4) = y.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let p = v.norm_sqr();
        (m2 + p, m4 + p * p)
    });
    let (m2, m4) = (m2 / count, m4 / count);
    let a4 = 2.0 * m2 * m2 - m4;
    (a4 > 0.0).then(|| a4.sqrt())
}

/// Argument of the `|sinc|` model at lag `eta`: `k p1 eta d^2 (N - xi)`.
#[inline]
pub fn model_argument(p1: f64, eta: usize, cfg: &ArrayConfig, xi: usize) -> f64 {
    lag_scale(cfg, xi) * eta as f64 * p1
}

/// `k d^2 (N - xi)`, the per-lag factor multiplying `eta * p1`.
#[inline]
pub fn lag_scale(cfg: &ArrayConfig, xi: usize) -> f64 {
    cfg.wavenumber * cfg.spacing_m * cfg.spacing_m * (cfg.n_antennas - xi) as f64
}

/// Model autocorrelation `|sinc(k p1 eta d^2 (N - xi))|`.
pub fn model_autocorr(p1: f64, eta: usize, cfg: &ArrayConfig, xi: usize) -> f64 {
    sinc(model_argument(p1, eta, cfg, xi)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{
        channel_quadratic, params_from_position, synthesize_received, ChannelParams, ModelTag,
        SourcePosition,
    };
    use std::f64::consts::PI;

    fn column(h: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(h.len(), 1, h)
    }

    #[test]
    fn sinc_basics() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-15);
        assert!((sinc(-1.0) - 1f64.sin()).abs() < 1e-15);
        for x in [-3.0, -0.5, 1e-5, 0.2, 2.5] {
            let fd = (sinc(x + 1e-6) - sinc(x - 1e-6)) / 2e-6;
            assert!((fd - sinc_derivative(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn far_field_spectrum_is_flat() {
        let cfg = ArrayConfig::half_wavelength(128, 30e9, true).unwrap();
        for p2 in [-0.8, 0.0, 0.37] {
            let h = channel_quadratic(&cfg, &ChannelParams { p1: 0.0, p2 });
            let c = autocorr_spectrum(&column(&h), 64).unwrap();
            assert_eq!(c.values.len(), 64);
            assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn zero_signal_gives_zero_spectrum() {
        let y = DMatrix::from_element(16, 3, Complex64::new(0.0, 0.0));
        let c = autocorr_spectrum(&y, 8).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lag_range_is_checked() {
        let y = DMatrix::from_element(16, 1, Complex64::new(1.0, 0.0));
        assert!(autocorr_spectrum(&y, 0).is_err());
        assert!(autocorr_spectrum(&y, 16).is_err());
        assert!(autocorr_spectrum(&y, 15).is_ok());
        assert!(autocorr_spectrum_direct(&y, 16).is_err());
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let cfg = ArrayConfig::half_wavelength(96, 30e9, true).unwrap();
        let pos = SourcePosition::from_degrees(12.0, -20.0).unwrap();
        let sig = synthesize_received(&cfg, &pos, 3, 4.0, 11, ModelTag::Exact).unwrap();
        for xi in [1, 17, 48, 95] {
            let a = autocorr_spectrum(&sig.samples, xi).unwrap();
            let b = autocorr_spectrum_direct(&sig.samples, xi).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12, "xi {xi}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn model_examples() {
        let cfg = ArrayConfig::half_wavelength(200, 30e9, true).unwrap();
        assert_eq!(model_autocorr(0.0, 37, &cfg, 100), 1.0);
        // choose p1 so the argument at eta = 1 is exactly -pi
        let p1 = -PI / lag_scale(&cfg, 100);
        assert!(model_autocorr(p1, 1, &cfg, 100) < 1e-15);

        // N=200, d=0.005, xi=100, p1=-0.01, eta=50: argument = -k * 0.01 * 50 * 2.5e-5 * 100
        let arg = -cfg.wavenumber * 0.01 * 50.0 * 0.005 * 0.005 * 100.0;
        let expect = (arg.sin() / arg).abs();
        assert!((model_autocorr(-0.01, 50, &cfg, 100) - expect).abs() < 1e-14);
        // the synthetic spectrum agrees with that scalar value up to discretization
        let h = channel_quadratic(&cfg, &ChannelParams { p1: -0.01, p2: 0.2 });
        let c = autocorr_spectrum(&column(&h), 100).unwrap();
        assert!((c.at(50) - expect).abs() < 0.02);
    }

    #[test]
    fn noiseless_spectrum_tracks_sinc_model() {
        let cfg = ArrayConfig::half_wavelength(200, 30e9, true).unwrap();
        for (r, th) in [(10.0, 0.0), (20.0, 30.0), (55.0, -45.0), (100.0, 60.0)] {
            let par = params_from_position(&SourcePosition::from_degrees(r, th).unwrap());
            let c = autocorr_spectrum(&column(&channel_quadratic(&cfg, &par)), 100).unwrap();
            for eta in 1..=100 {
                let m = model_autocorr(par.p1, eta, &cfg, 100);
                assert!((c.at(eta) - m).abs() < 0.02, "r {r} eta {eta}");
            }
        }
    }

    #[test]
    fn first_zero_location() {
        let cfg = ArrayConfig::half_wavelength(200, 30e9, true).unwrap();
        let p1 = -0.05;
        let c = autocorr_spectrum(&column(&channel_quadratic(&cfg, &ChannelParams { p1, p2: 0.1 })), 100).unwrap();
        let predicted = PI / (cfg.wavenumber * p1.abs() * cfg.spacing_m.powi(2) * 100.0);
        // the local minimum nearest the predicted zero
        let eta_min = (2..100)
            .filter(|&e| c.at(e) <= c.at(e - 1) && c.at(e) <= c.at(e + 1))
            .min_by(|a, b| {
                (*a as f64 - predicted).abs().total_cmp(&(*b as f64 - predicted).abs())
            })
            .unwrap();
        assert!((eta_min as f64 - predicted).abs() <= 1.0, "{eta_min} vs {predicted}");
    }

    #[test]
    fn conjugation_and_direction_invariance() {
        let cfg = ArrayConfig::half_wavelength(200, 30e9, true).unwrap();
        let a = column(&channel_quadratic(&cfg, &ChannelParams { p1: -0.02, p2: 0.1 }));
        let b = column(&channel_quadratic(&cfg, &ChannelParams { p1: -0.02, p2: -0.65 }));
        let ca = autocorr_spectrum(&a, 100).unwrap();
        let cb = autocorr_spectrum(&b, 100).unwrap();
        let cconj = autocorr_spectrum(&a.map(|v| v.conj()), 100).unwrap();
        for eta in 1..=100 {
            assert!((ca.at(eta) - cb.at(eta)).abs() < 1e-9);
            assert!((ca.at(eta) - cconj.at(eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn power_estimates() {
        let cfg = ArrayConfig::half_wavelength(200, 30e9, true).unwrap();
        let pos = SourcePosition::from_degrees(25.0, 10.0).unwrap();
        let clean = synthesize_received(&cfg, &pos, 8, f64::INFINITY, 1, ModelTag::Exact).unwrap();
        assert!((lag_zero_power(&clean.samples, 100) - 1.0).abs() < 1e-12);
        assert!((constant_modulus_power(&clean.samples).unwrap() - 1.0).abs() < 1e-12);

        let noisy = synthesize_received(&cfg, &pos, 32, 0.0, 1, ModelTag::Exact).unwrap();
        // lag-0 power includes the noise, the moment estimate removes it
        assert!((lag_zero_power(&noisy.samples, 100) - 2.0).abs() < 0.1);
        assert!((constant_modulus_power(&noisy.samples).unwrap() - 1.0).abs() < 0.1);

        let scaled = noisy.samples.map(|v| v * 3.0);
        let ratio = constant_modulus_power(&scaled).unwrap() / constant_modulus_power(&noisy.samples).unwrap();
        assert!((ratio - 9.0).abs() < 1e-9);
    }
}
