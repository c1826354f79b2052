//! Grid MUSIC for the direction parameter `p2` of a single far-field source.
//!
//! The signal subspace is obtained by power iteration applied matrix-free to
//! `R = Y Y^H / T`, so one iteration costs `O(N T)` and the covariance is
//! never formed. The pseudospectrum `1 / (a^H (I - U U^H) a)` is evaluated on
//! the open grid `p2_g = -1 + (2g + 1) / G`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::error::{JacError, Result};

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MusicConfig {
    pub grid_size: usize,
    /// Parabolic interpolation of the log-pseudospectrum around the peak.
    pub refine: bool,
    pub signal_dim: usize,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            refine: true,
            signal_dim: 1,
        }
    }
}

impl MusicConfig {
    pub fn validate(&self, n_antennas: usize) -> Result<()> {
        if self.grid_size < 16 {
            return Err(JacError::InvalidConfig(format!(
                "MUSIC grid needs at least 16 points, got {}",
                self.grid_size
            )));
        }
        if self.signal_dim == 0 || self.signal_dim >= n_antennas {
            return Err(JacError::InvalidConfig(format!(
                "signal dimension {} must be in [1, N-1]",
                self.signal_dim
            )));
        }
        Ok(())
    }

    /// Grid point `g`.
    pub fn grid_point(&self, g: usize) -> f64 {
        -1.0 + (2 * g + 1) as f64 / self.grid_size as f64
    }
}

/// `(Y Y^H + (Y Y^H)^H) / (2T)`.
pub fn sample_covariance(y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let t = y.ncols().max(1) as f64;
    let r = y * y.adjoint() / Complex64::new(t, 0.0);
    (&r + r.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `R v` with `R = Y Y^H / T`, without forming `R`.
fn apply_covariance(y: &DMatrix<Complex64>, v: &[Complex64], out: &mut [Complex64]) {
    let n = y.nrows();
    let t = y.ncols() as f64;
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for col in y.column_iter() {
        // c = y_t^H v
        let mut c = Complex64::new(0.0, 0.0);
        for i in 0..n {
            c += col[i].conj() * v[i];
        }
        for i in 0..n {
            out[i] += col[i] * c;
        }
    }
    out.iter_mut().for_each(|o| *o /= t);
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for u in basis {
        let mut c = Complex64::new(0.0, 0.0);
        for (ui, vi) in u.iter().zip(v.iter()) {
            c += ui.conj() * vi;
        }
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi -= ui * c;
        }
    }
}

/// Leading `dim` eigenvectors of the sample covariance by power iteration
/// with deflation. Returns the orthonormal vectors and the total iteration count.
pub fn signal_subspace(y: &DMatrix<Complex64>, dim: usize) -> Result<(Vec<Vec<Complex64>>, usize)> {
    let n = y.nrows();
    if y.ncols() == 0 {
        return Err(JacError::Dimension("signal has no snapshots".into()));
    }
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    let mut total_iter = 0;
    let mut w = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..dim {
        // start from the k-th strongest snapshot, which lies in the signal span
        let mut order: Vec<usize> = (0..y.ncols()).collect();
        let col_norms: Vec<f64> = y.column_iter().map(|c| c.norm_squared()).collect();
        order.sort_by(|&a, &b| col_norms[b].total_cmp(&col_norms[a]).then(a.cmp(&b)));
        let mut v: Vec<Complex64> = y.column(order[k % order.len()]).iter().copied().collect();
        project_out(&mut v, &basis);
        let mut nv = norm(&v);
        if !(nv > 0.0) {
            // deterministic fallback: a unit vector on the first antenna
            v = vec![Complex64::new(0.0, 0.0); n];
            v[k % n] = Complex64::new(1.0, 0.0);
            project_out(&mut v, &basis);
            nv = norm(&v);
            if !(nv > 0.0) {
                return Err(JacError::PowerIteration { iterations: 0, residual: f64::INFINITY });
            }
        }
        v.iter_mut().for_each(|x| *x /= nv);

        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_MAX_ITER {
            total_iter += 1;
            apply_covariance(y, &v, &mut w);
            project_out(&mut w, &basis);
            let lambda: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
            let nw = norm(&w);
            if !(nw > 0.0) {
                // v spans the null space of the deflated covariance; nothing left to find
                converged = true;
                break;
            }
            residual = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (b - a * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / nw;
            w.iter().zip(v.iter_mut()).for_each(|(b, a)| *a = b / nw);
            if residual < POWER_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(JacError::PowerIteration { iterations: total_iter, residual });
        }
        basis.push(v);
    }
    Ok((basis, total_iter))
}

/// Evaluates the pseudospectrum on the configured grid. Returns `(p2, power)` pairs.
pub fn pseudospectrum(
    basis: &[Vec<Complex64>],
    cfg: &ArrayConfig,
    mcfg: &MusicConfig,
) -> Vec<(f64, f64)> {
    let n = cfg.n_antennas;
    let n_f = n as f64;
    let floor = n_f * 1e-14;
    (0..mcfg.grid_size)
        .map(|g| {
            let p2 = mcfg.grid_point(g);
            let step = Complex64::from_polar(1.0, cfg.wavenumber * p2 * cfg.spacing_m);
            let mut captured = 0.0;
            for u in basis {
                let mut a = step;
                let mut acc = Complex64::new(0.0, 0.0);
                for ui in u.iter() {
                    acc += ui.conj() * a;
                    a *= step;
                }
                captured += acc.norm_sqr();
            }
            (p2, 1.0 / (n_f - captured).max(floor))
        })
        .collect()
}

/// CSV dump with header `p2,power`.
pub fn pseudospectrum_csv(spectrum: &[(f64, f64)]) -> String {
    let mut s = String::from("p2,power\n");
    for (p2, power) in spectrum {
        s.push_str(&format!("{p2},{power}\n"));
    }
    s
}

/// Peak location of a gridded pseudospectrum; ties go to the lowest index.
pub fn peak_p2(spectrum: &[(f64, f64)], mcfg: &MusicConfig) -> f64 {
    let mut best = 0;
    for (g, &(_, power)) in spectrum.iter().enumerate() {
        if power > spectrum[best].1 {
            best = g;
        }
    }
    let mut p2 = spectrum[best].0;
    if mcfg.refine && best > 0 && best + 1 < spectrum.len() {
        let lm = spectrum[best - 1].1.ln();
        let l0 = spectrum[best].1.ln();
        let lp = spectrum[best + 1].1.ln();
        let denom = lm - 2.0 * l0 + lp;
        if denom < 0.0 {
            let offset = (0.5 * (lm - lp) / denom).clamp(-0.5, 0.5);
            p2 += offset * 2.0 / mcfg.grid_size as f64;
        }
    }
    let edge = 1.0 / mcfg.grid_size as f64;
    p2.clamp(-1.0 + edge, 1.0 - edge)
}

/// MUSIC estimate of `p2` from an (equivalent) far-field snapshot matrix.
pub fn estimate_p2_music(y_tilde: &DMatrix<Complex64>, cfg: &ArrayConfig, mcfg: &MusicConfig) -> Result<f64> {
    Ok(estimate_p2_music_detailed(y_tilde, cfg, mcfg)?.0)
}

/// As [`estimate_p2_music`], also returning the pseudospectrum and power-iteration count.
pub fn estimate_p2_music_detailed(
    y_tilde: &DMatrix<Complex64>,
    cfg: &ArrayConfig,
    mcfg: &MusicConfig,
) -> Result<(f64, Vec<(f64, f64)>, usize)> {
    if y_tilde.nrows() != cfg.n_antennas {
        return Err(JacError::Dimension(format!(
            "signal has {} rows but the array has {} antennas",
            y_tilde.nrows(),
            cfg.n_antennas
        )));
    }
    mcfg.validate(cfg.n_antennas)?;
    let (basis, iterations) = signal_subspace(y_tilde, mcfg.signal_dim)?;
    let spectrum = pseudospectrum(&basis, cfg, mcfg);
    Ok((peak_p2(&spectrum, mcfg), spectrum, iterations))
}
