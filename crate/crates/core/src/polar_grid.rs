//! On-grid polar-domain matched filter, used as a baseline.
//!
//! The dictionary spans a uniform grid in `p2` and a grid uniform in `1/r`
//! (denser at short range). Each estimate scans every atom, so the cost is
//! `O(T N G_a S)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array_model::{channel_quadratic, ArrayConfig, ChannelParams};
use crate::error::{JacError, Result};
use crate::estimators::{Diagnostics, Estimate};

pub const METHOD_TAG: &str = "baseline: polar-grid-mf";

#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub angle_points: Vec<f64>,
    pub distance_points: Vec<f64>,
    /// `N x (G_a S)` unit-norm atoms, angle-major: column `a * S + s`.
    pub atoms: DMatrix<Complex64>,
}

impl PolarGrid {
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    /// `(p2, r)` of atom `idx`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let s = self.distance_points.len();
        (self.angle_points[idx / s], self.distance_points[idx % s])
    }
}

/// Distance grid uniform in `1/r` from `1/r_max` to `1/r_min`, endpoints
/// included. A single point sits at `r_max`.
pub fn inverse_distance_grid(s: usize, r_min: f64, r_max: f64) -> Vec<f64> {
    if s == 1 {
        return vec![r_max];
    }
    let (lo, hi) = (1.0 / r_max, 1.0 / r_min);
    (0..s)
        .map(|i| 1.0 / (lo + (hi - lo) * i as f64 / (s - 1) as f64))
        .collect()
}

pub fn build_polar_grid(cfg: &ArrayConfig, g_a: usize, s: usize, r_min: f64, r_max: f64) -> Result<PolarGrid> {
    if g_a == 0 || s == 0 {
        return Err(JacError::InvalidConfig("polar grid needs at least one angle and one distance".into()));
    }
    if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
        return Err(JacError::InvalidConfig(format!("invalid distance range ({r_min}, {r_max})")));
    }
    let angle_points: Vec<f64> = (0..g_a).map(|g| -1.0 + (2 * g + 1) as f64 / g_a as f64).collect();
    let distance_points = inverse_distance_grid(s, r_min, r_max);
    let n = cfg.n_antennas;
    let scale = 1.0 / (n as f64).sqrt();
    let mut atoms = DMatrix::<Complex64>::zeros(n, g_a * s);
    for (a, &p2) in angle_points.iter().enumerate() {
        for (j, &r) in distance_points.iter().enumerate() {
            let par = ChannelParams { p1: -(1.0 - p2 * p2) / (2.0 * r), p2 };
            let h = channel_quadratic(cfg, &par);
            let mut col = atoms.column_mut(a * s + j);
            for (dst, v) in col.iter_mut().zip(h) {
                *dst = v * scale;
            }
        }
    }
    Ok(PolarGrid { angle_points, distance_points, atoms })
}

/// Matched-filter score `sum_t |a^H y_t|^2` of every atom.
pub fn atom_scores(y: &DMatrix<Complex64>, grid: &PolarGrid) -> Vec<f64> {
    let corr = grid.atoms.adjoint() * y;
    corr.row_iter().map(|row| row.iter().map(|v| v.norm_sqr()).sum()).collect()
}

/// Picks the best-matching atom (lowest index on ties).
pub fn estimate_polar_grid(
    y: &DMatrix<Complex64>,
    cfg: &ArrayConfig,
    grid: &PolarGrid,
    p1_floor: f64,
) -> Result<Estimate> {
    if y.nrows() != grid.atoms.nrows() || y.nrows() != cfg.n_antennas {
        return Err(JacError::Dimension(format!(
            "signal has {} rows, grid atoms have {}",
            y.nrows(),
            grid.atoms.nrows()
        )));
    }
    let scores = atom_scores(y, grid);
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    let (p2, r) = grid.point(best);
    let p1 = -(1.0 - p2 * p2) / (2.0 * r);
    Ok(Estimate::from_params(
        cfg,
        p1,
        p2,
        p1_floor,
        Diagnostics { n_eta: None, final_loss: None, iterations: grid.len(), method_tag: METHOD_TAG.to_string() },
    ))
}
