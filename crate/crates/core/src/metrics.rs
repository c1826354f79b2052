//! Channel and position quality metrics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{JacError, Result};

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

/// Normalized beamforming gain `|h^H h_hat|^2 / (||h||^2 ||h_hat||^2)`, in `[0, 1]`.
pub fn beamforming_gain(h: &[Complex64], h_hat: &[Complex64]) -> f64 {
    let denom = norm_sqr(h) * norm_sqr(h_hat);
    if denom == 0.0 {
        return 0.0;
    }
    (inner(h, h_hat).norm_sqr() / denom).min(1.0)
}

/// Achievable rate in bit/s/Hz when beamforming with `h_hat`.
pub fn achievable_rate(h: &[Complex64], h_hat: &[Complex64], ps: f64, sigma2: f64) -> Result<f64> {
    if h.len() != h_hat.len() {
        return Err(JacError::Dimension(format!("channel lengths {} and {}", h.len(), h_hat.len())));
    }
    if !(norm_sqr(h_hat) > 0.0) {
        return Err(JacError::InvalidConfig("estimated channel is zero".into()));
    }
    let n = h.len() as f64;
    Ok((1.0 + ps * n / sigma2 * beamforming_gain(h, h_hat)).log2())
}

/// Rate with perfect channel knowledge.
pub fn rate_max(ps: f64, sigma2: f64, n_antennas: usize) -> f64 {
    (1.0 + ps * n_antennas as f64 / sigma2).log2()
}

/// `||h_hat - h||^2 / ||h||^2`.
pub fn nmse(h: &[Complex64], h_hat: &[Complex64]) -> f64 {
    let err: f64 = h.iter().zip(h_hat).map(|(a, b)| (b - a).norm_sqr()).sum();
    err / norm_sqr(h)
}

/// Mean of linear NMSE values, in dB.
pub fn aggregate_nmse_db(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    10.0 * (values.iter().sum::<f64>() / values.len() as f64).log10()
}

/// Root mean squared scalar error.
pub fn rmse_scalar(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Root mean squared 2D position error over `(estimate, truth)` cartesian pairs.
pub fn rmse_position(pairs: &[((f64, f64), (f64, f64))]) -> f64 {
    let errs: Vec<f64> = pairs
        .iter()
        .map(|((ax, az), (bx, bz))| ((ax - bx).powi(2) + (az - bz).powi(2)).sqrt())
        .collect();
    rmse_scalar(&errs)
}

/// Per-trial outcome collected by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub rate: f64,
    pub rate_max: f64,
    pub nmse: f64,
    pub theta_err: f64,
    /// `None` when the estimate degenerated to far field.
    pub range_err: Option<f64>,
    pub position_err: Option<f64>,
}

/// Summary over a set of trials: `(mean, std)` pairs and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub rate: (f64, f64),
    pub rate_max: (f64, f64),
    pub nmse_db: f64,
    pub nmse_db_std: f64,
    pub rmse_theta_rad: f64,
    pub rmse_r_m: f64,
    pub rmse_pos_m: f64,
    pub mse_position: f64,
    pub farfield_count: usize,
    pub trials: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl TrialSummary {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let col = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<_>>();
        let nmse_lin = col(|o| o.nmse);
        let nmse_db_each: Vec<f64> = nmse_lin.iter().map(|v| 10.0 * v.log10()).collect();
        let range: Vec<f64> = outcomes.iter().filter_map(|o| o.range_err).collect();
        let pos: Vec<f64> = outcomes.iter().filter_map(|o| o.position_err).collect();
        let rmse_pos = rmse_scalar(&pos);
        Self {
            rate: mean_std(&col(|o| o.rate)),
            rate_max: mean_std(&col(|o| o.rate_max)),
            nmse_db: aggregate_nmse_db(&nmse_lin),
            nmse_db_std: mean_std(&nmse_db_each).1,
            rmse_theta_rad: rmse_scalar(&col(|o| o.theta_err)),
            rmse_r_m: rmse_scalar(&range),
            rmse_pos_m: rmse_pos,
            mse_position: rmse_pos * rmse_pos,
            farfield_count: outcomes.len() - pos.len(),
            trials: outcomes.len(),
        }
    }
}
