//! Experiment runner: Monte-Carlo sweeps, bound tables and runtime scaling.

pub mod bench;
pub mod spec;
pub mod sweep;

use serde::Serialize;

use crate::array_model::noise_variance;
use crate::crlb::{crlb_closed_form, crlb_corrected_closed_form, crlb_numeric_fim, unit_pilots, CrlbReport};
use crate::error::Result;

pub use bench::{bench_to_csv, run_complexity_bench, BenchRow};
pub use spec::{BenchSpec, CrlbGridSpec, EstimateSpec, SimulateSpec, SweepSpec};
pub use sweep::{
    plan, rows_to_csv, rows_to_json, run_sweep, run_sweep_outcomes, run_sweep_with_threads, trial_seed, SweepRow,
    ValueOutcomes,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbRow {
    pub theta_deg: f64,
    pub r_m: f64,
    pub snr_db: f64,
    #[serde(rename = "T")]
    pub snapshots: usize,
    pub crlb_theta: f64,
    pub crlb_r: f64,
    pub crlb_p1: f64,
    pub crlb_p2: f64,
    pub source_tag: String,
}

impl CrlbRow {
    fn new(theta_deg: f64, r_m: f64, snr_db: f64, snapshots: usize, rep: &CrlbReport) -> Self {
        Self {
            theta_deg,
            r_m,
            snr_db,
            snapshots,
            crlb_theta: rep.crlb_theta,
            crlb_r: rep.crlb_r,
            crlb_p1: rep.crlb_p1,
            crlb_p2: rep.crlb_p2,
            source_tag: rep.source_tag.tag().to_string(),
        }
    }
}

/// Numeric, verbatim and corrected closed-form bounds over the grid, in
/// that order per point. Unit-modulus pilots are assumed.
pub fn crlb_grid(spec: &CrlbGridSpec) -> Result<Vec<CrlbRow>> {
    let cfg = spec.array.build()?;
    let mut rows = Vec::new();
    for &theta_deg in &spec.theta_deg {
        for &r in &spec.r_m {
            for &snr in &spec.snr_db {
                for &t in &spec.snapshots {
                    let sigma2 = noise_variance(snr);
                    let theta = theta_deg.to_radians();
                    let num = crlb_numeric_fim(&cfg, theta, r, &unit_pilots(t), sigma2)?;
                    let mut cf = crlb_closed_form(&cfg, theta, r, sigma2, t as f64)?;
                    cf.flag_against(&num, 0.05);
                    let mut fixed = crlb_corrected_closed_form(&cfg, theta, r, sigma2, t as f64)?;
                    fixed.flag_against(&num, 0.05);
                    for rep in [&num, &cf, &fixed] {
                        rows.push(CrlbRow::new(theta_deg, r, snr, t, rep));
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn crlb_to_csv(rows: &[CrlbRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(sweep::csv_err)?;
    }
    if rows.is_empty() {
        w.write_record(["theta_deg", "r_m", "snr_db", "T", "crlb_theta", "crlb_r", "crlb_p1", "crlb_p2", "source_tag"])
            .map_err(sweep::csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::JacError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crlb_grid_layout() {
        let rows = crlb_grid(&CrlbGridSpec::default()).unwrap();
        assert_eq!(rows.len(), 15);
        assert_eq!(rows[0].source_tag, "numeric_fim");
        assert_eq!(rows[1].source_tag, "closed_form");
        assert_eq!(rows[2].source_tag, "corrected_closed_form");
        let numeric: Vec<f64> = rows.iter().filter(|r| r.source_tag == "numeric_fim").map(|r| r.crlb_r).collect();
        assert!(numeric.windows(2).all(|w| w[1] > w[0]));
        let csv = crlb_to_csv(&rows).unwrap();
        assert!(csv.starts_with("theta_deg,r_m,snr_db,T,crlb_theta,crlb_r,crlb_p1,crlb_p2,source_tag\n"));
    }
}
