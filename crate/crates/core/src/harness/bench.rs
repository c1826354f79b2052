//! Wall-clock scaling of the estimators with the array size.

use std::time::Instant;

use serde::Serialize;

use crate::array_model::{synthesize_received, ArrayConfig, ModelTag, SourcePosition};
use crate::error::Result;
use crate::estimators::{jac_estimate, JacConfig, Method};
use crate::polar_grid::{build_polar_grid, estimate_polar_grid};

use super::spec::{BenchSpec, SweepMethod};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub n_antennas: usize,
    pub median_ns: u128,
    /// Median over the previous (smaller) array; `None` for the first row.
    pub ratio: Option<f64>,
}

fn median(mut v: Vec<u128>) -> u128 {
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2
    }
}

fn time_reps<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<u128> {
    f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_nanos());
    }
    Ok(median(times))
}

/// Median estimator runtime per array size. Signal synthesis and dictionary
/// construction are excluded from the timings.
pub fn run_complexity_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let jc = JacConfig::default();
    let mut rows = Vec::new();
    for method in &spec.methods {
        let mut prev: Option<u128> = None;
        for &n in &spec.n_list {
            let cfg = ArrayConfig::half_wavelength(n, spec.carrier_hz, true)?;
            let pos = SourcePosition::from_degrees(0.1 * crate::array_model::rayleigh_distance(&cfg), 20.0)?;
            let sig = synthesize_received(&cfg, &pos, spec.snapshots, 10.0, spec.seed, ModelTag::Exact)?;
            let y = &sig.samples;
            let ns = match method {
                SweepMethod::JacIsf => time_reps(spec.repetitions, || jac_estimate(y, &cfg, Method::Isf, &jc).map(drop))?,
                SweepMethod::JacGd => time_reps(spec.repetitions, || jac_estimate(y, &cfg, Method::Gd, &jc).map(drop))?,
                SweepMethod::MusicOnly => {
                    time_reps(spec.repetitions, || jac_estimate(y, &cfg, Method::MusicOnly, &jc).map(drop))?
                }
                SweepMethod::PolarGrid => {
                    let s = (n / spec.polar_antennas_per_distance).max(1);
                    let grid = build_polar_grid(&cfg, spec.polar_angle_points, s, 1.0, 2.0 * pos.r_m)?;
                    time_reps(spec.repetitions, || estimate_polar_grid(y, &cfg, &grid, 0.0).map(drop))?
                }
            };
            rows.push(BenchRow {
                method: method.name().to_string(),
                n_antennas: n,
                median_ns: ns,
                ratio: prev.map(|p| ns as f64 / p as f64),
            });
            prev = Some(ns);
        }
    }
    Ok(rows)
}

pub fn bench_to_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "n_antennas", "median_ns", "ratio"]).map_err(super::sweep::csv_err)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.n_antennas.to_string(),
            r.median_ns.to_string(),
            r.ratio.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(super::sweep::csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::JacError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
