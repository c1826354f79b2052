//! Monte-Carlo sweeps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::array_model::{
    channel_for, noise_variance, synthesize_received, ArrayConfig, SourcePosition,
};
use crate::crlb::{crlb_numeric_fim, unit_pilots};
use crate::error::Result;
use crate::estimators::{jac_estimate, resolvable_curvature, Estimate, Method};
use crate::metrics::{achievable_rate, mean_std, nmse, rate_max, rmse_scalar, TrialOutcome};
use crate::polar_grid::{build_polar_grid, estimate_polar_grid, PolarGrid};

use super::spec::{PositionScope, SweepMethod, SweepSpec};

pub const CSV_HEADER: [&str; 8] = ["sweep_var", "value", "method", "metric", "mean", "std", "trials", "seed"];

/// Method label used for the bound rows.
pub const CRLB_METHOD: &str = "crlb";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Counter-based seed of trial `trial` at sweep value `value`.
pub fn trial_seed(master: u64, value: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ value as u64) ^ trial as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannedTrial {
    pub value: f64,
    pub value_index: usize,
    pub trial: usize,
    pub seed: u64,
}

/// The `(value, trial, seed)` triples a sweep would run.
pub fn plan(spec: &SweepSpec) -> Vec<PlannedTrial> {
    let mut out = Vec::with_capacity(spec.values.len() * spec.trials);
    for (vi, &value) in spec.values.iter().enumerate() {
        for trial in 0..spec.trials {
            out.push(PlannedTrial { value, value_index: vi, trial, seed: trial_seed(spec.seed, vi, trial) });
        }
    }
    out
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_var: String,
    pub value: f64,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
    pub seed: u64,
}

fn draw_position(spec: &SweepSpec, value: f64, seed: u64) -> Result<SourcePosition> {
    let f = &spec.fixed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = if spec.sweep_var == super::spec::SweepVar::DistanceM {
        value
    } else {
        match f.r_range_m {
            Some([lo, hi]) if lo < hi => rng.random_range(lo..hi),
            Some([lo, _]) => lo,
            None => f.r_m,
        }
    };
    let theta = match f.theta_range_deg {
        Some([lo, hi]) if lo < hi => rng.random_range(lo..hi),
        Some([lo, _]) => lo,
        None => f.theta_deg,
    };
    SourcePosition::new(r, theta * PI / 180.0)
}

/// Shared per-value context.
struct ValueContext {
    cfg: ArrayConfig,
    snapshots: usize,
    snr_db: f64,
    grid: Option<PolarGrid>,
}

/// Outcome of one trial: the true position and one outcome per method.
#[derive(Debug, Clone)]
struct TrialResult {
    truth: SourcePosition,
    outcomes: Vec<TrialOutcome>,
}

fn outcome(cfg: &ArrayConfig, truth: &SourcePosition, h: &[num_complex::Complex64], est: &Estimate, sigma2: f64) -> Result<TrialOutcome> {
    let (rate, rmax) = if sigma2 > 0.0 {
        (achievable_rate(h, &est.h_hat, 1.0, sigma2)?, rate_max(1.0, sigma2, cfg.n_antennas))
    } else {
        (f64::NAN, f64::NAN)
    };
    let (tx, tz) = truth.cartesian();
    Ok(TrialOutcome {
        rate,
        rate_max: rmax,
        nmse: nmse(h, &est.h_hat),
        theta_err: est.theta_hat - truth.theta_rad,
        range_err: est.r_hat.meters().map(|r| r - truth.r_m),
        position_err: est.cartesian().map(|(x, z)| ((x - tx).powi(2) + (z - tz).powi(2)).sqrt()),
    })
}

fn run_trial(spec: &SweepSpec, ctx: &ValueContext, value: f64, vi: usize, trial: usize) -> Result<TrialResult> {
    let seed = trial_seed(spec.seed, vi, trial);
    let pos_seed = match spec.position_scope {
        PositionScope::PerTrial => seed,
        PositionScope::PerValue => trial_seed(spec.seed, vi, usize::MAX),
    };
    let truth = draw_position(spec, value, pos_seed)?;
    let sig = synthesize_received(&ctx.cfg, &truth, ctx.snapshots, ctx.snr_db, splitmix64(seed), spec.fixed.model)?;
    let h = channel_for(&ctx.cfg, &truth, spec.fixed.model);
    let sigma2 = noise_variance(ctx.snr_db);
    let floor = spec.estimator.p1_floor.unwrap_or_else(|| resolvable_curvature(&ctx.cfg));

    let mut outcomes = Vec::with_capacity(spec.methods.len());
    for m in &spec.methods {
        let est = match m {
            SweepMethod::JacIsf => jac_estimate(&sig.samples, &ctx.cfg, Method::Isf, &spec.estimator)?,
            SweepMethod::JacGd => jac_estimate(&sig.samples, &ctx.cfg, Method::Gd, &spec.estimator)?,
            SweepMethod::MusicOnly => jac_estimate(&sig.samples, &ctx.cfg, Method::MusicOnly, &spec.estimator)?,
            SweepMethod::PolarGrid => {
                let grid = ctx.grid.as_ref().expect("grid built for polar_grid");
                estimate_polar_grid(&sig.samples, &ctx.cfg, grid, floor)?
            }
        };
        outcomes.push(outcome(&ctx.cfg, &truth, &h, &est, sigma2)?);
    }
    Ok(TrialResult { truth, outcomes })
}

fn summary_rows(spec: &SweepSpec, value: f64, method: &str, outs: &[TrialOutcome]) -> Vec<SweepRow> {
    let row = |metric: &str, mean: f64, std: f64, trials: usize| SweepRow {
        sweep_var: spec.sweep_var.name().to_string(),
        value,
        method: method.to_string(),
        metric: metric.to_string(),
        mean,
        std,
        trials,
        seed: spec.seed,
    };
    let n = outs.len();
    let col = |f: fn(&TrialOutcome) -> f64| outs.iter().map(f).collect::<Vec<_>>();
    let abs_std = |v: &[f64]| mean_std(&v.iter().map(|e| e.abs()).collect::<Vec<_>>()).1;

    let rate = mean_std(&col(|o| o.rate));
    let rmax = mean_std(&col(|o| o.rate_max));
    let nmse_lin = col(|o| o.nmse);
    let nmse_db = crate::metrics::aggregate_nmse_db(&nmse_lin);
    let nmse_db_std = mean_std(&nmse_lin.iter().map(|v| 10.0 * v.log10()).collect::<Vec<_>>()).1;
    let pos: Vec<f64> = outs.iter().filter_map(|o| o.position_err).collect();
    let range: Vec<f64> = outs.iter().filter_map(|o| o.range_err).collect();
    let theta = col(|o| o.theta_err);
    let rmse_pos = rmse_scalar(&pos);
    let sq: Vec<f64> = pos.iter().map(|e| e * e).collect();

    vec![
        row("rate", rate.0, rate.1, n),
        row("rate_max", rmax.0, rmax.1, n),
        row("nmse_db", nmse_db, nmse_db_std, n),
        row("rmse_pos_m", rmse_pos, abs_std(&pos), pos.len()),
        row("rmse_theta_rad", rmse_scalar(&theta), abs_std(&theta), n),
        row("rmse_r_m", rmse_scalar(&range), abs_std(&range), range.len()),
        row("mse_position", rmse_pos * rmse_pos, mean_std(&sq).1, pos.len()),
        row("farfield_count", (n - pos.len()) as f64, 0.0, n),
    ]
}

/// Bound rows at the trial-mean geometry: square roots of the numeric
/// bounds, reported under the matching RMSE metric names.
fn crlb_rows(spec: &SweepSpec, v: &ValueOutcomes) -> Result<Vec<SweepRow>> {
    let (value, truths) = (v.value, &v.truths);
    let sigma2 = noise_variance(v.snr_db);
    if !(sigma2 > 0.0) {
        return Ok(Vec::new());
    }
    let n = truths.len() as f64;
    let theta = truths.iter().map(|p| p.theta_rad).sum::<f64>() / n;
    let r = truths.iter().map(|p| p.r_m).sum::<f64>() / n;
    let rep = crlb_numeric_fim(&v.cfg, theta, r, &unit_pilots(v.snapshots), sigma2)?;
    let row = |metric: &str, v: f64| SweepRow {
        sweep_var: spec.sweep_var.name().to_string(),
        value,
        method: CRLB_METHOD.to_string(),
        metric: metric.to_string(),
        mean: v.sqrt(),
        std: 0.0,
        trials: truths.len(),
        seed: spec.seed,
    };
    Ok(vec![row("rmse_theta_rad", rep.crlb_theta), row("rmse_r_m", rep.crlb_r)])
}

/// Raw per-trial results at one sweep value.
#[derive(Debug, Clone)]
pub struct ValueOutcomes {
    pub value: f64,
    pub cfg: ArrayConfig,
    pub snapshots: usize,
    pub snr_db: f64,
    pub truths: Vec<SourcePosition>,
    /// One entry per configured method, in spec order.
    pub methods: Vec<(SweepMethod, Vec<TrialOutcome>)>,
}

/// Runs every trial and returns the unaggregated outcomes, in value and
/// trial order.
pub fn run_sweep_outcomes(spec: &SweepSpec) -> Result<Vec<ValueOutcomes>> {
    spec.validate()?;
    let mut contexts = Vec::with_capacity(spec.values.len());
    for vi in 0..spec.values.len() {
        let (cfg, snapshots, snr_db) = spec.point(vi)?;
        let grid = if spec.methods.contains(&SweepMethod::PolarGrid) {
            let g = &spec.polar_grid;
            Some(build_polar_grid(&cfg, g.angle_points, g.distance_points_for(cfg.n_antennas), g.r_min_m, g.r_max_m)?)
        } else {
            None
        };
        contexts.push(ValueContext { cfg, snapshots, snr_db, grid });
    }

    let planned = plan(spec);
    let results: Vec<Result<TrialResult>> = planned
        .par_iter()
        .map(|p| run_trial(spec, &contexts[p.value_index], p.value, p.value_index, p.trial))
        .collect();

    let mut out = Vec::with_capacity(spec.values.len());
    let mut it = results.into_iter();
    for (ctx, &value) in contexts.iter().zip(&spec.values) {
        let trials: Vec<TrialResult> = it.by_ref().take(spec.trials).collect::<Result<_>>()?;
        let methods = spec
            .methods
            .iter()
            .enumerate()
            .map(|(mi, m)| (*m, trials.iter().map(|t| t.outcomes[mi]).collect()))
            .collect();
        out.push(ValueOutcomes {
            value,
            cfg: ctx.cfg,
            snapshots: ctx.snapshots,
            snr_db: ctx.snr_db,
            truths: trials.iter().map(|t| t.truth).collect(),
            methods,
        });
    }
    Ok(out)
}

/// Runs the sweep on the current rayon pool and aggregates it into rows.
/// Output is independent of the pool size.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for v in run_sweep_outcomes(spec)? {
        for (m, outs) in &v.methods {
            rows.extend(summary_rows(spec, v.value, m.name(), outs));
        }
        rows.extend(crlb_rows(spec, &v)?);
    }
    Ok(rows)
}

/// Runs the sweep on a dedicated pool with `threads` workers.
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::error::JacError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(spec))
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.sweep_var.clone(),
            r.value.to_string(),
            r.method.clone(),
            r.metric.clone(),
            r.mean.to_string(),
            r.std.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::JacError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_to_json(rows: &[SweepRow]) -> String {
    // non-finite numbers become null
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::JacError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::error::JacError::Io(io),
        other => crate::error::JacError::Format(format!("{other:?}")),
    }
}
