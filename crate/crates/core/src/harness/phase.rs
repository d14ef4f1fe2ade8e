use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, fmt_f64, random_phantom, sample_mask, svg, thread_pool, write_json, ExperimentConfig};
use crate::error::{Error, Result};
use crate::index_sets::IndexSet2D;
use crate::lifting::LiftOperator;
use crate::solver::solve_equality;

/// Which index set a phase sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// `Lambda_1` (K) varies, `Lambda_0` fixed at `k0`.
    Filter,
    /// `Lambda_0` (K0) varies, `Lambda_1` fixed at `k`.
    Edge,
}

impl Axis {
    fn tag(self) -> u64 {
        match self {
            Axis::Filter => 1,
            Axis::Edge => 2,
        }
    }

    pub fn param_name(self) -> &'static str {
        match self {
            Axis::Filter => "K",
            Axis::Edge => "K0",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Filter => "filter",
            Axis::Edge => "edge",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filter" => Ok(Axis::Filter),
            "edge" => Ok(Axis::Edge),
            _ => Err(Error::Config(format!("unknown axis `{s}` (filter, edge)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub param: u32,
    pub fraction: f64,
    pub trial: usize,
    pub seed: u64,
    pub rel_err: f64,
    pub success: bool,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    /// K for the filter axis, K0 for the edge axis.
    pub param: u32,
    pub fraction: f64,
    pub success_count: usize,
    pub trials: usize,
    pub mean_rel_err: f64,
}

impl PhaseCell {
    pub fn rate(&self) -> f64 {
        self.success_count as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseResult {
    pub axis: Axis,
    pub params: Vec<u32>,
    pub fractions: Vec<f64>,
    /// Parameter-major: `cells[p * fractions.len() + f]`.
    pub cells: Vec<PhaseCell>,
    pub trials: Vec<TrialRecord>,
    /// Trials that hit the iteration cap; they count as failures.
    pub soft_failures: usize,
    pub wall_time: f64,
}

impl PhaseResult {
    pub fn cell(&self, param: u32, fraction: f64) -> Option<&PhaseCell> {
        self.cells.iter().find(|c| c.param == param && c.fraction == fraction)
    }

    /// Success rate summed over fractions, per parameter.
    pub fn area(&self) -> Vec<(u32, f64)> {
        self.params
            .iter()
            .map(|&p| (p, self.cells.iter().filter(|c| c.param == p).map(PhaseCell::rate).sum()))
            .collect()
    }
}

struct Job {
    param: u32,
    fraction: f64,
    trial: usize,
    seed: u64,
    op: usize,
    lambda0: IndexSet2D,
}

/// Success-rate grid over (parameter x fraction) cells.
///
/// Trial seeds hash `(axis, K0, fraction, trial)`, so the filter sweep sees
/// the same phantoms and sample sets for every K.
pub fn run_phase_transition(cfg: &ExperimentConfig, axis: Axis) -> Result<PhaseResult> {
    cfg.validate()?;
    let start = Instant::now();
    let gamma = cfg.gamma();
    let params = match axis {
        Axis::Filter => cfg.k_values.clone(),
        Axis::Edge => cfg.k0_values.clone(),
    };
    if params.is_empty() || cfg.fractions.is_empty() {
        return Err(Error::Config("phase sweep needs parameters and fractions".into()));
    }
    let mut ops = Vec::new();
    let mut jobs = Vec::new();
    for &p in &params {
        let (k, k0) = match axis {
            Axis::Filter => (p, cfg.k0),
            Axis::Edge => (cfg.k, p),
        };
        cfg.check_regime(k, k0)?;
        ops.push(LiftOperator::new(gamma, IndexSet2D::square(k))?);
        for &fraction in &cfg.fractions {
            for trial in 0..cfg.trials {
                jobs.push(Job {
                    param: p,
                    fraction,
                    trial,
                    seed: derive_seed(cfg.master_seed, &[axis.tag(), k0 as u64, fraction.to_bits(), trial as u64]),
                    op: ops.len() - 1,
                    lambda0: IndexSet2D::square(k0),
                });
            }
        }
    }
    let pool = thread_pool()?;
    let trials: Vec<TrialRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let t0 = Instant::now();
                let (_, truth) = random_phantom(&job.lambda0, &gamma, derive_seed(job.seed, &[1]), cfg.smoothness)?;
                let mask = sample_mask(&gamma, job.fraction, derive_seed(job.seed, &[2]), cfg.with_replacement)?;
                let samples = truth.clone().with_mask(mask)?;
                let rep = solve_equality(&ops[job.op], &samples, &cfg.solver)?;
                let rel_err = rep.recovered.rel_err_without_dc(&truth)?;
                if !rep.converged {
                    log::warn!(
                        "{axis} {}={} fraction {} trial {} (seed {}): no convergence in {} iterations",
                        axis.param_name(),
                        job.param,
                        job.fraction,
                        job.trial,
                        job.seed,
                        rep.iterations
                    );
                }
                Ok(TrialRecord {
                    param: job.param,
                    fraction: job.fraction,
                    trial: job.trial,
                    seed: job.seed,
                    rel_err,
                    success: rep.converged && rel_err < cfg.threshold,
                    converged: rep.converged,
                    iterations: rep.iterations,
                    wall_time: t0.elapsed().as_secs_f64(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let cells = trials
        .chunks(cfg.trials)
        .map(|chunk| PhaseCell {
            param: chunk[0].param,
            fraction: chunk[0].fraction,
            success_count: chunk.iter().filter(|t| t.success).count(),
            trials: chunk.len(),
            mean_rel_err: chunk.iter().map(|t| t.rel_err).sum::<f64>() / chunk.len() as f64,
        })
        .collect();
    let soft_failures = trials.iter().filter(|t| !t.converged).count();
    Ok(PhaseResult {
        axis,
        params,
        fractions: cfg.fractions.clone(),
        cells,
        trials,
        soft_failures,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Smallest fraction from which the success rate of `param` stays at or
/// above `level`.
pub fn minimal_sufficient_fraction(result: &PhaseResult, param: u32, level: f64) -> Option<f64> {
    let mut cells: Vec<&PhaseCell> = result.cells.iter().filter(|c| c.param == param).collect();
    cells.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
    let mut best = None;
    for c in cells.iter().rev() {
        if c.rate() >= level {
            best = Some(c.fraction);
        } else {
            break;
        }
    }
    best
}

/// Least-squares line `y = slope x + intercept` and its `R^2`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config("linear fit needs two or more paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("linear fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, my - slope * mx, r2))
}

#[derive(Serialize)]
struct PhaseMeta<'a> {
    axis: Axis,
    trial_policy: &'static str,
    config: &'a ExperimentConfig,
    soft_failures: usize,
    wall_time: f64,
    minimal_sufficient_fraction: Vec<(u32, Option<f64>)>,
}

/// Writes `phase_<axis>_trials.csv`, `phase_<axis>_cells.csv`,
/// `phase_<axis>.svg` and `phase_<axis>_meta.json` into `dir`.
///
/// The CSV files hold no timings, so they are byte-identical across runs.
pub fn write_phase(result: &PhaseResult, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let axis = result.axis;
    let pname = axis.param_name();

    let mut w = csv::Writer::from_path(dir.join(format!("phase_{axis}_trials.csv")))?;
    w.write_record([pname, "fraction", "trial", "seed", "rel_err", "success", "converged", "iterations"])?;
    for t in &result.trials {
        w.write_record([
            t.param.to_string(),
            fmt_f64(t.fraction),
            t.trial.to_string(),
            t.seed.to_string(),
            fmt_f64(t.rel_err),
            t.success.to_string(),
            t.converged.to_string(),
            t.iterations.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(format!("phase_{axis}_cells.csv")))?;
    w.write_record([pname, "fraction", "success_count", "trials", "mean_rel_err"])?;
    for c in &result.cells {
        w.write_record([
            c.param.to_string(),
            fmt_f64(c.fraction),
            c.success_count.to_string(),
            c.trials.to_string(),
            fmt_f64(c.mean_rel_err),
        ])?;
    }
    w.flush()?;

    let rates: Vec<Vec<f64>> = result
        .params
        .iter()
        .map(|&p| result.fractions.iter().map(|&f| result.cell(p, f).map_or(0.0, PhaseCell::rate)).collect())
        .collect();
    let doc = svg::heatmap_svg(
        &format!("{axis} sweep: success rate"),
        "sampling fraction",
        pname,
        &result.fractions.iter().map(|f| format!("{f}")).collect::<Vec<_>>(),
        &result.params.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        &rates,
    );
    std::fs::write(dir.join(format!("phase_{axis}.svg")), doc)?;

    let meta = PhaseMeta {
        axis,
        trial_policy: super::TRIAL_POLICY,
        config: cfg,
        soft_failures: result.soft_failures,
        wall_time: result.wall_time,
        minimal_sufficient_fraction: result
            .params
            .iter()
            .map(|&p| (p, minimal_sufficient_fraction(result, p, cfg.success_level)))
            .collect(),
    };
    write_json(&dir.join(format!("phase_{axis}_meta.json")), &meta)
}
