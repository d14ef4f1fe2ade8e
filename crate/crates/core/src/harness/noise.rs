use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, fmt_f64, random_phantom, sample_mask, thread_pool, write_json, ExperimentConfig};
use crate::error::{Error, Result};
use crate::index_sets::IndexSet2D;
use crate::lifting::LiftOperator;
use crate::phantom::FourierGrid;
use crate::solver::{solve_equality, solve_noisy, SolverConfig};

const NOISE_TAG: u64 = 3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseRow {
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    /// `||T(f) - T(g)||_F`.
    pub lifted_err: f64,
    /// `5 |Gamma|^2 delta`.
    pub bound: f64,
    /// `50 delta |Gamma|`, an empirical slack check.
    pub slack_bound: f64,
    pub rel_err: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseReport {
    pub rows: Vec<NoiseRow>,
    /// Mean lifted error per noise level, in the order of `deltas`.
    pub mean_by_delta: Vec<(f64, f64)>,
    pub soft_failures: usize,
    pub wall_time: f64,
}

/// Unit-norm complex Gaussian direction supported on the non-DC samples.
fn noise_direction(mask: &[bool], dc: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<Complex64> = mask
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if m && i != dc {
                Complex64::new(re, im)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let n = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        z.iter_mut().for_each(|v| *v /= n);
    }
    z
}

/// Noisy recovery over `cfg.deltas`.
///
/// Each trial fixes a phantom, a sample set and a noise direction, then
/// scales the noise to `||P_Omega eta||_2 = delta` exactly for every level.
/// The DC sample stays exact because the solver holds it at the data.
/// `delta = 0` runs the equality solver.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<NoiseReport> {
    cfg.validate()?;
    if cfg.deltas.is_empty() {
        return Err(Error::Config("noise sweep needs at least one delta".into()));
    }
    cfg.check_regime(cfg.k, cfg.k0)?;
    let start = Instant::now();
    let gamma = cfg.gamma();
    let op = LiftOperator::new(gamma, IndexSet2D::square(cfg.k))?;
    let dc = op.dc_index().ok_or(Error::MissingDc)?;
    let lambda0 = IndexSet2D::square(cfg.k0);
    let n = gamma.len() as f64;
    let pool = thread_pool()?;
    let per_trial: Vec<Vec<NoiseRow>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = derive_seed(cfg.master_seed, &[NOISE_TAG, trial as u64]);
                let (_, truth) = random_phantom(&lambda0, &gamma, derive_seed(seed, &[1]), cfg.smoothness)?;
                let mask = sample_mask(&gamma, cfg.fraction, derive_seed(seed, &[2]), cfg.with_replacement)?;
                let z = noise_direction(&mask, dc, derive_seed(seed, &[3]));
                let t_truth = op.apply(truth.values())?;
                cfg.deltas
                    .iter()
                    .map(|&delta| {
                        let noisy: Vec<Complex64> =
                            truth.values().iter().zip(&z).map(|(&f, &e)| f + e * delta).collect();
                        let samples = FourierGrid::new(gamma, noisy)?.with_mask(mask.clone())?;
                        let scfg = SolverConfig { delta, ..cfg.solver.clone() };
                        let rep = if delta == 0.0 {
                            solve_equality(&op, &samples, &scfg)?
                        } else {
                            solve_noisy(&op, &samples, &scfg)?
                        };
                        if !rep.converged {
                            log::warn!("noise delta {delta} trial {trial} (seed {seed}): no convergence");
                        }
                        let lifted_err = (&t_truth - op.apply(rep.recovered.values())?).norm_l2();
                        Ok(NoiseRow {
                            delta,
                            trial,
                            seed,
                            lifted_err,
                            bound: 5.0 * n * n * delta,
                            slack_bound: 50.0 * delta * n,
                            rel_err: rep.recovered.rel_err_without_dc(&truth)?,
                            converged: rep.converged,
                            iterations: rep.iterations,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<NoiseRow> = per_trial.into_iter().flatten().collect();
    let mean_by_delta = cfg
        .deltas
        .iter()
        .map(|&d| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.delta == d).map(|r| r.lifted_err).collect();
            (d, errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect();
    Ok(NoiseReport {
        soft_failures: rows.iter().filter(|r| !r.converged).count(),
        rows,
        mean_by_delta,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct NoiseMeta<'a> {
    trial_policy: &'static str,
    config: &'a ExperimentConfig,
    mean_by_delta: &'a [(f64, f64)],
    soft_failures: usize,
    wall_time: f64,
}

/// Writes `noise.csv` and `noise_meta.json` into `dir`.
pub fn write_noise(report: &NoiseReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("noise.csv"))?;
    w.write_record([
        "delta",
        "trial",
        "seed",
        "lifted_err",
        "bound",
        "slack_bound",
        "rel_err",
        "converged",
        "iterations",
    ])?;
    for r in &report.rows {
        w.write_record([
            fmt_f64(r.delta),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_f64(r.lifted_err),
            fmt_f64(r.bound),
            fmt_f64(r.slack_bound),
            fmt_f64(r.rel_err),
            r.converged.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    let meta = NoiseMeta {
        trial_policy: super::TRIAL_POLICY,
        config: cfg,
        mean_by_delta: &report.mean_by_delta,
        soft_failures: report.soft_failures,
        wall_time: report.wall_time,
    };
    write_json(&dir.join("noise_meta.json"), &meta)
}
