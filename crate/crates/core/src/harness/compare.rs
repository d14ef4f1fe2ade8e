use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, fmt_f64, random_phantom, sample_mask, thread_pool, write_json, ExperimentConfig};
use crate::error::Result;
use crate::index_sets::IndexSet2D;
use crate::io::write_pgm;
use crate::lifting::LiftOperator;
use crate::solver::solve_equality;
use crate::tv::{raster_from_coeffs, snr_db, solve_tv};

const COMPARE_TAG: u64 = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub trial: usize,
    pub seed: u64,
    pub snr_proposed: f64,
    pub snr_tv: f64,
    pub proposed_converged: bool,
    pub tv_converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Side-by-side rasters `[truth | proposed | TV]`, row-major.
    #[serde(skip)]
    pub panels: Vec<Vec<f64>>,
    pub panel_dims: (usize, usize),
    /// Trials where the proposed method is at least as good as TV.
    pub wins: usize,
    pub soft_failures: usize,
    pub wall_time: f64,
}

fn side_by_side(images: &[Vec<f64>], nx: usize, ny: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(images.len() * nx * ny);
    for iy in 0..ny {
        for img in images {
            out.extend_from_slice(&img[iy * nx..(iy + 1) * nx]);
        }
    }
    out
}

/// Feeds the same samples to the lifted nuclear-norm solver and to discrete
/// TV; SNR is measured on the coefficients over `Gamma`.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    cfg.check_regime(cfg.k, cfg.k0)?;
    let start = Instant::now();
    let gamma = cfg.gamma();
    let [nx, ny] = gamma.dims();
    let op = LiftOperator::new(gamma, IndexSet2D::square(cfg.k))?;
    let lambda0 = IndexSet2D::square(cfg.k0);
    let pool = thread_pool()?;
    let results: Vec<(ComparisonRow, Vec<f64>)> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = derive_seed(cfg.master_seed, &[COMPARE_TAG, trial as u64]);
                let (_, truth) = random_phantom(&lambda0, &gamma, derive_seed(seed, &[1]), cfg.smoothness)?;
                let mask = sample_mask(&gamma, cfg.fraction, derive_seed(seed, &[2]), cfg.with_replacement)?;
                let samples = truth.clone().with_mask(mask)?;
                let prop = solve_equality(&op, &samples, &cfg.solver)?;
                let tv = solve_tv(&samples, &cfg.tv)?;
                if !prop.converged || !tv.converged {
                    log::warn!("comparison trial {trial} (seed {seed}): a solver did not converge");
                }
                let row = ComparisonRow {
                    trial,
                    seed,
                    snr_proposed: snr_db(&truth, &prop.recovered)?,
                    snr_tv: snr_db(&truth, &tv.recovered)?,
                    proposed_converged: prop.converged,
                    tv_converged: tv.converged,
                };
                let panel = side_by_side(
                    &[
                        raster_from_coeffs(&truth)?.real_part(),
                        raster_from_coeffs(&prop.recovered)?.real_part(),
                        tv.image.real_part(),
                    ],
                    nx,
                    ny,
                );
                Ok((row, panel))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (rows, panels): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(ComparisonReport {
        wins: rows.iter().filter(|r| r.snr_proposed >= r.snr_tv).count(),
        soft_failures: rows.iter().filter(|r| !r.proposed_converged || !r.tv_converged).count(),
        rows,
        panels,
        panel_dims: (3 * nx, ny),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct CompareMeta<'a> {
    trial_policy: &'static str,
    panel_layout: &'static str,
    config: &'a ExperimentConfig,
    wins: usize,
    soft_failures: usize,
    wall_time: f64,
}

/// Writes `compare.csv`, `compare_meta.json` and one
/// `compare_<trial>.pgm` per trial into `dir`.
pub fn write_comparison(report: &ComparisonReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
    w.write_record(["trial", "seed", "snr_proposed_db", "snr_tv_db", "proposed_converged", "tv_converged"])?;
    for r in &report.rows {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_f64(r.snr_proposed),
            fmt_f64(r.snr_tv),
            r.proposed_converged.to_string(),
            r.tv_converged.to_string(),
        ])?;
    }
    w.flush()?;
    let (width, height) = report.panel_dims;
    for (r, panel) in report.rows.iter().zip(&report.panels) {
        let f = File::create(dir.join(format!("compare_{}.pgm", r.trial)))?;
        write_pgm(BufWriter::new(f), panel, width, height)?;
    }
    let meta = CompareMeta {
        trial_policy: super::TRIAL_POLICY,
        panel_layout: "truth | proposed | tv, bandlimited rasters on the grid lattice",
        config: cfg,
        wins: report.wins,
        soft_failures: report.soft_failures,
        wall_time: report.wall_time,
    };
    write_json(&dir.join("compare_meta.json"), &meta)
}
