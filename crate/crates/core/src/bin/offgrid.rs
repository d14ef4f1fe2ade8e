use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use offgrid::analysis::rho_report;
use offgrid::harness::{
    linear_fit, minimal_sufficient_fraction, run_comparison, run_noise_sweep, run_phase_transition,
    sample_mask, write_comparison, write_noise, write_phase, Axis, ExperimentConfig,
};
use offgrid::io::{read_pgm, write_lmat, write_pgm};
use offgrid::linalg::{numerical_rank, singular_values};
use offgrid::solver::SolverConfig;
use offgrid::trigpoly::TraceOptions;
use offgrid::tv::{circulant_lifting_nuclear_norm, tv_seminorm, DiscreteImage};
use offgrid::{rank_bound, solve_equality, solve_noisy, Error, FourierGrid, IndexSet2D, LiftOperator, Phantom};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOFT: u8 = 3;

#[derive(Parser)]
#[command(name = "offgrid", version, about = "Off-the-grid recovery of piecewise-constant images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phantom generation.
    Phantom {
        #[command(subcommand)]
        action: PhantomCmd,
    },
    /// Lifted-matrix inspection.
    Lift {
        #[command(subcommand)]
        action: LiftCmd,
    },
    /// Recover a coefficient grid from its sampled entries.
    Solve(SolveArgs),
    /// Edge-set analysis.
    Analyze {
        #[command(subcommand)]
        action: AnalyzeCmd,
    },
    /// Phase-transition sweep over filter or edge bandwidth.
    Phase {
        #[arg(value_parser = parse_axis)]
        axis: Axis,
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Noise sweep of the relaxed solver.
    Noise(ExpArgs),
    /// Comparison against discrete TV on identical samples.
    Compare(ExpArgs),
    /// TV and circulant-lifting nuclear norm of a PGM image.
    Tvnorm {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum PhantomCmd {
    /// Draw a random phantom (or the stripe) and write its coefficients.
    Make {
        /// Edge bandwidth half-width.
        #[arg(long, default_value_t = 1)]
        k0: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        smoothness: f64,
        /// Half-width of the coefficient grid.
        #[arg(long, default_value_t = 16)]
        grid_half: u32,
        /// Use the vertical stripe instead of a random draw.
        #[arg(long)]
        stripe: bool,
        /// Keep only a random fraction of the coefficients (plus DC).
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, default_value_t = 0)]
        mask_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write an `n x n` raster of the indicator.
        #[arg(long)]
        pgm: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        raster: usize,
    },
}

#[derive(Subcommand)]
enum LiftCmd {
    /// Singular values and numerical rank of the lifting.
    Rank {
        #[arg(long)]
        input: PathBuf,
        /// Filter half-width.
        #[arg(long)]
        k: u32,
        /// Edge half-width for the predicted rank.
        #[arg(long)]
        k0: Option<u32>,
        #[arg(long, default_value_t = 1e-8)]
        rel_tol: f64,
        /// Write the lifted matrix as LMAT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// FGRD file with a sample mask.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: u32,
    /// Solver configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise radius; overrides the config.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// JSON report without the recovered grid.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Incoherence estimate of a random edge set.
    Rho {
        #[arg(long, default_value_t = 1)]
        k0: u32,
        #[arg(long, default_value_t = 3)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        smoothness: f64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
}

#[derive(Args)]
struct ExpArgs {
    /// Experiment configuration (JSON); defaults to the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `desk` (33x33) or `large` (65x65).
    #[arg(long, default_value = "desk")]
    profile: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Comma-separated sampling fractions.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Comma-separated filter half-widths.
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<u32>>,
    /// Comma-separated edge half-widths.
    #[arg(long, value_delimiter = ',')]
    k0_values: Option<Vec<u32>>,
    #[arg(long)]
    grid_half: Option<u32>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    k0: Option<u32>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    smoothness: Option<f64>,
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ExpArgs {
    fn resolve(&self) -> offgrid::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::profile(&self.profile)?,
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(trials, fractions, k_values, k0_values, grid_half, k, k0, fraction, smoothness);
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(d) = &self.out {
            cfg.output_dir = d.clone();
        }
        if let Some(m) = self.max_iters {
            cfg.solver.max_iters = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Success, or success with solver soft failures.
enum Outcome {
    Done,
    Soft(usize),
}

fn print_json<T: Serialize>(value: &T) -> offgrid::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_grid(path: &Path) -> offgrid::Result<FourierGrid> {
    FourierGrid::read_fgrd(BufReader::new(File::open(path)?))
}

fn write_grid(path: &Path, g: &FourierGrid) -> offgrid::Result<()> {
    g.write_fgrd(BufWriter::new(File::create(path)?))
}

fn soft(n: usize) -> Outcome {
    if n == 0 {
        Outcome::Done
    } else {
        Outcome::Soft(n)
    }
}

fn run(cli: Cli) -> offgrid::Result<Outcome> {
    match cli.command {
        Command::Phantom {
            action:
                PhantomCmd::Make {
                    k0,
                    seed,
                    smoothness,
                    grid_half,
                    stripe,
                    fraction,
                    mask_seed,
                    out,
                    pgm,
                    raster,
                },
        } => {
            let gamma = IndexSet2D::square(grid_half);
            let ph = if stripe {
                Phantom::stripe()?
            } else {
                Phantom::random(&IndexSet2D::square(k0), seed, smoothness, &TraceOptions::default())?
            };
            let mut f = ph.fourier_coeffs(&gamma)?;
            if let Some(frac) = fraction {
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::Config(format!("fraction {frac} outside (0, 1]")));
                }
                f.set_mask(sample_mask(&gamma, frac, mask_seed, false)?)?;
            }
            write_grid(&out, &f)?;
            if let Some(p) = pgm {
                write_pgm(BufWriter::new(File::create(p)?), &ph.rasterize(raster), raster, raster)?;
            }
            Ok(Outcome::Done)
        }
        Command::Lift {
            action: LiftCmd::Rank { input, k, k0, rel_tol, out },
        } => {
            let f = read_grid(&input)?;
            let op = LiftOperator::new(f.grid(), IndexSet2D::square(k))?;
            let t = op.build_matrix(&f)?;
            if let Some(p) = out {
                write_lmat(BufWriter::new(File::create(p)?), t.as_ref())?;
            }
            let s = singular_values(t.as_ref())?;
            let rank = numerical_rank(&s, rel_tol);
            #[derive(Serialize)]
            struct RankReport {
                rows: usize,
                cols: usize,
                rank: usize,
                predicted_rank: Option<usize>,
                gap_ratio: Option<f64>,
                singular_values: Vec<f64>,
            }
            let predicted_rank = match k0 {
                Some(k0) => Some(rank_bound(&IndexSet2D::square(k), &IndexSet2D::square(k0))?),
                None => None,
            };
            print_json(&RankReport {
                rows: op.rows(),
                cols: op.cols(),
                rank,
                predicted_rank,
                gap_ratio: (rank > 0 && rank < s.len()).then(|| s[rank - 1] / s[rank]),
                singular_values: s,
            })?;
            Ok(Outcome::Done)
        }
        Command::Solve(a) => {
            let mut cfg: SolverConfig = match &a.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => SolverConfig::default(),
            };
            if let Some(d) = a.delta {
                cfg.delta = d;
            }
            if let Some(m) = a.max_iters {
                cfg.max_iters = m;
            }
            cfg.validate()?;
            let samples = read_grid(&a.input)?;
            if samples.mask().is_none() {
                return Err(Error::Config(format!("{} carries no sample mask", a.input.display())));
            }
            let op = LiftOperator::new(samples.grid(), IndexSet2D::square(a.k))?;
            let rep = if cfg.delta == 0.0 {
                solve_equality(&op, &samples, &cfg)?
            } else {
                solve_noisy(&op, &samples, &cfg)?
            };
            write_grid(&a.out, &rep.recovered)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                iterations: usize,
                converged: bool,
                wall_time: f64,
                beta: f64,
                data_residual: f64,
                objective: &'a [f64],
                primal_residuals: &'a [f64],
            }
            let summary = Summary {
                iterations: rep.iterations,
                converged: rep.converged,
                wall_time: rep.wall_time,
                beta: rep.beta,
                data_residual: rep.data_residual,
                objective: &rep.objective,
                primal_residuals: &rep.primal_residuals,
            };
            match a.report {
                Some(p) => serde_json::to_writer_pretty(BufWriter::new(File::create(p)?), &summary)?,
                None => eprintln!(
                    "iterations {} converged {} time {:.2}s",
                    rep.iterations, rep.converged, rep.wall_time
                ),
            }
            Ok(soft(usize::from(!rep.converged)))
        }
        Command::Analyze {
            action: AnalyzeCmd::Rho { k0, k, seed, smoothness, restarts },
        } => {
            let l0 = IndexSet2D::square(k0);
            let l1 = IndexSet2D::square(k);
            let ph = Phantom::random(&l0, seed, smoothness, &TraceOptions::default())?;
            let curve = ph.curve().ok_or(Error::UntracedCurve)?;
            let gamma = l1.dilate(2)?.minkowski_sum(&l0);
            let op = LiftOperator::new(gamma, l1)?;
            let t = op.build_matrix(&ph.fourier_coeffs(&gamma)?)?;
            print_json(&rho_report(curve, &l1, &l0, restarts, Some(t.as_ref()))?)?;
            Ok(Outcome::Done)
        }
        Command::Phase { axis, exp } => {
            let cfg = exp.resolve()?;
            let res = run_phase_transition(&cfg, axis)?;
            write_phase(&res, &cfg, &cfg.output_dir)?;
            for &p in &res.params {
                let m = minimal_sufficient_fraction(&res, p, cfg.success_level);
                let rates: Vec<String> = res
                    .fractions
                    .iter()
                    .map(|&f| format!("{}", res.cell(p, f).map_or(0, |c| c.success_count)))
                    .collect();
                println!(
                    "{}={p:<3} successes [{}] minimal fraction {}",
                    axis.param_name(),
                    rates.join(" "),
                    m.map_or("none".into(), |v| v.to_string())
                );
            }
            if axis == Axis::Edge {
                let pts: Vec<(f64, f64)> = res
                    .params
                    .iter()
                    .filter_map(|&p| {
                        minimal_sufficient_fraction(&res, p, cfg.success_level)
                            .map(|m| (((2 * p + 1) * (2 * p + 1)) as f64, m * (cfg.gamma().len() - 1) as f64))
                    })
                    .collect();
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                if let Ok((slope, icpt, r2)) = linear_fit(&x, &y) {
                    println!("|Omega| ~ {slope:.3} |Lambda0| + {icpt:.1}, R^2 = {r2:.3}");
                }
            }
            println!(
                "{} soft failures, {:.1}s, output in {}",
                res.soft_failures,
                res.wall_time,
                cfg.output_dir.display()
            );
            Ok(soft(res.soft_failures))
        }
        Command::Noise(exp) => {
            let cfg = exp.resolve()?;
            let rep = run_noise_sweep(&cfg)?;
            write_noise(&rep, &cfg, &cfg.output_dir)?;
            for (d, m) in &rep.mean_by_delta {
                println!("delta {d:e}: mean ||T(f) - T(g)||_F = {m:.4e}");
            }
            Ok(soft(rep.soft_failures))
        }
        Command::Compare(exp) => {
            let cfg = exp.resolve()?;
            let rep = run_comparison(&cfg)?;
            write_comparison(&rep, &cfg, &cfg.output_dir)?;
            for r in &rep.rows {
                println!(
                    "trial {:<3} seed {:<20} proposed {:7.2} dB  tv {:7.2} dB",
                    r.trial, r.seed, r.snr_proposed, r.snr_tv
                );
            }
            println!("proposed >= tv in {}/{} trials", rep.wins, rep.rows.len());
            Ok(soft(rep.soft_failures))
        }
        Command::Tvnorm { input } => {
            let (w, h, px) = read_pgm(BufReader::new(File::open(&input)?))?;
            let pixels: Vec<f64> = px.iter().map(|&v| v as f64 / 65535.0).collect();
            let img = DiscreteImage::from_real(w, h, &pixels)?;
            let tv = tv_seminorm(&img);
            let nuc = circulant_lifting_nuclear_norm(&img);
            #[derive(Serialize)]
            struct TvNorm {
                width: usize,
                height: usize,
                tv: f64,
                lifting_nuclear_norm: f64,
                ratio: Option<f64>,
            }
            print_json(&TvNorm {
                width: w,
                height: h,
                tv,
                lifting_nuclear_norm: nuc,
                ratio: (tv > 0.0).then(|| nuc / tv),
            })?;
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Soft(n)) => {
            eprintln!("warning: {n} solve(s) stopped at the iteration cap");
            ExitCode::from(EXIT_SOFT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}
