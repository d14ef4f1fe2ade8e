//! Seeded experiment drivers: phase transitions, noise sweeps and the TV
//! comparison, with CSV, SVG and PGM output.
//!
//! Every trial draws a fresh phantom and a fresh sample set from a seed
//! derived by counter hashing from the master seed, so results do not depend
//! on scheduling and each CSV row can be replayed on its own.

mod compare;
mod noise;
mod phase;
mod svg;

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::IndexSet2D;
use crate::phantom::{FourierGrid, Phantom};
use crate::solver::{SolverConfig, SvtMethod};
use crate::trigpoly::TraceOptions;
use crate::tv::TvConfig;

pub use compare::{run_comparison, write_comparison, ComparisonReport, ComparisonRow};
pub use noise::{run_noise_sweep, write_noise, NoiseReport, NoiseRow};
pub use phase::{
    linear_fit, minimal_sufficient_fraction, run_phase_transition, write_phase, Axis, PhaseCell, PhaseResult,
    TrialRecord,
};
pub use svg::heatmap_svg;

/// Recorded in every metadata file.
pub const TRIAL_POLICY: &str = "phantom and sample set redrawn for every trial";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Half-width of the square grid `Gamma`; 16 gives 33x33.
    pub grid_half: u32,
    /// Half-width of `Lambda_0` for the filter sweep, noise sweep and comparison.
    pub k0: u32,
    /// Half-width of `Lambda_1` for the edge sweep, noise sweep and comparison.
    pub k: u32,
    /// Filter half-widths visited by the filter sweep.
    pub k_values: Vec<u32>,
    /// Edge half-widths visited by the edge sweep.
    pub k0_values: Vec<u32>,
    /// Sampling fractions of `Gamma \ {0}` for the phase sweeps.
    pub fractions: Vec<f64>,
    /// Sampling fraction for the noise sweep and the comparison.
    pub fraction: f64,
    pub trials: usize,
    pub master_seed: u64,
    /// Success iff the relative error over `Gamma \ {0}` is below this.
    pub threshold: f64,
    /// Success rate defining the minimal sufficient fraction.
    pub success_level: f64,
    /// Damping of the random edge polynomials.
    pub smoothness: f64,
    /// Reject configurations with `Gamma` not containing `2 Lambda_1 + Lambda_0`.
    pub theorem_regime: bool,
    /// Draw sample sets with replacement (duplicates collapse).
    pub with_replacement: bool,
    /// Noise levels `delta` (unweighted l2 norm over the samples).
    pub deltas: Vec<f64>,
    pub solver: SolverConfig,
    pub tv: TvConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// 33x33 grid sized to finish the phase sweeps within a couple of hours
    /// on one core.
    pub fn desk() -> Self {
        Self {
            grid_half: 16,
            k0: 1,
            k: 6,
            k_values: vec![1, 3, 5, 7],
            k0_values: vec![1, 2, 3, 4],
            fractions: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0],
            fraction: 0.5,
            trials: 10,
            master_seed: 0,
            threshold: 1e-3,
            success_level: 0.5,
            smoothness: 0.0,
            theorem_regime: true,
            with_replacement: false,
            deltas: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
            solver: SolverConfig {
                beta: Some(3.0),
                max_iters: 500,
                tol_primal: 1e-5,
                tol_change: 1e-5,
                relaxation: 1.8,
                svt: SvtMethod::Gram,
                ..SolverConfig::default()
            },
            tv: TvConfig::default(),
            output_dir: PathBuf::from("results"),
        }
    }

    /// The 65x65 grid of the original experiments; expect days of CPU time.
    pub fn large() -> Self {
        Self {
            grid_half: 32,
            k: 14,
            k_values: vec![3, 7, 11, 15],
            k0_values: vec![1, 2, 3, 4],
            fractions: (1..=10).map(|i| i as f64 / 10.0).collect(),
            solver: SolverConfig {
                max_iters: 1000,
                ..Self::desk().solver
            },
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "large" => Ok(Self::large()),
            _ => Err(Error::Config(format!("unknown profile `{name}` (desk, large)"))),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn gamma(&self) -> IndexSet2D {
        IndexSet2D::square(self.grid_half)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.threshold > 0.0) {
            return bad(format!("threshold {} must be positive", self.threshold));
        }
        if !(0.0..=1.0).contains(&self.success_level) {
            return bad(format!("success level {} outside [0, 1]", self.success_level));
        }
        if !(self.smoothness >= 0.0) {
            return bad(format!("smoothness {} must be non-negative", self.smoothness));
        }
        for &f in self.fractions.iter().chain([&self.fraction]) {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("sampling fraction {f} outside (0, 1]"));
            }
        }
        for &d in &self.deltas {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("noise level {d} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Checks that `(K, K0)` fits the grid, and `2K + K0 <= grid_half` when
    /// the theorem-regime flag is set.
    pub fn check_regime(&self, k: u32, k0: u32) -> Result<()> {
        if k0 == 0 || k == 0 || k >= self.grid_half {
            return Err(Error::Config(format!(
                "need K0 >= 1 and 1 <= K < {}, got K = {k}, K0 = {k0}",
                self.grid_half
            )));
        }
        if self.theorem_regime && 2 * k + k0 > self.grid_half {
            return Err(Error::Config(format!(
                "K = {k}, K0 = {k0} leaves the theorem regime on a {n}x{n} grid (need 2K + K0 <= {h})",
                n = 2 * self.grid_half + 1,
                h = self.grid_half
            )));
        }
        Ok(())
    }
}

/// Largest `K` with `2K + K0 <= grid_half`.
pub fn theorem_max_k(grid_half: u32, k0: u32) -> u32 {
    grid_half.saturating_sub(k0) / 2
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the cell or trial addressed by `counters`.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    counters.iter().fold(splitmix(master), |h, &c| splitmix(h ^ c))
}

/// Sample mask over `gamma`: `round(fraction (|Gamma| - 1))` draws from
/// `Gamma \ {0}`, then the DC index.
pub fn sample_mask(gamma: &IndexSet2D, fraction: f64, seed: u64, with_replacement: bool) -> Result<Vec<bool>> {
    let n = gamma.len();
    let dc = gamma
        .linear_index([0, 0])
        .ok_or_else(|| Error::Config(format!("grid {gamma} does not contain DC")))?;
    let pool: Vec<usize> = (0..n).filter(|&i| i != dc).collect();
    let m = ((pool.len() as f64) * fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    mask[dc] = true;
    if with_replacement {
        for _ in 0..m {
            mask[pool[rng.random_range(0..pool.len())]] = true;
        }
    } else {
        for i in sample(&mut rng, pool.len(), m.min(pool.len())) {
            mask[pool[i]] = true;
        }
    }
    Ok(mask)
}

/// Random phantom (inside 1, outside 0) and its coefficients on `gamma`.
pub fn random_phantom(
    lambda0: &IndexSet2D,
    gamma: &IndexSet2D,
    seed: u64,
    smoothness: f64,
) -> Result<(Phantom, FourierGrid)> {
    let ph = Phantom::random(lambda0, seed, smoothness, &TraceOptions::default())?;
    let f = ph.fourier_coeffs(gamma)?;
    Ok((ph, f))
}

/// Rayon pool capped by `OFFGRID_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("OFFGRID_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("OFFGRID_THREADS=`{v}` is not a count")))?;
        if n == 0 {
            return Err(Error::Config("OFFGRID_THREADS must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// `{:e}` formatting round-trips `f64` exactly and is locale independent.
fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn desk_profile_is_in_regime() {
        let cfg = ExperimentConfig::desk();
        cfg.validate().unwrap();
        for &k in &cfg.k_values {
            cfg.check_regime(k, cfg.k0).unwrap();
        }
        for &k0 in &cfg.k0_values {
            cfg.check_regime(cfg.k, k0).unwrap();
        }
        assert_eq!(theorem_max_k(16, 1), 7);
        assert_eq!(theorem_max_k(16, 4), 6);
        assert!(cfg.check_regime(8, 1).is_err());
        ExperimentConfig::large().validate().unwrap();
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"trials": 3}"#).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.grid_half, 16);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trails": 3}"#).is_err());
        let bad = ExperimentConfig {
            fractions: vec![0.0],
            ..ExperimentConfig::desk()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seeds_are_counter_hashes() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(8, &[1, 2]));
        assert_ne!(derive_seed(7, &[0]), derive_seed(7, &[]));
    }

    proptest! {
        #[test]
        fn mask_matches_fraction(half in 1u32..8, fraction in 0.01f64..=1.0, seed in any::<u64>()) {
            let gamma = IndexSet2D::square(half);
            let mask = sample_mask(&gamma, fraction, seed, false).unwrap();
            let dc = gamma.linear_index([0, 0]).unwrap();
            prop_assert!(mask[dc]);
            let drawn = mask.iter().filter(|&&b| b).count() - 1;
            let want = fraction * (gamma.len() - 1) as f64;
            prop_assert!((drawn as f64 - want).abs() <= 1.0);
            prop_assert_eq!(mask, sample_mask(&gamma, fraction, seed, false).unwrap());
        }

        #[test]
        fn replacement_masks_never_exceed_draws(half in 1u32..6, fraction in 0.01f64..=1.0, seed in any::<u64>()) {
            let gamma = IndexSet2D::square(half);
            let mask = sample_mask(&gamma, fraction, seed, true).unwrap();
            let drawn = mask.iter().filter(|&&b| b).count() - 1;
            let m = (fraction * (gamma.len() - 1) as f64).round() as usize;
            prop_assert!(drawn <= m);
            prop_assert!(mask[gamma.linear_index([0, 0]).unwrap()]);
        }
    }

    #[test]
    fn uniform_marginals() {
        // Each non-DC index is drawn with probability m / (|Gamma| - 1).
        let gamma = IndexSet2D::square(2);
        let mut counts = vec![0usize; gamma.len()];
        let runs = 4000;
        for s in 0..runs {
            for (c, b) in counts.iter_mut().zip(sample_mask(&gamma, 0.5, s, false).unwrap()) {
                *c += b as usize;
            }
        }
        let dc = gamma.linear_index([0, 0]).unwrap();
        let p = 12.0 / 24.0;
        let sd = (runs as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            if i == dc {
                assert_eq!(c, runs as usize);
            } else {
                assert!((c as f64 - runs as f64 * p).abs() < 5.0 * sd, "index {i}: {c}");
            }
        }
    }
}
