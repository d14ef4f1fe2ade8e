//! Trigonometric polynomials `mu(r) = sum_k c[k] exp(j 2 pi k.r)` on the unit torus.

mod trace;

pub use trace::{trace_zero_set, trace_zero_set_with, CurveDiscretization, TraceOptions};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::{Index2, IndexSet2D};

/// A point of the unit torus `[0, 1)^2`.
pub type Point = [f64; 2];

/// Coefficients `c[k]` over a rectangular support.
///
/// When `real` is set the coefficients are conjugate symmetric,
/// `c[-k] = conj(c[k])`, so the polynomial is real-valued.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrigPoly")]
pub struct TrigPoly {
    support: IndexSet2D,
    coeffs: Vec<Complex64>,
    real: bool,
}

#[derive(Deserialize)]
struct RawTrigPoly {
    support: IndexSet2D,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl TryFrom<RawTrigPoly> for TrigPoly {
    type Error = Error;

    fn try_from(raw: RawTrigPoly) -> Result<Self> {
        TrigPoly::new(raw.support, raw.coeffs, raw.real)
    }
}

/// `exp(j 2 pi k t)` for `k` in `lo..=hi`.
pub(crate) fn phase_row(lo: i64, hi: i64, t: f64) -> Vec<Complex64> {
    (lo..=hi)
        .map(|k| Complex64::cis(2.0 * PI * (k as f64) * t))
        .collect()
}

impl TrigPoly {
    /// Builds a polynomial; a real flag requires a symmetric support and
    /// conjugate-symmetric coefficients (to `1e-12 * ||c||_1`), which are then
    /// symmetrised exactly.
    pub fn new(support: IndexSet2D, coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        if coeffs.len() != support.len() {
            return Err(Error::DimensionMismatch {
                expected: (support.len(), 1),
                found: (coeffs.len(), 1),
            });
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Format("non-finite coefficient".into()));
        }
        let mut p = Self {
            support,
            coeffs,
            real,
        };
        if real {
            if !support.is_symmetric() {
                return Err(Error::InvalidIndexSet(format!(
                    "real polynomial needs a symmetric support, got {support}"
                )));
            }
            let tol = 1e-12 * p.l1_norm().max(f64::MIN_POSITIVE);
            for k in support.iter() {
                let a = p.coeff(k);
                let b = p.coeff([-k[0], -k[1]]).conj();
                if (a - b).norm() > tol {
                    return Err(Error::Format(format!(
                        "coefficients at {k:?} are not conjugate symmetric"
                    )));
                }
            }
            p.symmetrize();
        }
        Ok(p)
    }

    pub fn from_fn(
        support: IndexSet2D,
        real: bool,
        f: impl Fn(Index2) -> Complex64,
    ) -> Result<Self> {
        let coeffs = support.iter().map(f).collect();
        Self::new(support, coeffs, real)
    }

    /// `sin(2 pi x)`, whose zero set is the pair of lines `x = 0` and `x = 1/2`.
    pub fn sin_x() -> Self {
        Self::from_fn(IndexSet2D::symmetric(1, 0), true, |k| match k[0] {
            1 => Complex64::new(0.0, -0.5),
            -1 => Complex64::new(0.0, 0.5),
            _ => Complex64::new(0.0, 0.0),
        })
        .expect("valid literal")
    }

    /// `sin(2 pi y)`.
    pub fn sin_y() -> Self {
        Self::from_fn(IndexSet2D::symmetric(0, 1), true, |k| match k[1] {
            1 => Complex64::new(0.0, -0.5),
            -1 => Complex64::new(0.0, 0.5),
            _ => Complex64::new(0.0, 0.0),
        })
        .expect("valid literal")
    }

    /// `a cos(2 pi x) + b cos(2 pi y) + c`.
    pub fn cos_sum(a: f64, b: f64, c: f64) -> Self {
        Self::from_fn(IndexSet2D::square(1), true, |k| {
            Complex64::new(
                match k {
                    [0, 0] => c,
                    [1, 0] | [-1, 0] => a / 2.0,
                    [0, 1] | [0, -1] => b / 2.0,
                    _ => 0.0,
                },
                0.0,
            )
        })
        .expect("valid literal")
    }

    pub fn support(&self) -> IndexSet2D {
        self.support
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `c[k]`, zero outside the support.
    pub fn coeff(&self, k: Index2) -> Complex64 {
        self.support
            .linear_index(k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    fn symmetrize(&mut self) {
        let support = self.support;
        let old = self.coeffs.clone();
        for (i, k) in support.iter().enumerate() {
            let j = support.linear_index([-k[0], -k[1]]).expect("symmetric");
            self.coeffs[i] = 0.5 * (old[i] + old[j].conj());
        }
    }

    /// `mu - level`, the polynomial whose zero set is `{mu = level}`.
    pub fn level_shifted(&self, level: f64) -> TrigPoly {
        let mut p = self.clone();
        if let Some(i) = p.support.linear_index([0, 0]) {
            p.coeffs[i] -= level;
            p
        } else {
            let support = p.support.hull(&IndexSet2D::square(0));
            TrigPoly {
                coeffs: support
                    .iter()
                    .map(|k| self.coeff(k) - if k == [0, 0] { level } else { 0.0 })
                    .collect(),
                support,
                real: p.real,
            }
        }
    }

    /// `mu(r)` as an exact finite sum.
    pub fn eval(&self, r: Point) -> Complex64 {
        self.eval_with_gradient(r).0
    }

    /// Real part of `mu(r)`; exact for real-flagged polynomials.
    pub fn eval_real(&self, r: Point) -> f64 {
        self.eval(r).re
    }

    /// `(d mu / dx, d mu / dy)` by weighting `c[k]` with `j 2 pi k`.
    pub fn gradient(&self, r: Point) -> [Complex64; 2] {
        self.eval_with_gradient(r).1
    }

    /// Real gradient for real-flagged polynomials.
    pub fn gradient_real(&self, r: Point) -> [f64; 2] {
        let g = self.gradient(r);
        [g[0].re, g[1].re]
    }

    /// Value and gradient in a single pass.
    pub fn eval_with_gradient(&self, r: Point) -> (Complex64, [Complex64; 2]) {
        let (lo, hi) = (self.support.lo(), self.support.hi());
        let ex = phase_row(lo[0], hi[0], r[0]);
        let ey = phase_row(lo[1], hi[1], r[1]);
        let nx = ex.len();
        let mut val = Complex64::new(0.0, 0.0);
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        for (iy, &py) in ey.iter().enumerate() {
            let ky = (lo[1] + iy as i64) as f64;
            let mut row = Complex64::new(0.0, 0.0);
            let mut row_dx = Complex64::new(0.0, 0.0);
            for (ix, &px) in ex.iter().enumerate() {
                let term = self.coeffs[iy * nx + ix] * px;
                row += term;
                row_dx += term * (lo[0] + ix as i64) as f64;
            }
            val += row * py;
            gx += row_dx * py;
            gy += row * py * ky;
        }
        let j2pi = Complex64::new(0.0, 2.0 * PI);
        (val, [gx * j2pi, gy * j2pi])
    }

    /// Real value and gradient; only meaningful for real-flagged polynomials.
    pub fn eval_real_with_gradient(&self, r: Point) -> (f64, [f64; 2]) {
        let (v, g) = self.eval_with_gradient(r);
        (v.re, [g[0].re, g[1].re])
    }

    /// Samples `mu` on the `n x n` grid `(i/n, j/n)`; result indexed `[j * n + i]`.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = (self.support.lo(), self.support.hi());
        let nx = self.support.dims()[0];
        let ex: Vec<Vec<Complex64>> = (0..n)
            .map(|i| phase_row(lo[0], hi[0], i as f64 / n as f64))
            .collect();
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            let ey = phase_row(lo[1], hi[1], j as f64 / n as f64);
            // Partial sums over ky for each kx.
            let col: Vec<Complex64> = (0..nx)
                .map(|ix| {
                    ey.iter()
                        .enumerate()
                        .map(|(iy, &py)| self.coeffs[iy * nx + ix] * py)
                        .sum()
                })
                .collect();
            for (i, exi) in ex.iter().enumerate() {
                let v: Complex64 = col.iter().zip(exi).map(|(c, p)| c * p).sum();
                out[j * n + i] = v.re;
            }
        }
        out
    }
}

/// One-dimensional Dirichlet sum `sum_{k=lo}^{hi} exp(j 2 pi k t)`.
fn dirichlet_1d(lo: i64, hi: i64, t: f64) -> Complex64 {
    let n = (hi - lo + 1) as f64;
    let s = (PI * t).sin();
    if s.abs() < 1e-3 {
        return phase_row(lo, hi, t).into_iter().sum();
    }
    let center = 0.5 * (lo + hi) as f64;
    Complex64::cis(2.0 * PI * center * t) * ((PI * n * t).sin() / s)
}

/// Dirichlet kernel `D_L(r) = sum_{k in L} exp(j 2 pi k.r)`.
pub fn dirichlet(lambda: &IndexSet2D, r: Point) -> Complex64 {
    let (lo, hi) = (lambda.lo(), lambda.hi());
    dirichlet_1d(lo[0], hi[0], r[0]) * dirichlet_1d(lo[1], hi[1], r[1])
}

const PROBE_GRID: usize = 256;
const MAX_DRAWS: usize = 100;

/// Random real edge polynomial bandlimited to `lambda0`.
///
/// Coefficients are i.i.d. circular complex Gaussians, conjugate-symmetrised
/// and damped by `exp(-smoothness |k|^2)`. The constant term is shifted by
/// the median of a 256x256 probe so both signs occur; draws whose zero set
/// passes close to a critical point are rejected.
pub fn random_edge_poly(lambda0: &IndexSet2D, seed: u64, smoothness: f64) -> Result<TrigPoly> {
    if lambda0.len() < 4 {
        return Err(Error::InvalidIndexSet(format!(
            "edge bandwidth {lambda0} has fewer than 4 coefficients"
        )));
    }
    if !lambda0.is_symmetric() {
        return Err(Error::InvalidIndexSet(format!(
            "edge bandwidth {lambda0} must be symmetric"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let raw: Vec<Complex64> = lambda0
            .iter()
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let coeffs: Vec<Complex64> = lambda0
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let j = lambda0.linear_index([-k[0], -k[1]]).expect("symmetric");
                let damp = (-smoothness * ((k[0] * k[0] + k[1] * k[1]) as f64)).exp();
                0.5 * (raw[i] + raw[j].conj()) * damp
            })
            .collect();
        let mut p = TrigPoly::new(*lambda0, coeffs, true)?;
        let mut probe = p.sample_grid(PROBE_GRID);
        probe.sort_by(f64::total_cmp);
        let median = probe[probe.len() / 2];
        p = p.level_shifted(median);
        if probe_is_regular(&p) {
            return Ok(p);
        }
    }
    Err(Error::DegenerateDraw(MAX_DRAWS))
}

/// Both signs present on the probe grid and no crossing with a gradient far
/// below the typical crossing gradient.
fn probe_is_regular(p: &TrigPoly) -> bool {
    let n = PROBE_GRID;
    let v = p.sample_grid(n);
    let (mut pos, mut neg) = (false, false);
    for &x in &v {
        if x >= 0.0 {
            pos = true;
        } else {
            neg = true;
        }
    }
    if !(pos && neg) {
        return false;
    }
    let mut grads = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let a = v[j * n + i];
            for (b, dir) in [(v[j * n + (i + 1) % n], 0usize), (v[((j + 1) % n) * n + i], 1)] {
                if (a >= 0.0) != (b >= 0.0) {
                    let t = a / (a - b);
                    let mut r = [i as f64 / n as f64, j as f64 / n as f64];
                    r[dir] += t / n as f64;
                    let g = p.gradient_real(r);
                    grads.push(g[0].hypot(g[1]));
                }
            }
        }
    }
    if grads.is_empty() {
        return false;
    }
    let mean = grads.iter().sum::<f64>() / grads.len() as f64;
    let min = grads.iter().copied().fold(f64::INFINITY, f64::min);
    min > 0.05 * mean
}
