//! Discrete isotropic TV baseline and its circulant-lifting form.
//!
//! Images are `nx x ny` arrays indexed `[iy * nx + ix]` with circular
//! forward differences. The DFT is unitary. Frequencies of a centred grid
//! `Gamma` map to DFT bins modulo the image size, and coefficient grids use
//! the continuous convention `f[k]`, related to the unitary DFT of the
//! bandlimited raster by `F u = sqrt(N) f`.

use std::sync::Arc;
use std::time::Instant;

use faer::{c64, Mat};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::IndexSet2D;
use crate::linalg::nuclear_norm;
use crate::phantom::FourierGrid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteImage {
    nx: usize,
    ny: usize,
    pixels: Vec<Complex64>,
}

impl DiscreteImage {
    pub fn new(nx: usize, ny: usize, pixels: Vec<Complex64>) -> Result<Self> {
        if pixels.len() != nx * ny || nx == 0 || ny == 0 {
            return Err(Error::DimensionMismatch {
                expected: (ny, nx),
                found: (pixels.len(), 1),
            });
        }
        if pixels.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("image has non-finite pixels".into()));
        }
        Ok(Self { nx, ny, pixels })
    }

    pub fn from_real(nx: usize, ny: usize, pixels: &[f64]) -> Result<Self> {
        Self::new(nx, ny, pixels.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn pixels(&self) -> &[Complex64] {
        &self.pixels
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.pixels.iter().map(|z| z.re).collect()
    }
}

struct Dft2 {
    nx: usize,
    ny: usize,
    fwd: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    inv: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
}

impl Dft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd: (p.plan_fft_forward(nx), p.plan_fft_forward(ny)),
            inv: (p.plan_fft_inverse(nx), p.plan_fft_inverse(ny)),
        }
    }

    /// Unnormalised transform in place.
    fn raw(&self, data: &mut [Complex64], inverse: bool) {
        let (fx, fy) = if inverse { &self.inv } else { &self.fwd };
        for row in data.chunks_exact_mut(self.nx) {
            fx.process(row);
        }
        let mut col = vec![ZERO; self.ny];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                col[iy] = data[iy * self.nx + ix];
            }
            fy.process(&mut col);
            for iy in 0..self.ny {
                data[iy * self.nx + ix] = col[iy];
            }
        }
    }

    fn unitary(&self, data: &mut [Complex64], inverse: bool) {
        self.raw(data, inverse);
        let s = 1.0 / ((self.nx * self.ny) as f64).sqrt();
        for z in data.iter_mut() {
            *z *= s;
        }
    }
}

/// Unitary 2-D DFT `(F u)[k] = N^-1/2 sum_n u[n] exp(-j 2 pi k.n / N)`.
pub fn dft2(u: &DiscreteImage) -> Vec<Complex64> {
    let mut d = u.pixels.clone();
    Dft2::new(u.nx, u.ny).unitary(&mut d, false);
    d
}

pub fn idft2(nx: usize, ny: usize, v: &[Complex64]) -> Result<DiscreteImage> {
    let mut d = v.to_vec();
    if d.len() != nx * ny {
        return Err(Error::DimensionMismatch {
            expected: (ny, nx),
            found: (d.len(), 1),
        });
    }
    Dft2::new(nx, ny).unitary(&mut d, true);
    DiscreteImage::new(nx, ny, d)
}

fn grad(u: &[Complex64], nx: usize, ny: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut gx = vec![ZERO; u.len()];
    let mut gy = vec![ZERO; u.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let i = iy * nx + ix;
            gx[i] = u[iy * nx + (ix + 1) % nx] - u[i];
            gy[i] = u[((iy + 1) % ny) * nx + ix] - u[i];
        }
    }
    (gx, gy)
}

/// Adjoint of [`grad`], i.e. minus the backward-difference divergence.
fn grad_adjoint(px: &[Complex64], py: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; px.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let i = iy * nx + ix;
            out[i] = px[iy * nx + (ix + nx - 1) % nx] - px[i] + py[((iy + ny - 1) % ny) * nx + ix] - py[i];
        }
    }
    out
}

fn tv_of(u: &[Complex64], nx: usize, ny: usize) -> f64 {
    let (gx, gy) = grad(u, nx, ny);
    gx.iter()
        .zip(&gy)
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
        .sum()
}

/// Isotropic TV with circular forward differences.
pub fn tv_seminorm(u: &DiscreteImage) -> f64 {
    tv_of(&u.pixels, u.nx, u.ny)
}

/// First columns `v_x = (1 - exp(j 2 pi k_x / N_x)) F u` and the `k_y`
/// analogue.
fn circulant_columns(u: &DiscreteImage) -> (Vec<Complex64>, Vec<Complex64>) {
    let fu = dft2(u);
    let (nx, ny) = (u.nx, u.ny);
    let mut vx = vec![ZERO; fu.len()];
    let mut vy = vec![ZERO; fu.len()];
    for ky in 0..ny {
        for kx in 0..nx {
            let i = ky * nx + kx;
            let ax = Complex64::new(1.0, 0.0) - Complex64::cis(2.0 * std::f64::consts::PI * kx as f64 / nx as f64);
            let ay = Complex64::new(1.0, 0.0) - Complex64::cis(2.0 * std::f64::consts::PI * ky as f64 / ny as f64);
            vx[i] = ax * fu[i];
            vy[i] = ay * fu[i];
        }
    }
    (vx, vy)
}

/// Explicit `2N x N` lifting `[C_x; C_y]` of block-circulant matrices with
/// circulant blocks whose first columns are `v_x` and `v_y`.
pub fn circulant_lifting(u: &DiscreteImage) -> Mat<c64> {
    let (vx, vy) = circulant_columns(u);
    let (nx, ny) = (u.nx, u.ny);
    let n = nx * ny;
    Mat::from_fn(2 * n, n, |a, b| {
        let (v, a) = if a < n { (&vx, a) } else { (&vy, a - n) };
        let (ax, ay) = (a % nx, a / nx);
        let (bx, by) = (b % nx, b / nx);
        v[((ay + ny - by) % ny) * nx + (ax + nx - bx) % nx]
    })
}

/// Largest grid for the explicit-SVD path.
pub const EXPLICIT_MAX_PIXELS: usize = 256;

/// Nuclear norm of the circulant lifting by explicit SVD.
pub fn circulant_lifting_nuclear_norm_explicit(u: &DiscreteImage) -> Result<f64> {
    if u.nx * u.ny > EXPLICIT_MAX_PIXELS {
        return Err(Error::Config(format!(
            "explicit circulant lifting limited to {EXPLICIT_MAX_PIXELS} pixels"
        )));
    }
    nuclear_norm(circulant_lifting(u).as_ref())
}

/// `sum_k sqrt(|lambda_x,k|^2 + |lambda_y,k|^2)` with the eigenvalues taken
/// as unnormalised DFTs of the first columns. Equals `sqrt(N) TV(u)`.
pub fn circulant_lifting_nuclear_norm(u: &DiscreteImage) -> f64 {
    let (mut vx, mut vy) = circulant_columns(u);
    let dft = Dft2::new(u.nx, u.ny);
    dft.raw(&mut vx, false);
    dft.raw(&mut vy, false);
    vx.iter()
        .zip(&vy)
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
        .sum()
}

/// Iterations before the stopping test applies; the dual variable starts at
/// zero, so early steps are tiny.
const BURN_IN: usize = 50;
/// Primal step; the dual step follows from `tau sigma = 0.99 / 8`.
const TAU: f64 = 0.1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvConfig {
    pub max_iters: usize,
    /// Stop when `|u_k+1 - u_k| < tol |u_k+1|`.
    pub tol: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TvReport {
    pub image: DiscreteImage,
    /// Coefficients `F u / sqrt(N)` on the input grid.
    pub recovered: FourierGrid,
    /// Smallest TV among the feasible iterates so far.
    pub objective: Vec<f64>,
    /// TV of each iterate; primal-dual iterates are not monotone.
    pub iterate_objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
}

/// DFT bin of every index of the centred grid `gamma`.
fn bins(gamma: &IndexSet2D) -> Vec<usize> {
    let [nx, ny] = gamma.dims();
    gamma
        .iter()
        .map(|k| {
            let bx = k[0].rem_euclid(nx as i64) as usize;
            let by = k[1].rem_euclid(ny as i64) as usize;
            by * nx + bx
        })
        .collect()
}

/// `min TV(u)` subject to the sampled DFT values, by primal-dual iteration
/// with an exact projection onto the constraint set.
pub fn solve_tv(samples: &FourierGrid, cfg: &TvConfig) -> Result<TvReport> {
    let start = Instant::now();
    let gamma = samples.grid();
    let [nx, ny] = gamma.dims();
    let n = nx * ny;
    let dc = gamma.linear_index([0, 0]).ok_or(Error::MissingDc)?;
    let mask: Vec<bool> = samples.mask().map(<[bool]>::to_vec).unwrap_or_else(|| vec![true; n]);
    if !mask[dc] {
        return Err(Error::MissingDc);
    }
    let bin = bins(&gamma);
    let scale = (n as f64).sqrt();
    let mut known = vec![None; n];
    for (i, &b) in bin.iter().enumerate() {
        if mask[i] {
            known[b] = Some(samples.values()[i] * scale);
        }
    }
    let dft = Dft2::new(nx, ny);
    let project = |u: &mut Vec<Complex64>| {
        dft.unitary(u, false);
        for (z, k) in u.iter_mut().zip(&known) {
            if let Some(v) = k {
                *z = *v;
            }
        }
        dft.unitary(u, true);
    };
    // Zero-filled start.
    let mut u: Vec<Complex64> = known.iter().map(|k| k.unwrap_or(ZERO)).collect();
    dft.unitary(&mut u, true);
    let mut ubar = u.clone();
    let mut px = vec![ZERO; n];
    let mut py = vec![ZERO; n];
    // tau sigma |grad|^2 < 1 with |grad|^2 <= 8 on a periodic grid.
    let (tau, sigma) = (TAU, 0.99 / (8.0 * TAU));
    let mut objective: Vec<f64> = Vec::new();
    let mut iterate_objective = Vec::new();
    let mut best = u.clone();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let (gx, gy) = grad(&ubar, nx, ny);
        for i in 0..n {
            let (a, b) = (px[i] + gx[i] * sigma, py[i] + gy[i] * sigma);
            let m = (a.norm_sqr() + b.norm_sqr()).sqrt().max(1.0);
            px[i] = a / m;
            py[i] = b / m;
        }
        let div = grad_adjoint(&px, &py, nx, ny);
        let mut next: Vec<Complex64> = u.iter().zip(&div).map(|(a, d)| a - d * tau).collect();
        project(&mut next);
        let diff = next.iter().zip(&u).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm = next.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            ubar[i] = next[i] * 2.0 - u[i];
        }
        u = next;
        let tv = tv_of(&u, nx, ny);
        iterate_objective.push(tv);
        match objective.last() {
            Some(&b) if b <= tv => objective.push(b),
            _ => {
                best.copy_from_slice(&u);
                objective.push(tv);
            }
        }
        if objective.len() >= BURN_IN && diff < cfg.tol * norm.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    // Every iterate is feasible, so the best one is returned.
    let image = DiscreteImage::new(nx, ny, best)?;
    let fu = dft2(&image);
    let mut values: Vec<Complex64> = bin.iter().map(|&b| fu[b] / scale).collect();
    // Sampled entries are returned exactly.
    for (i, v) in values.iter_mut().enumerate() {
        if mask[i] {
            *v = samples.values()[i];
        }
    }
    let mut recovered = FourierGrid::new(gamma, values)?;
    recovered.set_mask(mask)?;
    Ok(TvReport {
        image,
        recovered,
        iterations: objective.len(),
        objective,
        iterate_objective,
        converged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Bandlimited raster `u[n] = sum_k f[k] exp(j 2 pi k.n / N)` of a
/// coefficient grid on its own DFT lattice.
pub fn raster_from_coeffs(f: &FourierGrid) -> Result<DiscreteImage> {
    let gamma = f.grid();
    let [nx, ny] = gamma.dims();
    let scale = ((nx * ny) as f64).sqrt();
    let mut v = vec![ZERO; nx * ny];
    for (i, &b) in bins(&gamma).iter().enumerate() {
        v[b] = f.values()[i] * scale;
    }
    idft2(nx, ny, &v)
}

/// `SNR = 20 log10(|f| / |f* - f|)`, capped at 300 dB.
pub fn snr_db(truth: &FourierGrid, estimate: &FourierGrid) -> Result<f64> {
    let err = estimate.sub(truth)?.norm();
    let sig = truth.norm();
    if err == 0.0 || sig / err > 1e15 {
        return Ok(300.0);
    }
    Ok((20.0 * (sig / err).log10()).min(300.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::Phantom;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(nx: usize, ny: usize, rng: &mut ChaCha8Rng) -> DiscreteImage {
        let p = (0..nx * ny)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        DiscreteImage::new(nx, ny, p).unwrap()
    }

    fn naive_tv(u: &DiscreteImage) -> f64 {
        let (nx, ny) = u.dims();
        let p = u.pixels();
        let mut s = 0.0;
        for y in 0..ny {
            for x in 0..nx {
                let c = p[y * nx + x];
                let dx = p[y * nx + (x + 1) % nx] - c;
                let dy = p[((y + 1) % ny) * nx + x] - c;
                s += (dx.norm_sqr() + dy.norm_sqr()).sqrt();
            }
        }
        s
    }

    #[test]
    fn tv_examples() {
        let c = DiscreteImage::from_real(4, 4, &[3.0; 16]).unwrap();
        assert_eq!(tv_seminorm(&c), 0.0);
        let col: Vec<f64> = (0..16).map(|i| if i % 4 == 1 { 1.0 } else { 0.0 }).collect();
        let u = DiscreteImage::from_real(4, 4, &col).unwrap();
        assert!((tv_seminorm(&u) - 8.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = random_image(5, 3, &mut rng);
        let r2 = DiscreteImage::new(5, 3, r.pixels().iter().map(|z| z * 2.0).collect()).unwrap();
        assert!((tv_seminorm(&r2) - 2.0 * tv_seminorm(&r)).abs() < 1e-12);
        assert!((tv_seminorm(&r) - naive_tv(&r)).abs() < 1e-12);
    }

    #[test]
    fn gradient_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (u, p, q) = (random_image(5, 4, &mut rng), random_image(5, 4, &mut rng), random_image(5, 4, &mut rng));
        let (gx, gy) = grad(u.pixels(), 5, 4);
        let lhs: Complex64 = gx.iter().zip(p.pixels()).chain(gy.iter().zip(q.pixels())).map(|(a, b)| a.conj() * b).sum();
        let adj = grad_adjoint(p.pixels(), q.pixels(), 5, 4);
        let rhs: Complex64 = u.pixels().iter().zip(&adj).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn circulant_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [4, 6] {
            let kappa = ((n * n) as f64).sqrt();
            let c = DiscreteImage::from_real(n, n, &vec![1.5; n * n]).unwrap();
            assert!(circulant_lifting_nuclear_norm(&c) < 1e-12);
            for _ in 0..20 {
                let u = random_image(n, n, &mut rng);
                let explicit = circulant_lifting_nuclear_norm_explicit(&u).unwrap();
                let fast = circulant_lifting_nuclear_norm(&u);
                assert!((explicit - fast).abs() < 1e-10 * explicit.max(1.0), "{explicit} vs {fast}");
                assert!((fast / tv_seminorm(&u) - kappa).abs() < 1e-9);
            }
        }
        let big = DiscreteImage::from_real(17, 17, &[0.0; 289]).unwrap();
        assert!(circulant_lifting_nuclear_norm_explicit(&big).is_err());
    }

    fn stripe_samples(frac: f64, seed: u64) -> (FourierGrid, FourierGrid) {
        let gamma = IndexSet2D::square(7);
        let truth = Phantom::stripe().unwrap().fourier_coeffs(&gamma).unwrap();
        let n = gamma.len();
        let dc = gamma.linear_index([0, 0]).unwrap();
        let pool: Vec<usize> = (0..n).filter(|&i| i != dc).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mask = vec![false; n];
        mask[dc] = true;
        for i in sample(&mut rng, pool.len(), ((n - 1) as f64 * frac).round() as usize) {
            mask[pool[i]] = true;
        }
        (truth.clone().with_mask(mask).unwrap(), truth)
    }

    #[test]
    fn full_sampling_is_exact() {
        let (mut s, truth) = stripe_samples(1.0, 0);
        s.clear_mask();
        let rep = solve_tv(&s, &TvConfig::default()).unwrap();
        assert!(snr_db(&truth, &rep.recovered).unwrap() > 100.0);
        let raster = raster_from_coeffs(&truth).unwrap();
        let err: f64 = rep.image.pixels().iter().zip(raster.pixels()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn stripe_half_sampling_matches_reference() {
        let (s, truth) = stripe_samples(0.5, 7);
        let rep = solve_tv(&s, &TvConfig::default()).unwrap();
        let reference = solve_tv(&s, &TvConfig { max_iters: 5000, tol: 0.0 }).unwrap();
        let (a, b) = (snr_db(&truth, &rep.recovered).unwrap(), snr_db(&truth, &reference.recovered).unwrap());
        assert!((a - b).abs() < 0.5, "{a} vs {b}");
        // Constraint holds on the image itself.
        let fu = dft2(&rep.image);
        let scale = (s.grid().len() as f64).sqrt();
        let bin = bins(&s.grid());
        for i in s.sampled() {
            assert!((fu[bin[i]] - s.values()[i] * scale).norm() < 1e-10);
        }
        let obj = &reference.objective;
        for w in obj[50..].windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
        assert_eq!(tv_seminorm(&reference.image), *obj.last().unwrap());
        let raw_min = reference.iterate_objective.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(raw_min, *obj.last().unwrap());
    }

    #[test]
    fn snr_cap_and_missing_dc() {
        let (s, truth) = stripe_samples(0.5, 1);
        assert_eq!(snr_db(&truth, &truth).unwrap(), 300.0);
        let mut mask = s.mask().unwrap().to_vec();
        mask[s.grid().linear_index([0, 0]).unwrap()] = false;
        let bad = s.clone().with_mask(mask).unwrap();
        assert!(matches!(solve_tv(&bad, &TvConfig::default()), Err(Error::MissingDc)));
    }
}
