//! The structured lifting `T(g) = [T_x(g); T_y(g)]` and its sampling basis.
//!
//! Rows are indexed by `l` in `L2 = Gamma : L1` (x block first, then the y
//! block), columns by `k'` in `L1`, and entry `(l, k')` of the x block is
//! `2 pi (l - k')_x g[l - k']`. Every `k` in `Gamma` occurs on `omega(k)`
//! positions per block, so
//!
//! ```text
//! T(g) = sum_k g[k] w[k] A_k,   w[k] = 2 pi |k| sqrt(omega(k)),
//! ```
//!
//! with the `A_k` orthonormal and `T^*T` diagonal.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::index_sets::{Index2, IndexSet2D};
use crate::phantom::FourierGrid;

#[derive(Clone, Debug)]
pub struct LiftOperator {
    gamma: IndexSet2D,
    lambda1: IndexSet2D,
    lambda2: IndexSet2D,
    omega: Vec<usize>,
    weights: Vec<f64>,
    normal: Vec<f64>,
    /// `Gamma` index of entry `(row, col)`, stored `[row * cols + col]`.
    entry: Vec<u32>,
    /// `2 pi k_x` and `2 pi k_y` per `Gamma` index.
    fx: Vec<f64>,
    fy: Vec<f64>,
    dc: Option<usize>,
}

impl LiftOperator {
    pub fn new(gamma: IndexSet2D, lambda1: IndexSet2D) -> Result<Self> {
        let lambda2 = gamma.contraction(&lambda1)?;
        let (rows, cols) = (lambda2.len(), lambda1.len());
        let mut omega = vec![0usize; gamma.len()];
        let mut entry = Vec::with_capacity(rows * cols);
        for l in lambda2.iter() {
            for kp in lambda1.iter() {
                let idx = gamma
                    .linear_index([l[0] - kp[0], l[1] - kp[1]])
                    .expect("L2 - L1 lies in Gamma");
                omega[idx] += 1;
                entry.push(idx as u32);
            }
        }
        let mut fx = Vec::with_capacity(gamma.len());
        let mut fy = Vec::with_capacity(gamma.len());
        let mut weights = Vec::with_capacity(gamma.len());
        let mut normal = Vec::with_capacity(gamma.len());
        for (i, k) in gamma.iter().enumerate() {
            let (ax, ay) = (2.0 * PI * k[0] as f64, 2.0 * PI * k[1] as f64);
            fx.push(ax);
            fy.push(ay);
            let w2 = omega[i] as f64 * (ax * ax + ay * ay);
            weights.push(w2.sqrt());
            normal.push(w2);
        }
        Ok(Self {
            gamma,
            lambda1,
            lambda2,
            omega,
            weights,
            normal,
            entry,
            fx,
            fy,
            dc: gamma.linear_index([0, 0]),
        })
    }

    pub fn gamma(&self) -> IndexSet2D {
        self.gamma
    }

    pub fn lambda1(&self) -> IndexSet2D {
        self.lambda1
    }

    pub fn lambda2(&self) -> IndexSet2D {
        self.lambda2
    }

    /// Multiplicities `omega(k)` over `Gamma` in linear order.
    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    /// `w[k] = 2 pi |k| sqrt(omega(k))`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal of `T^*T`, i.e. `w[k]^2`.
    pub fn normal_diag(&self) -> &[f64] {
        &self.normal
    }

    pub fn dc_index(&self) -> Option<usize> {
        self.dc
    }

    pub fn rows(&self) -> usize {
        2 * self.lambda2.len()
    }

    pub fn cols(&self) -> usize {
        self.lambda1.len()
    }

    fn check_values(&self, g: &[Complex64]) -> Result<()> {
        if g.len() != self.gamma.len() {
            return Err(Error::DimensionMismatch {
                expected: (self.gamma.len(), 1),
                found: (g.len(), 1),
            });
        }
        Ok(())
    }

    fn check_matrix(&self, x: MatRef<'_, c64>) -> Result<()> {
        if x.nrows() != self.rows() || x.ncols() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: (self.rows(), self.cols()),
                found: (x.nrows(), x.ncols()),
            });
        }
        Ok(())
    }

    fn check_grid(&self, g: &FourierGrid) -> Result<()> {
        if g.grid() != self.gamma {
            return Err(Error::GridMismatch {
                expected: self.gamma.to_string(),
                found: g.grid().to_string(),
            });
        }
        Ok(())
    }

    /// Explicit lifted matrix of a coefficient grid on `Gamma`.
    pub fn build_matrix(&self, g: &FourierGrid) -> Result<Mat<c64>> {
        self.check_grid(g)?;
        self.apply(g.values())
    }

    /// `T(g)` for coefficients in `Gamma`'s linear order.
    pub fn apply(&self, g: &[Complex64]) -> Result<Mat<c64>> {
        self.check_values(g)?;
        let (half, cols) = (self.lambda2.len(), self.cols());
        let mut t = Mat::zeros(2 * half, cols);
        for r in 0..half {
            for c in 0..cols {
                let k = self.entry[r * cols + c] as usize;
                t[(r, c)] = g[k] * self.fx[k];
                t[(half + r, c)] = g[k] * self.fy[k];
            }
        }
        Ok(t)
    }

    /// `T^*(X)[k] = 2 pi sum_{positions of k} (k_x X^x + k_y X^y)`.
    pub fn adjoint_values(&self, x: MatRef<'_, c64>) -> Result<Vec<Complex64>> {
        self.check_matrix(x)?;
        let (half, cols) = (self.lambda2.len(), self.cols());
        let mut out = vec![Complex64::new(0.0, 0.0); self.gamma.len()];
        for c in 0..cols {
            let col = x.col(c);
            for r in 0..half {
                let k = self.entry[r * cols + c] as usize;
                out[k] += col[r] * self.fx[k] + col[half + r] * self.fy[k];
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self, x: MatRef<'_, c64>) -> Result<FourierGrid> {
        FourierGrid::new(self.gamma, self.adjoint_values(x)?)
    }

    /// `T(g) h` without forming `T(g)`.
    pub fn matvec(&self, g: &[Complex64], h: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_values(g)?;
        if h.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: (self.cols(), 1),
                found: (h.len(), 1),
            });
        }
        let (half, cols) = (self.lambda2.len(), self.cols());
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * half];
        for r in 0..half {
            let (mut sx, mut sy) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (c, hc) in h.iter().enumerate() {
                let k = self.entry[r * cols + c] as usize;
                let v = g[k] * hc;
                sx += v * self.fx[k];
                sy += v * self.fy[k];
            }
            out[r] = sx;
            out[half + r] = sy;
        }
        Ok(out)
    }

    /// `T(g)^* y` without forming `T(g)`.
    pub fn rmatvec(&self, g: &[Complex64], y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_values(g)?;
        if y.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: (self.rows(), 1),
                found: (y.len(), 1),
            });
        }
        let (half, cols) = (self.lambda2.len(), self.cols());
        let mut out = vec![Complex64::new(0.0, 0.0); cols];
        for r in 0..half {
            for (c, oc) in out.iter_mut().enumerate() {
                let k = self.entry[r * cols + c] as usize;
                let gc = g[k].conj();
                *oc += gc * (y[r] * self.fx[k] + y[half + r] * self.fy[k]);
            }
        }
        Ok(out)
    }

    /// Orthonormal basis matrix `A_k`.
    pub fn basis_matrix(&self, k: Index2) -> Result<Mat<c64>> {
        if k == [0, 0] {
            return Err(Error::DcIndex);
        }
        let idx = self.gamma.linear_index(k).ok_or_else(|| {
            Error::InvalidIndexSet(format!("({}, {}) is outside {}", k[0], k[1], self.gamma))
        })?;
        let (half, cols) = (self.lambda2.len(), self.cols());
        let scale = 1.0 / self.weights[idx];
        let mut a = Mat::zeros(2 * half, cols);
        for r in 0..half {
            for c in 0..cols {
                if self.entry[r * cols + c] as usize == idx {
                    a[(r, c)] = c64::new(self.fx[idx] * scale, 0.0);
                    a[(half + r, c)] = c64::new(self.fy[idx] * scale, 0.0);
                }
            }
        }
        Ok(a)
    }

    /// Least-squares coefficients `g = (T^*T)^{-1} T^* X`, zero at DC.
    pub fn structured_coeffs(&self, x: MatRef<'_, c64>) -> Result<Vec<Complex64>> {
        let mut g = self.adjoint_values(x)?;
        for (v, &n) in g.iter_mut().zip(&self.normal) {
            *v = if n > 0.0 { *v / n } else { Complex64::new(0.0, 0.0) };
        }
        Ok(g)
    }

    /// `A(X) = sum_k <A_k, X> A_k`: orthogonal projection onto lifted matrices.
    pub fn project_structured(&self, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
        self.apply(&self.structured_coeffs(x)?)
    }

    /// `A_perp(X) = X - A(X)`.
    pub fn project_antistructured(&self, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
        Ok(x.to_owned() - self.project_structured(x)?)
    }

    /// `Q_Omega(X) = (N / |Omega|) sum_{k in Omega} <A_k, X> A_k + A_perp(X)`
    /// with `N = |Gamma \ {0}|`; `omega_set` is a multiset.
    pub fn sampling_operator(&self, omega_set: &[Index2], x: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let coeffs = self.structured_coeffs(x)?;
        let mut count = vec![0usize; self.gamma.len()];
        for &k in omega_set {
            if k == [0, 0] {
                return Err(Error::DcIndex);
            }
            let i = self.gamma.linear_index(k).ok_or_else(|| {
                Error::InvalidIndexSet(format!("({}, {}) is outside {}", k[0], k[1], self.gamma))
            })?;
            count[i] += 1;
        }
        let n = (self.gamma.len() - self.dc.map_or(0, |_| 1)) as f64;
        let scale = if omega_set.is_empty() {
            0.0
        } else {
            n / omega_set.len() as f64
        };
        let sampled: Vec<Complex64> = coeffs
            .iter()
            .zip(&count)
            .map(|(c, &m)| c * (scale * m as f64))
            .collect();
        let structured = self.apply(&coeffs)?;
        Ok(x.to_owned() - structured + self.apply(&sampled)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_sets::rank_bound;
    use crate::linalg::{inner, numerical_rank, singular_values};
    use crate::phantom::Phantom;
    use crate::trigpoly::TraceOptions;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
        Mat::from_fn(rows, cols, |_, _| {
            c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn op(g: u32, l1: u32) -> LiftOperator {
        LiftOperator::new(IndexSet2D::square(g), IndexSet2D::square(l1)).unwrap()
    }

    #[test]
    fn impulse_with_trivial_filter_is_one_column() {
        let lift = op(2, 0);
        assert_eq!((lift.rows(), lift.cols()), (50, 1));
        let gamma = lift.gamma();
        let k0 = [1, -2];
        let mut g = vec![Complex64::new(0.0, 0.0); gamma.len()];
        g[gamma.linear_index(k0).unwrap()] = Complex64::new(1.0, 0.0);
        let t = lift.apply(&g).unwrap();
        let r = lift.lambda2().linear_index(k0).unwrap();
        for i in 0..t.nrows() {
            let expect = if i == r {
                2.0 * PI
            } else if i == 25 + r {
                -4.0 * PI
            } else {
                0.0
            };
            assert!((t[(i, 0)] - c64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn multiplicity_examples_and_invariants() {
        let lift = op(7, 3);
        assert_eq!(lift.lambda2(), IndexSet2D::square(4));
        let gamma = lift.gamma();
        assert_eq!(lift.omega()[gamma.linear_index([0, 0]).unwrap()], 49);
        assert_eq!(lift.omega()[gamma.linear_index([7, 7]).unwrap()], 1);
        assert_eq!(lift.omega().iter().sum::<usize>(), 49 * 81);
        assert!(lift.omega().iter().all(|&w| w >= 1));
        let n = gamma.len();
        for i in 0..n {
            assert_eq!(lift.omega()[i], lift.omega()[n - 1 - i]);
        }
        assert_eq!(lift.weights()[lift.dc_index().unwrap()], 0.0);

        // Pair-counting oracle.
        for (i, k) in gamma.iter().enumerate() {
            let mut count = 0;
            for l in lift.lambda2().iter() {
                for kp in lift.lambda1().iter() {
                    count += (l[0] - kp[0] == k[0] && l[1] - kp[1] == k[1]) as usize;
                }
            }
            assert_eq!(lift.omega()[i], count);
        }
    }

    #[test]
    fn frobenius_identity_and_normal_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lift = op(5, 2);
        let g = random_values(lift.gamma().len(), &mut rng);
        let t = lift.apply(&g).unwrap();
        let direct = t.norm_l2().powi(2);
        let counted: f64 = g
            .iter()
            .zip(lift.normal_diag())
            .map(|(z, n)| n * z.norm_sqr())
            .sum();
        assert!((direct - counted).abs() < 1e-12 * counted);

        let back = lift.adjoint_values(t.as_ref()).unwrap();
        for ((b, z), n) in back.iter().zip(&g).zip(lift.normal_diag()) {
            assert!((b - z * n).norm() < 1e-12 * n.max(1.0));
        }
        let zero = lift.adjoint(Mat::zeros(lift.rows(), lift.cols()).as_ref()).unwrap();
        assert!(zero.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (g, l1) in [(3, 1), (5, 2), (6, 3)] {
            let lift = op(g, l1);
            let gv = random_values(lift.gamma().len(), &mut rng);
            let x = random_matrix(lift.rows(), lift.cols(), &mut rng);
            let lhs = inner(lift.apply(&gv).unwrap().as_ref(), x.as_ref());
            let tx = lift.adjoint_values(x.as_ref()).unwrap();
            let rhs: Complex64 = gv.iter().zip(&tx).map(|(a, b)| a.conj() * b).sum();
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
        }
    }

    #[test]
    fn matrix_free_products_match_explicit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lift = op(4, 1);
        let g = random_values(lift.gamma().len(), &mut rng);
        let t = lift.apply(&g).unwrap();
        let h = random_values(lift.cols(), &mut rng);
        let y = random_values(lift.rows(), &mut rng);
        let th = lift.matvec(&g, &h).unwrap();
        for (i, v) in th.iter().enumerate() {
            let e: Complex64 = (0..lift.cols()).map(|j| t[(i, j)] * h[j]).sum();
            assert!((v - e).norm() < 1e-12);
        }
        let ty = lift.rmatvec(&g, &y).unwrap();
        for (j, v) in ty.iter().enumerate() {
            let e: Complex64 = (0..lift.rows()).map(|i| t[(i, j)].conj() * y[i]).sum();
            assert!((v - e).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_is_orthonormal_and_expands_the_lifting() {
        let lift = op(3, 1);
        let gamma = lift.gamma();
        let ks: Vec<Index2> = gamma.iter().filter(|&k| k != [0, 0]).collect();
        let mats: Vec<Mat<c64>> = ks.iter().map(|&k| lift.basis_matrix(k).unwrap()).collect();
        for (i, a) in mats.iter().enumerate() {
            for (j, b) in mats.iter().enumerate() {
                let ip = inner(a.as_ref(), b.as_ref());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c64::new(expect, 0.0)).norm() < 1e-13);
            }
        }
        assert!(matches!(lift.basis_matrix([0, 0]), Err(Error::DcIndex)));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_values(gamma.len(), &mut rng);
        let mut sum = Mat::<c64>::zeros(lift.rows(), lift.cols());
        for (&k, a) in ks.iter().zip(&mats) {
            let i = gamma.linear_index(k).unwrap();
            sum += a * faer::Scale(g[i] * lift.weights()[i]);
        }
        let t = lift.apply(&g).unwrap();
        assert!((&sum - &t).norm_l2() < 1e-12 * t.norm_l2());
    }

    #[test]
    fn projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lift = op(4, 2);
        let g = random_values(lift.gamma().len(), &mut rng);
        let t = lift.apply(&g).unwrap();
        let at = lift.project_structured(t.as_ref()).unwrap();
        assert!((&at - &t).norm_l2() < 1e-13 * t.norm_l2());

        let x = random_matrix(lift.rows(), lift.cols(), &mut rng);
        let a1 = lift.project_structured(x.as_ref()).unwrap();
        let a2 = lift.project_structured(a1.as_ref()).unwrap();
        assert!((&a2 - &a1).norm_l2() < 1e-13 * a1.norm_l2());
        let perp = lift.project_antistructured(x.as_ref()).unwrap();
        assert!(inner(a1.as_ref(), perp.as_ref()).norm() < 1e-12 * x.norm_l2().powi(2));
        assert!((&a1 + &perp - &x).norm_l2() < 1e-14 * x.norm_l2());
    }

    #[test]
    fn sampling_operator_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lift = op(3, 1);
        let full: Vec<Index2> = lift.gamma().iter().filter(|&k| k != [0, 0]).collect();
        let g = random_values(lift.gamma().len(), &mut rng);
        let t = lift.apply(&g).unwrap();
        let q = lift.sampling_operator(&full, t.as_ref()).unwrap();
        assert!((&q - &t).norm_l2() < 1e-13 * t.norm_l2());

        let x = random_matrix(lift.rows(), lift.cols(), &mut rng);
        let q = lift.sampling_operator(&[], x.as_ref()).unwrap();
        let perp = lift.project_antistructured(x.as_ref()).unwrap();
        assert!((&q - &perp).norm_l2() < 1e-14 * x.norm_l2());
        assert!(matches!(
            lift.sampling_operator(&[[0, 0]], x.as_ref()),
            Err(Error::DcIndex)
        ));
    }

    #[test]
    fn sampling_operator_is_unbiased() {
        let lift = op(2, 1);
        let pool: Vec<Index2> = lift.gamma().iter().filter(|&k| k != [0, 0]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(lift.rows(), lift.cols(), &mut rng);
        let draws = 10_000;
        let m = 5;
        let (rows, cols) = (lift.rows(), lift.cols());
        let mut sum = vec![[0.0f64; 2]; rows * cols];
        let mut sq = vec![[0.0f64; 2]; rows * cols];
        for _ in 0..draws {
            let omega: Vec<Index2> = (0..m).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            let q = lift.sampling_operator(&omega, x.as_ref()).unwrap();
            for j in 0..cols {
                for i in 0..rows {
                    let z = q[(i, j)];
                    let e = &mut sum[j * rows + i];
                    e[0] += z.re;
                    e[1] += z.im;
                    let s = &mut sq[j * rows + i];
                    s[0] += z.re * z.re;
                    s[1] += z.im * z.im;
                }
            }
        }
        let n = draws as f64;
        for j in 0..cols {
            for i in 0..rows {
                let target = [x[(i, j)].re, x[(i, j)].im];
                for part in 0..2 {
                    let mean = sum[j * rows + i][part] / n;
                    let var = (sq[j * rows + i][part] / n - mean * mean).max(0.0);
                    let sigma = (var / n).sqrt();
                    let dev = (mean - target[part]).abs();
                    assert!(dev <= 3.0 * sigma + 1e-12, "entry ({i},{j}): {dev} vs 3 sigma {sigma}");
                }
            }
        }
    }

    #[test]
    fn stripe_rank_matches_bound() {
        let ph = Phantom::stripe().unwrap();
        let gamma = IndexSet2D::square(4);
        let lift = LiftOperator::new(gamma, IndexSet2D::square(1)).unwrap();
        let f = ph.fourier_coeffs(&gamma).unwrap();
        let t = lift.build_matrix(&f).unwrap();
        let s = singular_values(t.as_ref()).unwrap();
        let r = rank_bound(&IndexSet2D::square(1), &IndexSet2D::symmetric(1, 0)).unwrap();
        assert_eq!(numerical_rank(&s, 1e-7), r);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let lift = op(3, 1);
        let g = FourierGrid::zeros(IndexSet2D::square(2));
        assert!(matches!(lift.build_matrix(&g), Err(Error::GridMismatch { .. })));
        assert!(matches!(
            lift.adjoint_values(Mat::zeros(3, 3).as_ref()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn random_phantoms_are_annihilated_by_the_edge_filter() {
        let l0 = IndexSet2D::square(1);
        let l1 = IndexSet2D::square(2);
        let gamma = IndexSet2D::square(5);
        let lift = LiftOperator::new(gamma, l1).unwrap();
        for seed in 0..4 {
            let ph = Phantom::random(&l0, seed, 0.0, &TraceOptions::default()).unwrap();
            let f = ph.fourier_coeffs(&gamma).unwrap();
            let t = lift.build_matrix(&f).unwrap();
            let mu = ph.edge_poly();
            let h: Vec<Complex64> = l1.iter().map(|k| mu.coeff(k)).collect();
            let th = lift.matvec(f.values(), &h).unwrap();
            let hn = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let res = th.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(res / (t.norm_l2() * hn) < 1e-7, "seed {seed}: {}", res / (t.norm_l2() * hn));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn multiplicities_sum_to_entry_count(gx in 0u32..5, gy in 0u32..5, lx in 0u32..3, ly in 0u32..3) {
            prop_assume!(lx <= gx && ly <= gy);
            let lift = LiftOperator::new(
                IndexSet2D::symmetric(gx, gy),
                IndexSet2D::symmetric(lx, ly),
            ).unwrap();
            let total: usize = lift.omega().iter().sum();
            prop_assert_eq!(total, lift.lambda1().len() * lift.lambda2().len());
            prop_assert!(lift.omega().iter().all(|&w| w >= 1));
        }

        #[test]
        fn adjoint_identity_holds(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lift = op(3, 1);
            let gv = random_values(lift.gamma().len(), &mut rng);
            let x = random_matrix(lift.rows(), lift.cols(), &mut rng);
            let lhs = inner(lift.apply(&gv).unwrap().as_ref(), x.as_ref());
            let tx = lift.adjoint_values(x.as_ref()).unwrap();
            let rhs: Complex64 = gv.iter().zip(&tx).map(|(a, b)| a.conj() * b).sum();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }
    }
}
