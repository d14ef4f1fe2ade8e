//! Row and column bases of the lifting, admissible nodes, the incoherence
//! measure, curve quadrature and the intersection-count check.
//!
//! Sign conventions: `e_row` spans the rows of `T(f)` literally, so
//! `e_row^T h = 0` for every annihilating filter `h`. The column space is
//! spanned by the Fourier coefficients of `w_i D_L2(r - r_i)`, i.e. entries
//! `exp(-j 2 pi k.r_i)`.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::IndexSet2D;
use crate::lifting::LiftOperator;
use crate::linalg::{singular_values, thin_svd};
use crate::phantom::FourierGrid;
use crate::trigpoly::{dirichlet, trace_zero_set, CurveDiscretization, Point, TrigPoly};

const MIN_NODE_DISTANCE: f64 = 1e-9;
const ADMISSIBLE_RATIO: f64 = 1e-10;
const MAX_COND_D: f64 = 1e12;
const SWAP_ATTEMPTS: usize = 200;

/// Signed distance `d` wrapped into `[-1/2, 1/2)`.
fn wrap(d: f64) -> f64 {
    d - (d + 0.5).floor()
}

fn torus_dist(a: Point, b: Point) -> f64 {
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

/// Dimension of the row space for filter support `lambda1` and edge
/// bandwidth `lambda0`; all of `lambda1` when `lambda0` does not fit.
pub fn row_space_dim(lambda1: &IndexSet2D, lambda0: &IndexSet2D) -> usize {
    lambda1.len() - lambda1.shift_count(lambda0).unwrap_or(0)
}

/// Distinct points, optionally remembered as indices into a traced curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeSet {
    points: Vec<Point>,
    curve_indices: Option<Vec<usize>>,
}

impl NodeSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let mut min = f64::INFINITY;
        for i in 0..points.len() {
            for j in 0..i {
                min = min.min(torus_dist(points[i], points[j]));
            }
        }
        if min <= MIN_NODE_DISTANCE {
            return Err(Error::DuplicateNodes(min));
        }
        Ok(Self {
            points,
            curve_indices: None,
        })
    }

    /// Nodes taken from the quadrature points of `curve`.
    pub fn from_curve(curve: &CurveDiscretization, indices: Vec<usize>) -> Result<Self> {
        let pts = curve.points();
        if let Some(&bad) = indices.iter().find(|&&i| i >= pts.len()) {
            return Err(Error::Config(format!(
                "curve index {bad} out of range ({} points)",
                pts.len()
            )));
        }
        let mut set = Self::new(indices.iter().map(|&i| pts[i]).collect())?;
        set.curve_indices = Some(indices);
        Ok(set)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn curve_indices(&self) -> Option<&[usize]> {
        self.curve_indices.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `|L1| x R` matrix with column `j` equal to `exp(j 2 pi k.r_j) / sqrt|L1|`.
pub fn e_row(nodes: &NodeSet, lambda1: &IndexSet2D) -> Mat<c64> {
    vandermonde(nodes.points(), lambda1, 1.0)
}

/// `exp(sign j 2 pi k.r_j) / sqrt|L|` over `L` in linear order.
fn vandermonde(points: &[Point], lambda: &IndexSet2D, sign: f64) -> Mat<c64> {
    let scale = 1.0 / (lambda.len() as f64).sqrt();
    let ks: Vec<_> = lambda.iter().collect();
    Mat::from_fn(ks.len(), points.len(), |i, j| {
        let r = points[j];
        let t = 2.0 * PI * (ks[i][0] as f64 * r[0] + ks[i][1] as f64 * r[1]);
        c64::cis(sign * t) * scale
    })
}

/// `G(P) = e_row^* e_row`, entries `D_L1(r_i - r_j) / |L1|`.
pub fn gram(nodes: &NodeSet, lambda1: &IndexSet2D) -> Mat<c64> {
    let e = e_row(nodes, lambda1);
    e.adjoint() * &e
}

fn lambda_min(g: MatRef<'_, c64>) -> Result<f64> {
    let ev = g
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::EigenFailure)?;
    Ok(ev.first().copied().unwrap_or(0.0))
}

/// Greedy farthest-point sampling of `m` curve points starting at `start`.
fn farthest_points(points: &[Point], m: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    let mut dist: Vec<f64> = points.iter().map(|&p| torus_dist(p, points[start])).collect();
    while chosen.len() < m {
        let (next, _) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty curve");
        chosen.push(next);
        for (d, &p) in dist.iter_mut().zip(points) {
            *d = d.min(torus_dist(p, points[next]));
        }
    }
    chosen
}

/// Selects `r` of the candidate columns by column-pivoted QR of `e_row`.
fn pivot_select(
    curve: &CurveDiscretization,
    candidates: &[usize],
    lambda1: &IndexSet2D,
    r: usize,
) -> Result<NodeSet> {
    let pts: Vec<Point> = candidates.iter().map(|&i| curve.points()[i]).collect();
    let e = vandermonde(&pts, lambda1, 1.0);
    let qr = e.col_piv_qr();
    let perm = qr.P().arrays().0.to_vec();
    let mut picked: Vec<usize> = perm[..r].iter().map(|&j| candidates[j]).collect();
    picked.sort_unstable();
    let nodes = NodeSet::from_curve(curve, picked)?;
    let s = singular_values(e_row(&nodes, lambda1).as_ref())?;
    let ratio = s.last().copied().unwrap_or(0.0) / s[0];
    if ratio.is_nan() || ratio <= ADMISSIBLE_RATIO {
        return Err(Error::AdmissibleSelectionFailed(ratio));
    }
    Ok(nodes)
}

fn check_curve(curve: &CurveDiscretization, m: usize) -> Result<()> {
    if curve.len() < m {
        return Err(Error::Config(format!(
            "curve has {} points, at least {m} candidates are needed",
            curve.len()
        )));
    }
    Ok(())
}

/// Admissible nodes: `R + |L0|` farthest-point candidates, then the `R`
/// columns a rank-revealing QR keeps.
pub fn select_admissible(
    curve: &CurveDiscretization,
    lambda1: &IndexSet2D,
    lambda0: &IndexSet2D,
) -> Result<NodeSet> {
    select_admissible_from(curve, lambda1, lambda0, 0)
}

fn select_admissible_from(
    curve: &CurveDiscretization,
    lambda1: &IndexSet2D,
    lambda0: &IndexSet2D,
    start: usize,
) -> Result<NodeSet> {
    let r = row_space_dim(lambda1, lambda0);
    let m = r + lambda0.len();
    check_curve(curve, m)?;
    let candidates = farthest_points(curve.points(), m, start % curve.len());
    pivot_select(curve, &candidates, lambda1, r)
}

/// Start index of restart `i`: golden-ratio rotation around the curve, so a
/// run with more restarts revisits every start of a shorter run.
fn restart_start(i: usize, n: usize) -> usize {
    const PHI_FRAC: f64 = 0.618_033_988_749_895;
    ((i as f64 * PHI_FRAC).fract() * n as f64) as usize % n
}

/// One restart: seeded node set followed by random single-node swaps that
/// are kept when they raise `lambda_min[G(P)]`.
fn restart_search(
    curve: &CurveDiscretization,
    lambda1: &IndexSet2D,
    lambda0: &IndexSet2D,
    i: usize,
) -> Result<f64> {
    let nodes = select_admissible_from(curve, lambda1, lambda0, restart_start(i, curve.len()))?;
    let mut idx = nodes.curve_indices().expect("curve nodes").to_vec();
    let pts = curve.points();
    let eval = |idx: &[usize]| -> Result<f64> {
        let p: Vec<Point> = idx.iter().map(|&i| pts[i]).collect();
        let e = vandermonde(&p, lambda1, 1.0);
        lambda_min((e.adjoint() * &e).as_ref())
    };
    let mut best = eval(&idx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + i as u64);
    for _ in 0..SWAP_ATTEMPTS {
        let slot = rng.random_range(0..idx.len());
        let cand = rng.random_range(0..pts.len());
        if idx.contains(&cand) {
            continue;
        }
        let old = idx[slot];
        idx[slot] = cand;
        let v = eval(&idx)?;
        if v > best {
            best = v;
        } else {
            idx[slot] = old;
        }
    }
    if best <= 0.0 {
        return Err(Error::AdmissibleSelectionFailed(best));
    }
    Ok(1.0 / best)
}

/// Upper bound `rho_hat` on the incoherence measure: the smallest
/// `1 / lambda_min[G(P)]` found over `restarts` seeded searches.
pub fn incoherence_upper_bound(
    curve: &CurveDiscretization,
    lambda1: &IndexSet2D,
    lambda0: &IndexSet2D,
    restarts: usize,
) -> Result<f64> {
    if restarts == 0 {
        return Err(Error::Config("at least one restart is required".into()));
    }
    let vals = (0..restarts)
        .into_par_iter()
        .map(|i| restart_search(curve, lambda1, lambda0, i))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min).max(1.0))
}

/// Smallest coordinate-wise torus separation `min_{i != j} min(|dx|, |dy|)`.
pub fn coordinate_separation(nodes: &NodeSet) -> f64 {
    let p = nodes.points();
    let mut delta = f64::INFINITY;
    for i in 0..p.len() {
        for j in 0..i {
            let dx = wrap(p[i][0] - p[j][0]).abs();
            let dy = wrap(p[i][1] - p[j][1]).abs();
            delta = delta.min(dx.min(dy));
        }
    }
    delta
}

/// Separation bound `(1 - 1/(sqrt|L1| delta))^-2` on `1/lambda_min[G]`.
pub fn separation_bound(nodes: &NodeSet, lambda1: &IndexSet2D) -> Result<f64> {
    let [nx, ny] = lambda1.dims();
    if nx != ny || !lambda1.is_symmetric() {
        return Err(Error::InvalidIndexSet(format!(
            "separation bound needs a square symmetric filter support, got {lambda1}"
        )));
    }
    separation_bound_value(lambda1.len(), coordinate_separation(nodes))
}

pub fn separation_bound_value(lambda1_len: usize, delta: f64) -> Result<f64> {
    let s = (lambda1_len as f64).sqrt() * delta;
    if s.is_nan() || s <= 1.0 {
        return Err(Error::SeparationTooSmall(s));
    }
    Ok((1.0 - 1.0 / s).powi(-2))
}

/// Quadrature weights `w_i` reproducing `oint gamma n ds` for `gamma` in
/// `B_L` from the node values `gamma(r_i)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureWeights {
    pub nodes: NodeSet,
    pub lambda: IndexSet2D,
    pub w: Vec<[Complex64; 2]>,
}

impl QuadratureWeights {
    /// `sum_i gamma(r_i) w_i`.
    pub fn apply(&self, values: &[Complex64]) -> Result<[Complex64; 2]> {
        if values.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: (self.w.len(), 1),
                found: (values.len(), 1),
            });
        }
        let mut q = [Complex64::new(0.0, 0.0); 2];
        for (g, w) in values.iter().zip(&self.w) {
            q[0] += g * w[0];
            q[1] += g * w[1];
        }
        Ok(q)
    }

    pub fn integrate(&self, gamma: &TrigPoly) -> Result<[Complex64; 2]> {
        let vals: Vec<Complex64> = self.nodes.points().iter().map(|&r| gamma.eval(r)).collect();
        self.apply(&vals)
    }
}

/// Dense curve quadrature of `oint gamma n ds`.
pub fn curve_integral(curve: &CurveDiscretization, gamma: impl Fn(Point) -> Complex64) -> [Complex64; 2] {
    let mut q = [Complex64::new(0.0, 0.0); 2];
    for ((&p, n), &ds) in curve.points().iter().zip(curve.normals()).zip(curve.ds()) {
        let g = gamma(p) * ds;
        q[0] += g * n[0];
        q[1] += g * n[1];
    }
    q
}

/// `w = D^-T v` with `D_ij = D_L(r_i - r_j)` and `v_i = oint D_L(r - r_i) n ds`.
pub fn quadrature_weights(
    curve: &CurveDiscretization,
    nodes: &NodeSet,
    lambda: &IndexSet2D,
    lambda0: &IndexSet2D,
) -> Result<QuadratureWeights> {
    let s = row_space_dim(lambda, lambda0);
    if nodes.len() != s {
        return Err(Error::Config(format!(
            "quadrature on {lambda} needs {s} nodes, got {}",
            nodes.len()
        )));
    }
    let p = nodes.points();
    let d = Mat::from_fn(s, s, |i, j| {
        dirichlet(lambda, [p[i][0] - p[j][0], p[i][1] - p[j][1]])
    });
    let sv = singular_values(d.as_ref())?;
    let cond = sv[0] / sv[s - 1];
    if cond.is_nan() || cond > MAX_COND_D {
        return Err(Error::IllConditionedD(cond));
    }
    let mut v = Mat::<c64>::zeros(s, 2);
    for (i, &ri) in p.iter().enumerate() {
        let q = curve_integral(curve, |r| dirichlet(lambda, [r[0] - ri[0], r[1] - ri[1]]));
        v[(i, 0)] = q[0];
        v[(i, 1)] = q[1];
    }
    let w = d.partial_piv_lu().solve_transpose(&v);
    Ok(QuadratureWeights {
        nodes: nodes.clone(),
        lambda: *lambda,
        w: (0..s).map(|i| [w[(i, 0)], w[(i, 1)]]).collect(),
    })
}

/// `|L2| x R` unweighted column-space Vandermonde matrix, entries
/// `exp(-j 2 pi k.r_i) / sqrt|L2|`.
pub fn e_col_tilde(nodes: &NodeSet, lambda2: &IndexSet2D) -> Mat<c64> {
    vandermonde(nodes.points(), lambda2, -1.0)
}

/// `2|L2| x R` column-space basis `[E~ W_x; E~ W_y]` with unit-norm columns.
pub fn e_col(weights: &QuadratureWeights, lambda2: &IndexSet2D) -> Result<Mat<c64>> {
    let base = e_col_tilde(&weights.nodes, lambda2);
    let half = base.nrows();
    let mut out = Mat::zeros(2 * half, base.ncols());
    for (j, w) in weights.w.iter().enumerate() {
        let norm = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroWeightVector(j));
        }
        let (ax, ay) = (w[0] / norm, w[1] / norm);
        for i in 0..half {
            out[(i, j)] = base[(i, j)] * ax;
            out[(half + i, j)] = base[(i, j)] * ay;
        }
    }
    Ok(out)
}

/// Exact column-space basis of the lifting of an edge set traced as
/// `curve`: column `i` holds the coefficients over `L2` of
/// `oint D_L1(s - r_i) D_L2(r - s) n(s) ds`, stacked x over y and
/// normalised. The kernels `D_L1(. - r_i)` span the complement of the
/// annihilated filters, so for admissible `nodes` this is a basis.
pub fn column_space_basis(
    curve: &CurveDiscretization,
    nodes: &NodeSet,
    lambda1: &IndexSet2D,
    lambda2: &IndexSet2D,
) -> Mat<c64> {
    let half = lambda2.len();
    let ls: Vec<_> = lambda2.iter().collect();
    let mut out = Mat::zeros(2 * half, nodes.len());
    for (j, &ri) in nodes.points().iter().enumerate() {
        for ((&s, n), &ds) in curve.points().iter().zip(curve.normals()).zip(curve.ds()) {
            let a = dirichlet(lambda1, [s[0] - ri[0], s[1] - ri[1]]) * ds;
            for (i, l) in ls.iter().enumerate() {
                let e = a * Complex64::cis(-2.0 * PI * (l[0] as f64 * s[0] + l[1] as f64 * s[1]));
                out[(i, j)] += e * n[0];
                out[(half + i, j)] += e * n[1];
            }
        }
        let norm = out.col(j).norm_l2();
        if norm > 0.0 {
            for i in 0..2 * half {
                out[(i, j)] /= norm;
            }
        }
    }
    out
}

/// Annihilating filters `h_s[k] = mu0[k - s]` for every shift `s` with
/// `s + L0` inside `lambda1`, as the columns of a `|L1| x |L1 : L0|` matrix.
pub fn annihilating_filters(mu0: &TrigPoly, lambda1: &IndexSet2D) -> Result<Mat<c64>> {
    let l0 = mu0.support();
    let shifts = lambda1.shifts(&l0)?;
    let ks: Vec<_> = lambda1.iter().collect();
    let ss: Vec<_> = shifts.iter().collect();
    Ok(Mat::from_fn(ks.len(), ss.len(), |i, j| {
        mu0.coeff([ks[i][0] - ss[j][0], ks[i][1] - ss[j][1]])
    }))
}

/// Right singular vectors beyond `rank`, a basis of the numerical nullspace.
pub fn numerical_nullspace(t: MatRef<'_, c64>, rank: usize) -> Result<Mat<c64>> {
    let svd = t.svd().map_err(|_| Error::SvdFailure)?;
    let v = svd.V();
    Ok(v.get(.., rank.min(v.ncols())..).to_owned())
}

/// Prop. 3 style coherence evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub rank: usize,
    pub gap_ratio: f64,
    pub max_pu: f64,
    pub max_pv: f64,
    pub rho_hat: f64,
    /// `rho_hat R c_s / |Gamma|` with `c_s = |Gamma| / |L1|`.
    pub bound: f64,
}

impl CoherenceReport {
    pub fn holds(&self) -> bool {
        self.max_pu <= self.bound && self.max_pv <= self.bound
    }
}

/// Evaluates `max_k |P_U A_k|_F^2` and `max_k |P_V A_k|_F^2` over
/// `Gamma \ {0}` for the rank-`rank` singular subspaces of `T(f)` and
/// compares them with `rho_hat R c_s / |Gamma|`.
pub fn coherence_check(
    op: &LiftOperator,
    f: &FourierGrid,
    rank: usize,
    rho_hat: f64,
) -> Result<CoherenceReport> {
    let t = op.build_matrix(f)?;
    let (u, s, v) = thin_svd(t.as_ref())?;
    let gap_ratio = if rank == 0 || rank > s.len() {
        0.0
    } else if rank == s.len() {
        f64::INFINITY
    } else {
        s[rank - 1] / s[rank]
    };
    if !(gap_ratio > 1e4) {
        return Err(Error::NoSpectralGap { rank, ratio: gap_ratio });
    }
    let u = u.get(.., ..rank);
    let v = v.get(.., ..rank);
    let (gamma, l1, l2) = (op.gamma(), op.lambda1(), op.lambda2());
    let half = l2.len();
    let row_sq: Vec<f64> = (0..v.nrows())
        .map(|c| (0..rank).map(|j| v[(c, j)].norm_sqr()).sum())
        .collect();
    let (mut max_pu, mut max_pv) = (0.0f64, 0.0f64);
    for (idx, k) in gamma.iter().enumerate() {
        if k == [0, 0] {
            continue;
        }
        let om = op.omega()[idx] as f64;
        let norm = (k[0] as f64).hypot(k[1] as f64);
        let (ax, ay) = (k[0] as f64 / (norm * om.sqrt()), k[1] as f64 / (norm * om.sqrt()));
        let (mut pu, mut pv) = (0.0, 0.0);
        for (c, kp) in l1.iter().enumerate() {
            let Some(r) = l2.linear_index([k[0] + kp[0], k[1] + kp[1]]) else {
                continue;
            };
            pv += row_sq[c] / om;
            pu += (0..rank)
                .map(|j| (u[(r, j)] * ax + u[(half + r, j)] * ay).norm_sqr())
                .sum::<f64>();
        }
        max_pu = max_pu.max(pu);
        max_pv = max_pv.max(pv);
    }
    Ok(CoherenceReport {
        rank,
        gap_ratio,
        max_pu,
        max_pv,
        rho_hat,
        bound: rho_hat * rank as f64 / l1.len() as f64,
    })
}

/// Counts the isolated common zeros of `mu0` and `mu1` by sign changes of
/// `mu1` along the traced loops of `{mu0 = 0}`, and checks the count
/// against `R + |L0|` with `L1` the hull of both supports.
pub fn bkk_intersection_check(mu0: &TrigPoly, mu1: &TrigPoly, grid_n: usize) -> Result<usize> {
    if !mu0.is_real() || !mu1.is_real() {
        return Err(Error::Config("intersection count needs real polynomials".into()));
    }
    let l0 = mu0.support();
    let l1 = mu1.support().hull(&l0);
    let bound = row_space_dim(&l1, &l0) + l0.len();
    let curve = trace_zero_set(mu0, grid_n, 1e-12)?;
    let vals: Vec<f64> = curve.points().iter().map(|&r| mu1.eval_real(r)).collect();
    let floor = 1e-9 * mu1.l1_norm();
    if vals.iter().all(|v| v.abs() <= floor) {
        return Err(Error::SharedFactorSuspected(
            "second polynomial vanishes along the whole curve".into(),
        ));
    }
    let mut count = 0;
    for range in curve.loops() {
        let lv = &vals[range.clone()];
        for i in 0..lv.len() {
            let (a, b) = (lv[i], lv[(i + 1) % lv.len()]);
            if (a < 0.0) != (b < 0.0) {
                count += 1;
            }
        }
    }
    if count >= bound {
        return Err(Error::SharedFactorSuspected(format!(
            "{count} sign changes reach the bound {bound}"
        )));
    }
    Ok(count)
}

/// Incoherence summary for one edge set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoReport {
    pub rho_hat: f64,
    pub lambda_min: f64,
    pub separation: f64,
    /// Separation bound, absent when its precondition fails.
    pub bounds: Option<f64>,
    pub principal_angles: Vec<f64>,
}

/// `rho_hat`, the admissible node set's separation and bound, and principal
/// angles between `span e_row` and the row space of `T(f)` when given.
pub fn rho_report(
    curve: &CurveDiscretization,
    lambda1: &IndexSet2D,
    lambda0: &IndexSet2D,
    restarts: usize,
    lifted: Option<MatRef<'_, c64>>,
) -> Result<RhoReport> {
    let rho_hat = incoherence_upper_bound(curve, lambda1, lambda0, restarts)?;
    let nodes = select_admissible(curve, lambda1, lambda0)?;
    let lmin = lambda_min(gram(&nodes, lambda1).as_ref())?;
    let separation = coordinate_separation(&nodes);
    let bounds = if lambda1.dims()[0] == lambda1.dims()[1] && lambda1.is_symmetric() {
        separation_bound_value(lambda1.len(), separation).ok()
    } else {
        None
    };
    let principal_angles = match lifted {
        Some(t) => {
            let r = nodes.len();
            let (_, _, v) = thin_svd(t)?;
            // Rows of T span conj(range T^*).
            let rows = Mat::from_fn(v.nrows(), r, |i, j| v[(i, j)].conj());
            crate::linalg::principal_angles(e_row(&nodes, lambda1).as_ref(), rows.as_ref())?
        }
        None => Vec::new(),
    };
    Ok(RhoReport {
        rho_hat,
        lambda_min: lmin,
        separation,
        bounds,
        principal_angles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::principal_angles;
    use crate::phantom::Phantom;
    use crate::trigpoly::TraceOptions;
    use rand::seq::index::sample;

    fn random_phantom(seed: u64) -> Phantom {
        Phantom::random(&IndexSet2D::square(1), seed, 0.0, &TraceOptions::default()).unwrap()
    }

    #[test]
    fn e_row_columns_and_gram() {
        let ph = random_phantom(3);
        let curve = ph.curve().unwrap();
        let l1 = IndexSet2D::square(3);
        let nodes = select_admissible(curve, &l1, &IndexSet2D::square(1)).unwrap();
        assert_eq!(nodes.len(), 24);
        let e = e_row(&nodes, &l1);
        for j in 0..e.ncols() {
            assert!((e.col(j).norm_l2() - 1.0).abs() < 1e-14);
        }
        let g = gram(&nodes, &l1);
        let p = nodes.points();
        for i in 0..p.len() {
            assert!((g[(i, i)].re - 1.0).abs() < 1e-13);
            for j in 0..p.len() {
                let d = dirichlet(&l1, [p[i][0] - p[j][0], p[i][1] - p[j][1]]) / 49.0;
                // G_ij = conj(e_i)^T e_j = D(r_j - r_i) / |L1|; conj since D(-r) = conj D(r).
                assert!((g[(i, j)] - d.conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn pivoting_beats_random_subsets() {
        let ph = random_phantom(5);
        let curve = ph.curve().unwrap();
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let nodes = select_admissible(curve, &l1, &l0).unwrap();
        let s_sel = *singular_values(e_row(&nodes, &l1).as_ref()).unwrap().last().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut wins = 0;
        for _ in 0..100 {
            let idx = sample(&mut rng, curve.len(), nodes.len()).into_vec();
            let set = NodeSet::from_curve(curve, idx).unwrap();
            let s = *singular_values(e_row(&set, &l1).as_ref()).unwrap().last().unwrap();
            wins += (s_sel > s) as usize;
        }
        assert!(wins >= 95, "{wins}");
    }

    #[test]
    fn nullspace_is_orthogonal_to_rows() {
        let ph = random_phantom(8);
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let nodes = select_admissible(ph.curve().unwrap(), &l1, &l0).unwrap();
        let h = annihilating_filters(ph.edge_poly(), &l1).unwrap();
        assert_eq!(h.ncols(), 25);
        let e = e_row(&nodes, &l1);
        let prod = e.transpose() * &h;
        let scale = h.norm_l2() / (h.ncols() as f64).sqrt();
        for j in 0..prod.ncols() {
            for i in 0..prod.nrows() {
                assert!(prod[(i, j)].norm() / scale < 1e-8, "{}", prod[(i, j)].norm());
            }
        }
    }

    #[test]
    fn nullspace_matches_annihilating_filters() {
        let ph = random_phantom(2);
        let gamma = IndexSet2D::square(7);
        let l1 = IndexSet2D::square(3);
        let op = LiftOperator::new(gamma, l1).unwrap();
        let t = op.build_matrix(&ph.fourier_coeffs(&gamma).unwrap()).unwrap();
        let null = numerical_nullspace(t.as_ref(), 24).unwrap();
        let h = annihilating_filters(ph.edge_poly(), &l1).unwrap();
        let ang = principal_angles(null.as_ref(), h.as_ref()).unwrap();
        assert!(ang.iter().all(|&a| a < 1e-5), "{ang:?}");
    }

    #[test]
    fn incoherence_degenerate_and_monotone() {
        let ph = random_phantom(4);
        let curve = ph.curve().unwrap();
        let one = IndexSet2D::square(0);
        let b = incoherence_upper_bound(curve, &one, &IndexSet2D::square(1), 2).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        let (l1, l0) = (IndexSet2D::square(2), IndexSet2D::square(1));
        let mut prev = f64::INFINITY;
        for restarts in 1..=4 {
            let v = incoherence_upper_bound(curve, &l1, &l0, restarts).unwrap();
            assert!(v >= 1.0 && v <= prev, "{v} after {prev}");
            prev = v;
        }
    }

    #[test]
    fn incoherence_grows_on_shrinking_level_sets() {
        let mu = TrigPoly::cos_sum(-1.0, -1.0, 0.0);
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let mut prev = 0.0;
        for level in [-0.5, -1.4, -1.8] {
            let curve = trace_zero_set(&mu.level_shifted(level), 256, 1e-12).unwrap();
            let rho = incoherence_upper_bound(&curve, &l1, &l0, 3).unwrap();
            assert!(rho > prev, "level {level}: {rho} after {prev}");
            prev = rho;
        }
    }

    #[test]
    fn separation_bound_values() {
        assert!((separation_bound_value(49, 2.0 / 7.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((separation_bound_value(49, 1e9).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(separation_bound_value(49, 0.1), Err(Error::SeparationTooSmall(_))));
    }

    #[test]
    fn separation_bound_dominates() {
        let l1 = IndexSet2D::square(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let r = rng.random_range(2..=5usize);
            let xs: Vec<f64> = (0..r).map(|i| (i as f64 + rng.random_range(0.0..0.2)) / r as f64).collect();
            let mut ys = xs.clone();
            for i in (1..r).rev() {
                ys.swap(i, rng.random_range(0..=i));
            }
            let pts: Vec<Point> = xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect();
            let nodes = NodeSet::new(pts).unwrap();
            let Ok(bound) = separation_bound(&nodes, &l1) else { continue };
            let lmin = lambda_min(gram(&nodes, &l1).as_ref()).unwrap();
            assert!(1.0 / lmin <= bound, "{} > {bound}", 1.0 / lmin);
        }
    }

    #[test]
    fn quadrature_is_exact_on_band() {
        let ph = random_phantom(6);
        let curve = ph.curve().unwrap();
        let (lam, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let nodes = select_admissible(curve, &lam, &l0).unwrap();
        let w = quadrature_weights(curve, &nodes, &lam, &l0).unwrap();
        let one = TrigPoly::new(IndexSet2D::square(0), vec![Complex64::new(1.0, 0.0)], true).unwrap();
        let q = w.integrate(&one).unwrap();
        assert!(q[0].norm() < 1e-6 && q[1].norm() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let c: Vec<Complex64> = (0..lam.len())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let g = TrigPoly::new(lam, c, false).unwrap();
            let dense = curve_integral(curve, |r| g.eval(r));
            let quad = w.integrate(&g).unwrap();
            let err = ((dense[0] - quad[0]).norm_sqr() + (dense[1] - quad[1]).norm_sqr()).sqrt();
            let mag = (dense[0].norm_sqr() + dense[1].norm_sqr()).sqrt();
            assert!(err < 1e-6 * mag, "{err} vs {mag}");
        }
    }

    #[test]
    fn exact_basis_spans_the_column_space() {
        let gamma = IndexSet2D::square(7);
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let op = LiftOperator::new(gamma, l1).unwrap();
        for seed in 0..3 {
            let ph = random_phantom(seed);
            let curve = ph.curve().unwrap();
            let t = op.build_matrix(&ph.fourier_coeffs(&gamma).unwrap()).unwrap();
            let (u, _, _) = thin_svd(t.as_ref()).unwrap();
            let nodes = select_admissible(curve, &l1, &l0).unwrap();
            let basis = column_space_basis(curve, &nodes, &l1, &op.lambda2());
            let ang = principal_angles(basis.as_ref(), u.get(.., ..24)).unwrap();
            assert_eq!(ang.len(), 24);
            assert!(ang.iter().all(|&a| a < 1e-4), "{ang:?}");
        }
    }

    #[test]
    fn e_col_has_unit_columns() {
        let ph = random_phantom(1);
        let curve = ph.curve().unwrap();
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let nodes = select_admissible(curve, &l1, &l0).unwrap();
        let w = quadrature_weights(curve, &nodes, &l1, &l0).unwrap();
        let e = e_col(&w, &IndexSet2D::square(4)).unwrap();
        assert_eq!((e.nrows(), e.ncols()), (162, 24));
        for j in 0..e.ncols() {
            assert!((e.col(j).norm_l2() - 1.0).abs() < 1e-12);
        }
        let mut zero = w.clone();
        zero.w[3] = [Complex64::new(0.0, 0.0); 2];
        assert!(matches!(e_col(&zero, &IndexSet2D::square(4)), Err(Error::ZeroWeightVector(3))));
    }

    #[test]
    fn singular_value_chain() {
        let ph = random_phantom(7);
        let curve = ph.curve().unwrap();
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let l2 = IndexSet2D::square(4);
        let nodes = select_admissible(curve, &l1, &l0).unwrap();
        let w = quadrature_weights(curve, &nodes, &l1, &l0).unwrap();
        let smin = |m: Mat<c64>| *singular_values(m.as_ref()).unwrap().last().unwrap();
        let s_row = smin(e_row(&nodes, &l1));
        let s_tilde = smin(e_col_tilde(&nodes, &l2));
        let s_col = smin(e_col(&w, &l2).unwrap());
        assert!(s_col >= s_tilde * (1.0 - 1e-12));
        assert!(s_row <= s_tilde, "{s_row} > {s_tilde}");
    }

    #[test]
    fn coherence_bound_on_phantoms() {
        let gamma = IndexSet2D::square(7);
        let (l1, l0) = (IndexSet2D::square(3), IndexSet2D::square(1));
        let op = LiftOperator::new(gamma, l1).unwrap();
        for seed in 0..3 {
            let ph = random_phantom(seed);
            let rho = incoherence_upper_bound(ph.curve().unwrap(), &l1, &l0, 2).unwrap();
            let f = ph.fourier_coeffs(&gamma).unwrap();
            let rep = coherence_check(&op, &f, 24, rho).unwrap();
            assert!(rep.max_pu <= 1.0 + 1e-12 && rep.max_pv <= 1.0 + 1e-12);
            assert!(rep.holds(), "{rep:?}");
        }
        let f = random_phantom(0).fourier_coeffs(&gamma).unwrap();
        assert!(matches!(coherence_check(&op, &f, 20, 1.0), Err(Error::NoSpectralGap { .. })));
    }

    #[test]
    fn bkk_counts() {
        assert_eq!(bkk_intersection_check(&TrigPoly::sin_x(), &TrigPoly::sin_y(), 256).unwrap(), 4);
        let mu = random_edge_poly_for_test(1);
        assert!(matches!(
            bkk_intersection_check(&mu, &mu, 256),
            Err(Error::SharedFactorSuspected(_))
        ));
    }

    fn random_edge_poly_for_test(seed: u64) -> TrigPoly {
        crate::trigpoly::random_edge_poly(&IndexSet2D::square(1), seed, 0.0).unwrap()
    }
}
