//! Thin wrappers over `faer` decompositions used across the crate.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.singular_values().map_err(|_| Error::SvdFailure)
}

/// Thin SVD `a = U diag(s) V^*` with `s` non-increasing.
pub fn thin_svd(a: MatRef<'_, c64>) -> Result<(Mat<c64>, Vec<f64>, Mat<c64>)> {
    let svd = a.thin_svd().map_err(|_| Error::SvdFailure)?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((svd.U().to_owned(), s, svd.V().to_owned()))
}

pub fn nuclear_norm(a: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

/// Number of singular values above `rel_tol * s_max`.
pub fn numerical_rank(s: &[f64], rel_tol: f64) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn orthonormalize(a: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let (u, s, _) = thin_svd(a)?;
    let r = numerical_rank(&s, 1e-12);
    Ok(u.get(.., ..r).to_owned())
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`. Computed from `sin theta = sigma((I - Q_a Q_a^*) Q_b)` with the
/// smaller subspace as `b`, which stays accurate for tiny angles.
pub fn principal_angles(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: (a.nrows(), a.ncols()),
            found: (b.nrows(), b.ncols()),
        });
    }
    let mut qa = orthonormalize(a)?;
    let mut qb = orthonormalize(b)?;
    if qb.ncols() > qa.ncols() {
        std::mem::swap(&mut qa, &mut qb);
    }
    let resid = &qb - &qa * (qa.adjoint() * &qb);
    let mut angles: Vec<f64> = singular_values(resid.as_ref())?
        .into_iter()
        .map(|s| s.min(1.0).asin())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Frobenius inner product `tr(a^* b)`.
pub fn inner(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].conj() * b[(i, j)];
        }
    }
    acc
}
