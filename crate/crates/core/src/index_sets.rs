//! Rectangular windows of the integer lattice and their Minkowski algebra.
//!
//! Every coefficient support in the library (edge-set bandwidth, filter
//! support, reconstruction grid) is an axis-aligned rectangle, stored by its
//! inclusive corners. Linear order is row-major with rows indexed by `ky`:
//! `idx = (ky - lo.y) * width_x + (kx - lo.x)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice point `(kx, ky)`.
pub type Index2 = [i64; 2];

/// Non-empty rectangle `[lo.x, hi.x] x [lo.y, hi.y]` of `Z^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawIndexSet")]
pub struct IndexSet2D {
    lo: Index2,
    hi: Index2,
}

#[derive(Deserialize)]
struct RawIndexSet {
    lo: Index2,
    hi: Index2,
}

impl TryFrom<RawIndexSet> for IndexSet2D {
    type Error = Error;

    fn try_from(raw: RawIndexSet) -> Result<Self> {
        IndexSet2D::new(raw.lo, raw.hi)
    }
}

impl fmt::Display for IndexSet2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]x[{}, {}]",
            self.lo[0], self.hi[0], self.lo[1], self.hi[1]
        )
    }
}

impl IndexSet2D {
    pub fn new(lo: Index2, hi: Index2) -> Result<Self> {
        if lo[0] > hi[0] || lo[1] > hi[1] {
            return Err(Error::InvalidIndexSet(format!(
                "lo {lo:?} exceeds hi {hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `[-hx, hx] x [-hy, hy]`.
    pub fn symmetric(half_x: u32, half_y: u32) -> Self {
        let (hx, hy) = (i64::from(half_x), i64::from(half_y));
        Self {
            lo: [-hx, -hy],
            hi: [hx, hy],
        }
    }

    /// `[-k, k]^2`, a `(2k+1) x (2k+1)` square.
    pub fn square(half: u32) -> Self {
        Self::symmetric(half, half)
    }

    /// Rectangle of the given side lengths, centered on the origin. Even
    /// sides put the extra index on the negative side.
    pub fn centered(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidIndexSet(format!("empty size {nx}x{ny}")));
        }
        let lo = [-(nx as i64 / 2), -(ny as i64 / 2)];
        Ok(Self {
            lo,
            hi: [lo[0] + nx as i64 - 1, lo[1] + ny as i64 - 1],
        })
    }

    pub fn lo(&self) -> Index2 {
        self.lo
    }

    pub fn hi(&self) -> Index2 {
        self.hi
    }

    /// Side lengths `(width_x, width_y)`.
    pub fn dims(&self) -> [usize; 2] {
        [
            (self.hi[0] - self.lo[0] + 1) as usize,
            (self.hi[1] - self.lo[1] + 1) as usize,
        ]
    }

    /// Cardinality `|L|`.
    pub fn len(&self) -> usize {
        let [nx, ny] = self.dims();
        nx * ny
    }

    /// Always false; index sets are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: Index2) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&k[0]) && (self.lo[1]..=self.hi[1]).contains(&k[1])
    }

    pub fn contains_set(&self, other: &IndexSet2D) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    /// True when the set is invariant under `k -> -k`.
    pub fn is_symmetric(&self) -> bool {
        self.lo[0] == -self.hi[0] && self.lo[1] == -self.hi[1]
    }

    pub fn linear_index(&self, k: Index2) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let nx = self.dims()[0];
        Some((k[1] - self.lo[1]) as usize * nx + (k[0] - self.lo[0]) as usize)
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn point(&self, idx: usize) -> Index2 {
        let nx = self.dims()[0];
        [
            self.lo[0] + (idx % nx) as i64,
            self.lo[1] + (idx / nx) as i64,
        ]
    }

    /// Points in linear order.
    pub fn iter(&self) -> impl Iterator<Item = Index2> + '_ {
        (self.lo[1]..=self.hi[1]).flat_map(move |y| (self.lo[0]..=self.hi[0]).map(move |x| [x, y]))
    }

    /// `{k + l : k in a, l in b}`.
    pub fn minkowski_sum(&self, other: &IndexSet2D) -> IndexSet2D {
        IndexSet2D {
            lo: [self.lo[0] + other.lo[0], self.lo[1] + other.lo[1]],
            hi: [self.hi[0] + other.hi[0], self.hi[1] + other.hi[1]],
        }
    }

    /// The `alpha`-fold Minkowski sum `L + L + ... + L`.
    pub fn dilate(&self, alpha: u32) -> Result<IndexSet2D> {
        if alpha == 0 {
            return Err(Error::InvalidIndexSet("zero dilation".into()));
        }
        let a = i64::from(alpha);
        Ok(IndexSet2D {
            lo: [a * self.lo[0], a * self.lo[1]],
            hi: [a * self.hi[0], a * self.hi[1]],
        })
    }

    /// `{-k : k in L}`.
    pub fn negate(&self) -> IndexSet2D {
        IndexSet2D {
            lo: [-self.hi[0], -self.hi[1]],
            hi: [-self.lo[0], -self.lo[1]],
        }
    }

    /// Smallest rectangle containing both sets.
    pub fn hull(&self, other: &IndexSet2D) -> IndexSet2D {
        IndexSet2D {
            lo: [self.lo[0].min(other.lo[0]), self.lo[1].min(other.lo[1])],
            hi: [self.hi[0].max(other.hi[0]), self.hi[1].max(other.hi[1])],
        }
    }

    /// Contraction `self : lambda = {l : l - k in self for all k in lambda}`.
    ///
    /// For `lambda` containing the origin the result lies inside `self` and is
    /// the row index set of the lifting built from a grid `self` with filter
    /// support `lambda`.
    pub fn contraction(&self, lambda: &IndexSet2D) -> Result<IndexSet2D> {
        let mut lo = [0; 2];
        let mut hi = [0; 2];
        for d in 0..2 {
            lo[d] = self.lo[d] + lambda.hi[d];
            hi[d] = self.hi[d] + lambda.lo[d];
            if lo[d] > hi[d] {
                return Err(Error::ContractionEmpty(format!("{self} : {lambda}")));
            }
        }
        Ok(IndexSet2D { lo, hi })
    }

    /// Number of integer translates of `inner` that fit inside `self`.
    pub fn shift_count(&self, inner: &IndexSet2D) -> Result<usize> {
        let (o, i) = (self.dims(), inner.dims());
        if i[0] > o[0] || i[1] > o[1] {
            return Err(Error::InvalidNesting {
                inner: inner.to_string(),
                outer: self.to_string(),
            });
        }
        Ok((o[0] - i[0] + 1) * (o[1] - i[1] + 1))
    }

    /// Translations `s` with `s + inner` contained in `self`, as a rectangle.
    pub fn shifts(&self, inner: &IndexSet2D) -> Result<IndexSet2D> {
        self.shift_count(inner)?;
        Ok(IndexSet2D {
            lo: [self.lo[0] - inner.lo[0], self.lo[1] - inner.lo[1]],
            hi: [self.hi[0] - inner.hi[0], self.hi[1] - inner.hi[1]],
        })
    }
}

/// Rank of the lifting for an edge set of bandwidth `lambda0` and filter
/// support `lambda1`: `R = |L1| - |L1 : L0|`.
pub fn rank_bound(lambda1: &IndexSet2D, lambda0: &IndexSet2D) -> Result<usize> {
    let shifts = lambda1.shift_count(lambda0)?;
    Ok(lambda1.len() - shifts)
}
