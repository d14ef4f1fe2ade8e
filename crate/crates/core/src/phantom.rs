//! Ground-truth Fourier coefficients of two-region piecewise-constant images.
//!
//! The gradient of `f = a_in 1_{mu<0} + a_out 1_{mu>0}` is a measure on the
//! edge curve, `grad f = (a_out - a_in) n ds`, so its Fourier coefficients
//! are curve integrals. These are evaluated with the tracer's quadrature and
//! divided by `j 2 pi k` to obtain `f^[k]`; the DC term comes from the area of
//! `{mu < 0}`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_sets::{Index2, IndexSet2D};
use crate::io;
use crate::trigpoly::{
    phase_row, random_edge_poly, trace_zero_set_with, CurveDiscretization, TraceOptions, TrigPoly,
};

/// Complex coefficients over a rectangular grid, with an optional sampling mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFourierGrid")]
pub struct FourierGrid {
    grid: IndexSet2D,
    values: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<bool>>,
}

#[derive(Deserialize)]
struct RawFourierGrid {
    grid: IndexSet2D,
    values: Vec<Complex64>,
    #[serde(default)]
    mask: Option<Vec<bool>>,
}

impl TryFrom<RawFourierGrid> for FourierGrid {
    type Error = Error;

    fn try_from(raw: RawFourierGrid) -> Result<Self> {
        let mut g = FourierGrid::new(raw.grid, raw.values)?;
        if let Some(mask) = raw.mask {
            g.set_mask(mask)?;
        }
        Ok(g)
    }
}

impl FourierGrid {
    pub fn new(grid: IndexSet2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: (grid.len(), 1),
                found: (values.len(), 1),
            });
        }
        Ok(Self {
            grid,
            values,
            mask: None,
        })
    }

    pub fn zeros(grid: IndexSet2D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            mask: None,
        }
    }

    pub fn grid(&self) -> IndexSet2D {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Coefficient at `k`, zero outside the grid.
    pub fn get(&self, k: Index2) -> Complex64 {
        match self.grid.linear_index(k) {
            Some(i) => self.values[i],
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn set_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: (self.grid.len(), 1),
                found: (mask.len(), 1),
            });
        }
        self.mask = Some(mask);
        Ok(())
    }

    pub fn clear_mask(&mut self) {
        self.mask = None;
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.set_mask(mask)?;
        Ok(self)
    }

    /// Sampled indices in linear order; every index when no mask is set.
    pub fn sampled(&self) -> Vec<usize> {
        match &self.mask {
            Some(m) => (0..m.len()).filter(|&i| m[i]).collect(),
            None => (0..self.grid.len()).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Euclidean norm over the grid with the DC entry left out.
    pub fn norm_without_dc(&self) -> f64 {
        let dc = self.grid.linear_index([0, 0]);
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != dc)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `||self - truth|| / ||truth||` over the grid without the DC entry.
    pub fn rel_err_without_dc(&self, truth: &FourierGrid) -> Result<f64> {
        let diff = self.sub(truth)?;
        Ok(diff.norm_without_dc() / truth.norm_without_dc().max(f64::MIN_POSITIVE))
    }

    pub fn sub(&self, other: &FourierGrid) -> Result<FourierGrid> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        FourierGrid::new(self.grid, values)
    }

    /// Adds `other` in place (superposition of phantoms).
    pub fn add_assign(&mut self, other: &FourierGrid) -> Result<()> {
        self.check_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    fn check_grid(&self, other: &FourierGrid) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                expected: self.grid.to_string(),
                found: other.grid.to_string(),
            });
        }
        Ok(())
    }

    /// `max_k |v[-k] - conj(v[k])|`; requires a symmetric grid.
    pub fn conj_symmetry_gap(&self) -> Result<f64> {
        if !self.grid.is_symmetric() {
            return Err(Error::InvalidIndexSet(format!(
                "{} is not origin-symmetric",
                self.grid
            )));
        }
        let n = self.values.len();
        Ok((0..n)
            .map(|i| (self.values[n - 1 - i] - self.values[i].conj()).norm())
            .fold(0.0, f64::max))
    }

    /// Replaces `v[k]` by `(v[k] + conj(v[-k])) / 2`.
    pub fn conj_symmetrize(&mut self) -> Result<()> {
        self.conj_symmetry_gap()?;
        let n = self.values.len();
        let old = self.values.clone();
        for i in 0..n {
            self.values[i] = 0.5 * (old[i] + old[n - 1 - i].conj());
        }
        Ok(())
    }

    pub fn write_fgrd<W: Write>(&self, w: W) -> Result<()> {
        io::write_fgrd(w, &self.grid, &self.values, self.mask.as_deref())
    }

    pub fn read_fgrd<R: Read>(r: R) -> Result<Self> {
        let (grid, values, mask) = io::read_fgrd(r)?;
        let mut g = FourierGrid::new(grid, values)?;
        g.mask = mask;
        Ok(g)
    }
}

/// Two-region image: `inside` on `{mu < 0}`, `outside` on `{mu > 0}`.
///
/// Images with more regions are built by adding the coefficient grids of
/// several phantoms, each with its own traced curve.
#[derive(Clone, Debug)]
pub struct Phantom {
    edge_poly: TrigPoly,
    inside: Complex64,
    outside: Complex64,
    curve: Option<CurveDiscretization>,
}

impl Phantom {
    /// An untraced phantom; call [`Phantom::trace`] before computing coefficients.
    pub fn new(edge_poly: TrigPoly, inside: Complex64, outside: Complex64) -> Result<Self> {
        if !edge_poly.is_real() {
            return Err(Error::Config("edge polynomial must be real".into()));
        }
        if !(inside.re.is_finite() && inside.im.is_finite())
            || !(outside.re.is_finite() && outside.im.is_finite())
        {
            return Err(Error::Config("phantom amplitudes must be finite".into()));
        }
        Ok(Self {
            edge_poly,
            inside,
            outside,
            curve: None,
        })
    }

    /// Builds and traces in one step.
    pub fn traced(
        edge_poly: TrigPoly,
        inside: Complex64,
        outside: Complex64,
        opts: &TraceOptions,
    ) -> Result<Self> {
        let mut ph = Self::new(edge_poly, inside, outside)?;
        ph.trace(opts)?;
        Ok(ph)
    }

    /// `f = 1` on `0 < x < 1/2`, zero elsewhere; edge polynomial `sin 2 pi x`.
    pub fn stripe() -> Result<Self> {
        Self::traced(
            TrigPoly::sin_x(),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            &TraceOptions::default(),
        )
    }

    /// The constant image `a` on the whole torus.
    pub fn constant(a: Complex64) -> Result<Self> {
        let one = TrigPoly::new(IndexSet2D::square(0), vec![Complex64::new(1.0, 0.0)], true)?;
        Self::traced(one, a, a, &TraceOptions::default())
    }

    /// Indicator of `{mu < 0}` for a random edge polynomial on `lambda0`.
    pub fn random(lambda0: &IndexSet2D, seed: u64, smoothness: f64, opts: &TraceOptions) -> Result<Self> {
        let mu = random_edge_poly(lambda0, seed, smoothness)?;
        Self::traced(mu, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), opts)
    }

    pub fn trace(&mut self, opts: &TraceOptions) -> Result<()> {
        self.curve = Some(match trace_zero_set_with(&self.edge_poly, opts) {
            Ok(c) => c,
            Err(Error::NoZeroSet) => CurveDiscretization::empty(self.edge_poly.clone()),
            Err(e) => return Err(e),
        });
        Ok(())
    }

    pub fn edge_poly(&self) -> &TrigPoly {
        &self.edge_poly
    }

    pub fn curve(&self) -> Option<&CurveDiscretization> {
        self.curve.as_ref()
    }

    pub fn inside(&self) -> Complex64 {
        self.inside
    }

    pub fn outside(&self) -> Complex64 {
        self.outside
    }

    /// Amplitude jump across the curve in the direction of the normal.
    pub fn jump(&self) -> Complex64 {
        self.outside - self.inside
    }

    fn traced_curve(&self) -> Result<&CurveDiscretization> {
        self.curve.as_ref().ok_or(Error::UntracedCurve)
    }

    /// Fourier coefficients of `(d_x f, d_y f)` over `grid`, in linear order.
    pub fn gradient_fourier(&self, grid: &IndexSet2D) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let curve = self.traced_curve()?;
        let (lo, hi) = (grid.lo(), grid.hi());
        let [nx, ny] = grid.dims();
        let mut gx = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut gy = gx.clone();
        let jump = self.jump();
        if jump == Complex64::new(0.0, 0.0) {
            return Ok((gx, gy));
        }
        for ((r, n), ds) in curve.points().iter().zip(curve.normals()).zip(curve.ds()) {
            let ex = phase_row(lo[0], hi[0], -r[0]);
            let ey = phase_row(lo[1], hi[1], -r[1]);
            let (wx, wy) = (n[0] * ds, n[1] * ds);
            for (iy, &py) in ey.iter().enumerate() {
                let row = iy * nx;
                for (ix, &px) in ex.iter().enumerate() {
                    let e = px * py;
                    gx[row + ix] += e * wx;
                    gy[row + ix] += e * wy;
                }
            }
        }
        for v in gx.iter_mut().chain(gy.iter_mut()) {
            *v *= jump;
        }
        debug_assert_eq!(gx.len(), nx * ny);
        Ok((gx, gy))
    }

    /// Fourier coefficients `f^[k]` over `grid`, which must contain the origin.
    ///
    /// Off the DC entry the coefficient is the gradient coefficient divided by
    /// `j 2 pi k` along the larger of `|k_x|`, `|k_y|`; where both divisions are
    /// possible they must agree, otherwise the curve quadrature is suspect.
    pub fn fourier_coeffs(&self, grid: &IndexSet2D) -> Result<FourierGrid> {
        if !grid.contains([0, 0]) {
            return Err(Error::InvalidIndexSet(format!("{grid} does not contain the origin")));
        }
        let curve = self.traced_curve()?;
        let (gx, gy) = self.gradient_fourier(grid)?;
        let floor = 1e-10 * self.jump().norm() * curve.length().max(1.0);
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (i, k) in grid.iter().enumerate() {
            if k == [0, 0] {
                let area = curve.negative_area()?;
                values[i] = self.outside + (self.inside - self.outside) * area;
                continue;
            }
            let div = |g: Complex64, kd: i64| g / Complex64::new(0.0, 2.0 * PI * kd as f64);
            let qx = (k[0] != 0).then(|| div(gx[i], k[0]));
            let qy = (k[1] != 0).then(|| div(gy[i], k[1]));
            if let (Some(a), Some(b)) = (qx, qy) {
                let gap = (a - b).norm();
                if gap > 1e-6 * a.norm().max(b.norm()) + floor {
                    return Err(Error::InconsistentGradient {
                        kx: k[0],
                        ky: k[1],
                        gap: gap / a.norm().max(b.norm()).max(f64::MIN_POSITIVE),
                    });
                }
            }
            values[i] = if k[0].abs() >= k[1].abs() {
                qx.expect("k_x is non-zero")
            } else {
                qy.expect("k_y is non-zero")
            };
        }
        let mut out = FourierGrid::new(*grid, values)?;
        if self.inside.im == 0.0 && self.outside.im == 0.0 && grid.is_symmetric() {
            out.conj_symmetrize()?;
        }
        Ok(out)
    }

    /// Pixel values at the centres `((i + 1/2)/n, (j + 1/2)/n)`, indexed
    /// `[j * n + i]`; the real part of the amplitudes is used.
    pub fn rasterize(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let r = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                out[j * n + i] = if self.edge_poly.eval_real(r) < 0.0 {
                    self.inside.re
                } else {
                    self.outside.re
                };
            }
        }
        out
    }
}

/// Sum of the coefficient grids of several phantoms.
pub fn superpose(phantoms: &[Phantom], grid: &IndexSet2D) -> Result<FourierGrid> {
    let mut total = FourierGrid::zeros(*grid);
    for ph in phantoms {
        total.add_assign(&ph.fourier_coeffs(grid)?)?;
    }
    Ok(total)
}
