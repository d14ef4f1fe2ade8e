//! Zero-set tracing: marching squares on a periodic sample grid, edgewise
//! root refinement, then Gauss-Legendre nodes on each segment projected back
//! onto the curve.
//!
//! The projected nodes give a smooth local parametrisation of the curve, so
//! the `ds` weights integrate smooth periodic integrands to near machine
//! precision instead of the second-order accuracy of a polyline.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;

use super::{Point, TrigPoly};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    /// Samples per unit length of the marching-squares grid.
    pub grid_n: usize,
    /// Roots are refined until `|mu| < refine_tol * ||c||_1`.
    pub refine_tol: f64,
    /// Gauss-Legendre nodes per segment.
    pub gauss_order: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            grid_n: 256,
            refine_tol: 1e-12,
            gauss_order: 8,
        }
    }
}

/// Quadrature nodes on `{mu = 0}` ordered along closed loops.
#[derive(Clone, Debug)]
pub struct CurveDiscretization {
    points: Vec<Point>,
    normals: Vec<[f64; 2]>,
    ds: Vec<f64>,
    loops: Vec<Range<usize>>,
    parent: TrigPoly,
    length_error: f64,
    refine_tol: f64,
    paths: Vec<LoopPath>,
}

/// One loop lifted to the covering plane: segment endpoints and quadrature
/// nodes in traversal order, from the start point to its translate.
#[derive(Clone, Debug)]
struct LoopPath {
    nodes: Vec<Point>,
    /// `n_x ds = sigma dy` along the traversal.
    sigma: f64,
    /// Quadrature value of `int x n_x ds` in unwrapped coordinates.
    moment_x: f64,
}

/// Default vertical cut used by [`CurveDiscretization::negative_area`].
const AREA_CUT: f64 = 0.381_966_011_250_105;

impl CurveDiscretization {
    /// Discretisation of a polynomial with no zero set.
    pub(crate) fn empty(parent: TrigPoly) -> Self {
        Self {
            points: Vec::new(),
            normals: Vec::new(),
            ds: Vec::new(),
            loops: Vec::new(),
            parent,
            length_error: 0.0,
            refine_tol: 0.0,
            paths: Vec::new(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Unit normals `grad mu / |grad mu|`, pointing out of `{mu < 0}`.
    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    /// Arc-length quadrature weights.
    pub fn ds(&self) -> &[f64] {
        &self.ds
    }

    /// Index ranges of the closed loops, each in traversal order.
    pub fn loops(&self) -> &[Range<usize>] {
        &self.loops
    }

    pub fn parent(&self) -> &TrigPoly {
        &self.parent
    }

    pub fn refine_tol(&self) -> f64 {
        self.refine_tol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.ds.iter().sum()
    }

    /// Gap between the full-order and a reduced-order length estimate.
    pub fn length_error(&self) -> f64 {
        self.length_error
    }

    /// Area of `{mu < 0}` on the unit torus.
    pub fn negative_area(&self) -> Result<f64> {
        self.negative_area_with_cut(AREA_CUT)
    }

    /// Area of `{mu < 0}` from the divergence theorem applied to `(x, 0)` on
    /// the strip `[cut, cut + 1)`, plus the flux through the cut line.
    pub(crate) fn negative_area_with_cut(&self, cut: f64) -> Result<f64> {
        let p = &self.parent;
        let tol = 1e-14 * p.l1_norm();
        let mut boundary = 0.0;
        let mut roots: Vec<f64> = Vec::new();
        for path in &self.paths {
            let band = |x: f64| (x - cut).floor();
            let mut m = band(path.nodes[0][0]);
            let mut y_prev = path.nodes[0][1];
            let mut correction = 0.0;
            for w in path.nodes.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mb = band(b[0]);
                if mb == m {
                    continue;
                }
                // Crossing of the line x = cut + max(m, mb).
                let xl = cut + m.max(mb);
                let t = (xl - a[0]) / (b[0] - a[0]);
                let mut y = a[1] + t * (b[1] - a[1]);
                let mut ok = false;
                for _ in 0..50 {
                    let (v, g) = p.eval_real_with_gradient([xl, y]);
                    if v.abs() <= tol {
                        ok = true;
                        break;
                    }
                    if g[1] == 0.0 {
                        break;
                    }
                    y -= v / g[1];
                }
                if !ok && p.eval_real([xl, y]).abs() > 1e3 * tol {
                    let g = p.gradient_real([xl, y]);
                    return Err(Error::SingularPoint {
                        x: xl.rem_euclid(1.0),
                        y: y.rem_euclid(1.0),
                        grad: g[0].hypot(g[1]),
                    });
                }
                correction += m * (y - y_prev);
                roots.push(y.rem_euclid(1.0));
                y_prev = y;
                m = mb;
            }
            let end = path.nodes[path.nodes.len() - 1][1];
            correction += m * (end - y_prev);
            boundary += path.moment_x - path.sigma * correction;
        }
        // Measure of {y : mu(cut, y) < 0}.
        roots.sort_by(f64::total_cmp);
        let mut inside = 0.0;
        if roots.is_empty() {
            if p.eval_real([cut, 0.0]) < 0.0 {
                inside = 1.0;
            }
        } else {
            for i in 0..roots.len() {
                let y0 = roots[i];
                let y1 = if i + 1 < roots.len() {
                    roots[i + 1]
                } else {
                    roots[0] + 1.0
                };
                if y1 - y0 > 0.0 && p.eval_real([cut, 0.5 * (y0 + y1)]) < 0.0 {
                    inside += y1 - y0;
                }
            }
        }
        Ok(boundary + inside)
    }

    /// `x,y,nx,ny,ds` rows with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "y", "nx", "ny", "ds"])?;
        for i in 0..self.len() {
            out.write_record(&[
                format!("{:.17e}", self.points[i][0]),
                format!("{:.17e}", self.points[i][1]),
                format!("{:.17e}", self.normals[i][0]),
                format!("{:.17e}", self.normals[i][1]),
                format!("{:.17e}", self.ds[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

pub fn trace_zero_set(p: &TrigPoly, grid_n: usize, refine_tol: f64) -> Result<CurveDiscretization> {
    trace_zero_set_with(
        p,
        &TraceOptions {
            grid_n,
            refine_tol,
            ..TraceOptions::default()
        },
    )
}

struct Tracer<'a> {
    p: &'a TrigPoly,
    tol: f64,
    grad_floor: f64,
}

impl Tracer<'_> {
    fn singular(&self, r: Point, g: [f64; 2]) -> Error {
        Error::SingularPoint {
            x: r[0].rem_euclid(1.0),
            y: r[1].rem_euclid(1.0),
            grad: g[0].hypot(g[1]),
        }
    }

    /// Root of `t -> mu(a + t (b - a))` in a sign-changing bracket.
    fn refine_on_segment(&self, a: Point, b: Point, fa: f64, fb: f64) -> Result<Point> {
        let d = [b[0] - a[0], b[1] - a[1]];
        let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut flo, fhi) = (fa, fb);
        let mut t = if fa == fb { 0.5 } else { fa / (fa - fb) };
        for _ in 0..200 {
            let (v, g) = self.p.eval_real_with_gradient(at(t));
            if v.abs() < self.tol {
                return Ok(at(t));
            }
            if (v >= 0.0) == (flo >= 0.0) {
                lo = t;
                flo = v;
            } else {
                hi = t;
            }
            let slope = g[0] * d[0] + g[1] * d[1];
            let newton = t - v / slope;
            t = if slope != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-17 {
                break;
            }
        }
        let _ = fhi;
        let r = at(t);
        let v = self.p.eval_real(r);
        if v.abs() < self.tol.max(64.0 * f64::EPSILON * self.p.l1_norm()) {
            Ok(r)
        } else {
            Err(self.singular(r, self.p.gradient_real(r)))
        }
    }

    /// Moves `base` along `dir` onto the curve (Newton in one variable).
    fn project(&self, base: Point, dir: [f64; 2], max_step: f64) -> Result<(Point, [f64; 2])> {
        let mut h = 0.0;
        for _ in 0..60 {
            let r = [base[0] + h * dir[0], base[1] + h * dir[1]];
            let (v, g) = self.p.eval_real_with_gradient(r);
            if v.abs() < self.tol {
                return Ok((r, g));
            }
            let slope = g[0] * dir[0] + g[1] * dir[1];
            if slope == 0.0 {
                return Err(self.singular(r, g));
            }
            h -= v / slope;
            if h.abs() > max_step {
                return Err(self.singular(r, g));
            }
        }
        let r = [base[0] + h * dir[0], base[1] + h * dir[1]];
        let (v, g) = self.p.eval_real_with_gradient(r);
        if v.abs() < self.tol.max(64.0 * f64::EPSILON * self.p.l1_norm()) {
            Ok((r, g))
        } else {
            Err(self.singular(r, g))
        }
    }
}

/// Traces `{mu = 0}` for a real-flagged polynomial.
pub fn trace_zero_set_with(p: &TrigPoly, opts: &TraceOptions) -> Result<CurveDiscretization> {
    if !p.is_real() {
        return Err(Error::Config("zero-set tracing needs a real polynomial".into()));
    }
    let bw = p.support().dims().into_iter().max().unwrap_or(1);
    let n = opts.grid_n;
    if n < 4 * bw {
        return Err(Error::Config(format!(
            "grid_n = {n} is below 4x the bandwidth {bw}"
        )));
    }
    if opts.gauss_order < 2 {
        return Err(Error::Config("gauss_order must be at least 2".into()));
    }
    let l1 = p.l1_norm();
    let tracer = Tracer {
        p,
        tol: opts.refine_tol * l1,
        grad_floor: 1e-9 * l1,
    };
    let h = 1.0 / n as f64;
    let v = p.sample_grid(n);
    let val = |i: usize, j: usize| v[(j % n) * n + (i % n)];
    let pos = |i: usize, j: usize| val(i, j) >= 0.0;

    // Edge ids: horizontal (i,j)->(i+1,j) is j*n+i, vertical (i,j)->(i,j+1) is n*n+j*n+i.
    let mut crossing: HashMap<usize, Point> = HashMap::new();
    for j in 0..n {
        for i in 0..n {
            let a = [i as f64 * h, j as f64 * h];
            for (id, di, dj) in [(j * n + i, 1usize, 0usize), (n * n + j * n + i, 0, 1)] {
                let (fa, fb) = (val(i, j), val(i + di, j + dj));
                if (fa >= 0.0) != (fb >= 0.0) {
                    let b = [a[0] + di as f64 * h, a[1] + dj as f64 * h];
                    crossing.insert(id, tracer.refine_on_segment(a, b, fa, fb)?);
                }
            }
        }
    }
    if crossing.is_empty() {
        return Err(Error::NoZeroSet);
    }

    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    let link = |a: usize, b: usize, adj: &mut HashMap<usize, Vec<usize>>| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for j in 0..n {
        for i in 0..n {
            let (ip, jp) = ((i + 1) % n, (j + 1) % n);
            let bottom = j * n + i;
            let top = jp * n + i;
            let left = n * n + j * n + i;
            let right = n * n + j * n + ip;
            let edges: Vec<usize> = [bottom, right, top, left]
                .into_iter()
                .filter(|e| crossing.contains_key(e))
                .collect();
            match edges.len() {
                0 => {}
                2 => link(edges[0], edges[1], &mut adj),
                4 => {
                    let center = p.eval_real([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    if (center >= 0.0) == pos(i, j) {
                        link(bottom, right, &mut adj);
                        link(top, left, &mut adj);
                    } else {
                        link(bottom, left, &mut adj);
                        link(top, right, &mut adj);
                    }
                }
                _ => unreachable!("odd number of sign changes around a cell"),
            }
        }
    }

    let (gl_t, gl_w) = gauss_legendre(opts.gauss_order);
    let (lo_t, lo_w) = gauss_legendre((opts.gauss_order / 2).max(1));
    let mut out = CurveDiscretization {
        points: Vec::new(),
        normals: Vec::new(),
        ds: Vec::new(),
        loops: Vec::new(),
        parent: p.clone(),
        length_error: 0.0,
        refine_tol: opts.refine_tol,
        paths: Vec::new(),
    };
    let mut low_length = 0.0;

    let mut starts: Vec<usize> = crossing.keys().copied().collect();
    starts.sort_unstable();
    let mut visited = std::collections::HashSet::new();
    for &start in &starts {
        if visited.contains(&start) {
            continue;
        }
        // Walk the loop through the edge graph.
        let mut order = vec![start];
        visited.insert(start);
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let nbrs = &adj[&cur];
            let next = if nbrs[0] != prev || nbrs.len() == 1 {
                nbrs[0]
            } else {
                nbrs[1]
            };
            if next == start {
                break;
            }
            if !visited.insert(next) {
                break;
            }
            order.push(next);
            prev = cur;
            cur = next;
        }
        // Unwrap onto the covering plane.
        let mut pts: Vec<Point> = Vec::with_capacity(order.len() + 1);
        for id in &order {
            let q = crossing[id];
            let q = match pts.last() {
                None => q,
                Some(last) => [
                    last[0] + wrap_half(q[0] - last[0]),
                    last[1] + wrap_half(q[1] - last[1]),
                ],
            };
            pts.push(q);
        }
        let first = pts[0];
        let last = *pts.last().expect("non-empty");
        pts.push([
            last[0] + wrap_half(first[0] - last[0]),
            last[1] + wrap_half(first[1] - last[1]),
        ]);

        let loop_start = out.points.len();
        let mut path = LoopPath {
            nodes: vec![pts[0]],
            sigma: 0.0,
            moment_x: 0.0,
        };
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let c = [b[0] - a[0], b[1] - a[1]];
            let clen = c[0].hypot(c[1]);
            if clen == 0.0 {
                continue;
            }
            let nu = [-c[1] / clen, c[0] / clen];
            let mut emit = |t: f64, w: f64, store: bool| -> Result<f64> {
                let base = [a[0] + t * c[0], a[1] + t * c[1]];
                let (r, g) = tracer.project(base, nu, 2.0 * clen.max(h))?;
                let gn = g[0].hypot(g[1]);
                if gn < tracer.grad_floor {
                    return Err(tracer.singular(r, g));
                }
                let g_nu = g[0] * nu[0] + g[1] * nu[1];
                let dh = -(g[0] * c[0] + g[1] * c[1]) / g_nu;
                let speed = (c[0] + dh * nu[0]).hypot(c[1] + dh * nu[1]);
                if store {
                    out.points.push([r[0].rem_euclid(1.0), r[1].rem_euclid(1.0)]);
                    out.normals.push([g[0] / gn, g[1] / gn]);
                    out.ds.push(w * speed);
                    path.nodes.push(r);
                    path.moment_x += r[0] * g[0] / gn * w * speed;
                    path.sigma = -g_nu.signum();
                }
                Ok(w * speed)
            };
            for (&t, &w) in gl_t.iter().zip(&gl_w) {
                emit(t, w, true)?;
            }
            for (&t, &w) in lo_t.iter().zip(&lo_w) {
                low_length += emit(t, w, false)?;
            }
            path.nodes.push(b);
        }
        out.loops.push(loop_start..out.points.len());
        out.paths.push(path);
    }
    out.length_error = (out.length() - low_length).abs();
    // Endpoint regularity (the refined crossings themselves).
    for q in crossing.values() {
        let g = p.gradient_real(*q);
        if g[0].hypot(g[1]) < tracer.grad_floor {
            return Err(tracer.singular(*q, g));
        }
    }
    Ok(out)
}

/// Representative of `d` modulo 1 in `[-1/2, 1/2)`.
pub(crate) fn wrap_half(d: f64) -> f64 {
    d - (d + 0.5).floor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_sets::IndexSet2D;
    use crate::trigpoly::random_edge_poly;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (t, w) = gauss_legendre(6);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for deg in 0..12 {
            let q: f64 = t.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            assert!((q - 1.0 / (deg + 1) as f64).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn stripe_is_two_lines() {
        let c = trace_zero_set(&TrigPoly::sin_x(), 64, 1e-12).unwrap();
        assert_eq!(c.loops().len(), 2);
        assert!((c.length() - 2.0).abs() < 1e-6);
        for (pt, n) in c.points().iter().zip(c.normals()) {
            let d0 = pt[0].min(1.0 - pt[0]);
            let d1 = (pt[0] - 0.5).abs();
            assert!(d0.min(d1) < 1e-12);
            // Outward from {sin < 0}: +x at x = 0, -x at x = 1/2.
            let expect = if d0 < d1 { 1.0 } else { -1.0 };
            assert!((n[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn stripe_areas() {
        for p in [TrigPoly::sin_x(), TrigPoly::sin_y()] {
            let c = trace_zero_set(&p, 64, 1e-12).unwrap();
            assert!((c.negative_area().unwrap() - 0.5).abs() < 1e-12);
            assert!((c.negative_area_with_cut(0.1).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn area_is_cut_invariant_and_matches_raster() {
        let l0 = IndexSet2D::square(1);
        let mut polys = vec![TrigPoly::cos_sum(1.0, 1.0, 1.2), TrigPoly::cos_sum(1.0, 0.7, -0.4)];
        for seed in [3, 11] {
            polys.push(random_edge_poly(&l0, seed, 0.0).unwrap());
        }
        for p in polys {
            let c = trace_zero_set(&p, 128, 1e-13).unwrap();
            let a = c.negative_area().unwrap();
            for cut in [0.0, 0.123, 0.77] {
                let b = c.negative_area_with_cut(cut).unwrap();
                assert!((a - b).abs() < 1e-11, "cut {cut}: {a} vs {b}");
            }
            let n = 1024;
            let neg = p.sample_grid(n).iter().filter(|v| **v < 0.0).count();
            let raster = neg as f64 / (n * n) as f64;
            assert!((a - raster).abs() < 2e-4, "{a} vs raster {raster}");
        }
    }

    #[test]
    fn points_satisfy_residual_bound() {
        let p = TrigPoly::cos_sum(1.0, 1.0, 0.5);
        let tol = 1e-12;
        let c = trace_zero_set(&p, 64, tol).unwrap();
        for pt in c.points() {
            assert!(p.eval_real(*pt).abs() <= tol * p.l1_norm());
        }
        let n_unit: f64 = c.normals().iter().map(|n| (n[0].hypot(n[1]) - 1.0).abs()).fold(0.0, f64::max);
        assert!(n_unit < 1e-14);
    }

    #[test]
    fn circle_like_level_set_self_converges() {
        let p = TrigPoly::cos_sum(1.0, 1.0, 1.2);
        let coarse = trace_zero_set(&p, 32, 1e-13).unwrap();
        let fine = trace_zero_set(&p, 128, 1e-13).unwrap();
        assert_eq!(coarse.loops().len(), 1);
        let rel = (coarse.length() - fine.length()).abs() / fine.length();
        assert!(rel < 1e-4, "rel {rel}");
        assert!(coarse.length_error() < 1e-4 * coarse.length());
    }

    #[test]
    fn doubling_grid_is_stable_for_random_edges() {
        for seed in 0..4 {
            let p = random_edge_poly(&IndexSet2D::square(4), seed, 0.05).unwrap();
            let a = trace_zero_set(&p, 128, 1e-12).unwrap();
            let b = trace_zero_set(&p, 256, 1e-12).unwrap();
            let rel = (a.length() - b.length()).abs() / b.length();
            assert!(rel < 1e-3, "seed {seed}: rel {rel}");
        }
    }

    #[test]
    fn error_paths() {
        let flat = TrigPoly::cos_sum(1.0, 1.0, 3.0);
        assert!(matches!(trace_zero_set(&flat, 64, 1e-12), Err(Error::NoZeroSet)));
        assert!(matches!(
            trace_zero_set(&TrigPoly::sin_x(), 8, 1e-12),
            Err(Error::Config(_))
        ));
        // cos(2 pi x) + cos(2 pi y) vanishes on crossing diagonals; the
        // crossings are critical points.
        let crossing = TrigPoly::cos_sum(1.0, 1.0, 0.0);
        assert!(matches!(
            trace_zero_set(&crossing, 64, 1e-12),
            Err(Error::SingularPoint { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let c = trace_zero_set(&TrigPoly::sin_x(), 16, 1e-12).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,nx,ny,ds\n"));
        assert_eq!(text.lines().count(), c.len() + 1);
    }
}
