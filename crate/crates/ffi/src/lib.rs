//! C ABI for the offgrid recovery library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`OffgridStatus`]; on failure the message is available from
//! [`offgrid_last_error_message`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use offgrid::harness::sample_mask;
use offgrid::solver::{SolverConfig, SvtMethod};
use offgrid::trigpoly::TraceOptions;
use offgrid::tv::{circulant_lifting_nuclear_norm, tv_seminorm, DiscreteImage};
use offgrid::{solve_equality, solve_noisy, Error, FourierGrid, IndexSet2D, LiftOperator, Phantom};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OffgridStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Panic = 99,
}

/// Fourier coefficients on a centred grid, with an optional sample mask.
pub struct OffgridGrid(FourierGrid);

/// Weighted lifting operator for a grid and a filter support.
pub struct OffgridLift(LiftOperator);

/// Summary of a solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct OffgridSolveInfo {
    pub iterations: usize,
    /// 0 when the iteration cap was reached.
    pub converged: u8,
    pub wall_time: f64,
    pub data_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OffgridStatus {
    match e {
        Error::Config(_) | Error::Json(_) => OffgridStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Format(_) => OffgridStatus::Io,
        Error::SvdFailure
        | Error::EigenFailure
        | Error::IllConditionedD(_)
        | Error::NoSpectralGap { .. }
        | Error::AdmissibleSelectionFailed(_)
        | Error::SingularPoint { .. }
        | Error::InconsistentGradient { .. }
        | Error::DegenerateDraw(_)
        | Error::NoZeroSet => OffgridStatus::Numerical,
        _ => OffgridStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (OffgridStatus, String)>) -> OffgridStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OffgridStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            OffgridStatus::Panic
        }
    }
}

fn lib<T>(r: offgrid::Result<T>) -> Result<T, (OffgridStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (OffgridStatus, String) {
    (OffgridStatus::NullPointer, format!("`{name}` is null"))
}

fn invalid(msg: String) -> (OffgridStatus, String) {
    (OffgridStatus::InvalidArgument, msg)
}

/// # Safety
/// `p` must be null or valid for reads of `len` elements.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (OffgridStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for writes of `len` elements.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], (OffgridStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or point to a live value of type `T`.
unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, (OffgridStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn offgrid_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn offgrid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Grid `[-half_x, half_x] x [-half_y, half_y]` from split real and
/// imaginary parts, x fastest.
///
/// # Safety
/// `re` and `im` must be valid for `len` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_new(
    half_x: u32,
    half_y: u32,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut OffgridGrid,
) -> OffgridStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let re = slice(re, len, "re")?;
        let im = slice(im, len, "im")?;
        let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let g = lib(FourierGrid::new(IndexSet2D::symmetric(half_x, half_y), values))?;
        *out = Box::into_raw(Box::new(OffgridGrid(g)));
        Ok(())
    })
}

/// Coefficients of a seeded random phantom (inside 1, outside 0) whose edge
/// polynomial is supported on `[-k0, k0]^2`, on the grid `[-grid_half, grid_half]^2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offgrid_phantom_random(
    k0: u32,
    seed: u64,
    smoothness: f64,
    grid_half: u32,
    out: *mut *mut OffgridGrid,
) -> OffgridStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ph = lib(Phantom::random(&IndexSet2D::square(k0), seed, smoothness, &TraceOptions::default()))?;
        let g = lib(ph.fourier_coeffs(&IndexSet2D::square(grid_half)))?;
        *out = Box::into_raw(Box::new(OffgridGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_free(grid: *mut OffgridGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of coefficients, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_len(grid: *const OffgridGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.values().len())
}

/// Copies the coefficients into `re` and `im`, each of length `len`.
///
/// # Safety
/// `grid` must be a live handle; `re` and `im` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_values(
    grid: *const OffgridGrid,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> OffgridStatus {
    guard(|| {
        let g = handle(grid, "grid")?;
        let v = g.0.values();
        if len != v.len() {
            return Err(invalid(format!("buffer length {len}, grid has {}", v.len())));
        }
        let re = slice_mut(re, len, "re")?;
        let im = slice_mut(im, len, "im")?;
        for (i, z) in v.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        Ok(())
    })
}

/// Sets the sample mask (nonzero bytes are sampled).
///
/// # Safety
/// `grid` must be a live handle; `mask` must be valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_set_mask(grid: *mut OffgridGrid, mask: *const u8, len: usize) -> OffgridStatus {
    guard(|| {
        let g = grid.as_mut().ok_or_else(|| null("grid"))?;
        let m = slice(mask, len, "mask")?;
        lib(g.0.set_mask(m.iter().map(|&b| b != 0).collect()))
    })
}

/// Masks a uniformly drawn `fraction` of the non-DC coefficients plus DC.
///
/// # Safety
/// `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_sample(grid: *mut OffgridGrid, fraction: f64, seed: u64) -> OffgridStatus {
    guard(|| {
        let g = grid.as_mut().ok_or_else(|| null("grid"))?;
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(invalid(format!("fraction {fraction} outside (0, 1]")));
        }
        let mask = lib(sample_mask(&g.0.grid(), fraction, seed, false))?;
        lib(g.0.set_mask(mask))
    })
}

/// Relative error of `estimate` against `truth` over the non-DC coefficients.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offgrid_grid_rel_err(
    estimate: *const OffgridGrid,
    truth: *const OffgridGrid,
    out: *mut f64,
) -> OffgridStatus {
    guard(|| {
        let e = handle(estimate, "estimate")?;
        let t = handle(truth, "truth")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(e.0.rel_err_without_dc(&t.0))?;
        Ok(())
    })
}

/// Lifting for the grid `[-grid_half, grid_half]^2` and filters on `[-k, k]^2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offgrid_lift_new(grid_half: u32, k: u32, out: *mut *mut OffgridLift) -> OffgridStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let op = lib(LiftOperator::new(IndexSet2D::square(grid_half), IndexSet2D::square(k)))?;
        *out = Box::into_raw(Box::new(OffgridLift(op)));
        Ok(())
    })
}

/// # Safety
/// `lift` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn offgrid_lift_free(lift: *mut OffgridLift) {
    if !lift.is_null() {
        drop(Box::from_raw(lift));
    }
}

/// Shape of the lifted matrix.
///
/// # Safety
/// `lift` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offgrid_lift_dims(lift: *const OffgridLift, rows: *mut usize, cols: *mut usize) -> OffgridStatus {
    guard(|| {
        let op = handle(lift, "lift")?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        *rows = op.0.rows();
        *cols = op.0.cols();
        Ok(())
    })
}

/// Recovers the unsampled coefficients of `samples`.
///
/// `delta = 0` enforces the samples exactly; otherwise the data may move
/// within an l2 ball of that radius. `max_iters = 0` keeps the default.
/// Reaching the iteration cap is not an error; check `info.converged`.
///
/// # Safety
/// Handles must be live; `out` must be writable; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn offgrid_solve(
    lift: *const OffgridLift,
    samples: *const OffgridGrid,
    delta: f64,
    max_iters: usize,
    out: *mut *mut OffgridGrid,
    info: *mut OffgridSolveInfo,
) -> OffgridStatus {
    guard(|| {
        let op = handle(lift, "lift")?;
        let s = handle(samples, "samples")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = SolverConfig {
            delta,
            beta: Some(3.0),
            relaxation: 1.8,
            svt: SvtMethod::Gram,
            ..SolverConfig::default()
        };
        if max_iters > 0 {
            cfg.max_iters = max_iters;
        }
        let rep = lib(if delta == 0.0 {
            solve_equality(&op.0, &s.0, &cfg)
        } else {
            solve_noisy(&op.0, &s.0, &cfg)
        })?;
        if let Some(i) = info.as_mut() {
            *i = OffgridSolveInfo {
                iterations: rep.iterations,
                converged: rep.converged as u8,
                wall_time: rep.wall_time,
                data_residual: rep.data_residual,
            };
        }
        *out = Box::into_raw(Box::new(OffgridGrid(rep.recovered)));
        Ok(())
    })
}

/// Isotropic TV and the circulant-lifting nuclear norm of a real
/// `nx x ny` image indexed `[iy * nx + ix]`.
///
/// # Safety
/// `pixels` must be valid for `nx * ny` reads; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn offgrid_tv_norms(
    pixels: *const f64,
    nx: usize,
    ny: usize,
    tv: *mut f64,
    nuclear: *mut f64,
) -> OffgridStatus {
    guard(|| {
        let n = nx.checked_mul(ny).ok_or_else(|| invalid("image too large".into()))?;
        let px = slice(pixels, n, "pixels")?;
        if tv.is_null() || nuclear.is_null() {
            return Err(null("tv/nuclear"));
        }
        let img = lib(DiscreteImage::from_real(nx, ny, px))?;
        *tv = tv_seminorm(&img);
        *nuclear = circulant_lifting_nuclear_norm(&img);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn last_error() -> String {
        let p = offgrid_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn phantom_sample_solve_roundtrip() {
        unsafe {
            let mut truth = ptr::null_mut();
            assert_eq!(offgrid_phantom_random(1, 3, 0.0, 5, &mut truth), OffgridStatus::Ok);
            assert_eq!(offgrid_grid_len(truth), 121);
            let n = offgrid_grid_len(truth);
            let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
            assert_eq!(offgrid_grid_values(truth, re.as_mut_ptr(), im.as_mut_ptr(), n), OffgridStatus::Ok);

            let mut samples = ptr::null_mut();
            assert_eq!(
                offgrid_grid_new(5, 5, re.as_ptr(), im.as_ptr(), n, &mut samples),
                OffgridStatus::Ok
            );
            assert_eq!(offgrid_grid_sample(samples, 1.0, 0), OffgridStatus::Ok);
            let mut lift = ptr::null_mut();
            assert_eq!(offgrid_lift_new(5, 2, &mut lift), OffgridStatus::Ok);
            let (mut rows, mut cols) = (0, 0);
            assert_eq!(offgrid_lift_dims(lift, &mut rows, &mut cols), OffgridStatus::Ok);
            assert_eq!((rows, cols), (2 * 49, 25));

            let mut rec = ptr::null_mut();
            let mut info = OffgridSolveInfo::default();
            assert_eq!(offgrid_solve(lift, samples, 0.0, 0, &mut rec, &mut info), OffgridStatus::Ok);
            assert_eq!(info.converged, 1);
            let mut err = 1.0;
            assert_eq!(offgrid_grid_rel_err(rec, truth, &mut err), OffgridStatus::Ok);
            assert!(err < 1e-12, "{err}");
            assert!(offgrid_last_error_message().is_null());

            offgrid_grid_free(rec);
            offgrid_grid_free(samples);
            offgrid_grid_free(truth);
            offgrid_lift_free(lift);
        }
    }

    #[test]
    fn errors_set_codes_and_messages() {
        unsafe {
            assert_eq!(
                offgrid_grid_new(1, 1, ptr::null(), ptr::null(), 9, ptr::null_mut()),
                OffgridStatus::NullPointer
            );
            assert!(last_error().contains("out"));

            let mut g = ptr::null_mut();
            let re = [0.0; 4];
            assert_eq!(
                offgrid_grid_new(1, 1, re.as_ptr(), re.as_ptr(), 4, &mut g),
                OffgridStatus::InvalidArgument
            );
            assert!(g.is_null());
            assert!(!last_error().is_empty());

            let mut lift = ptr::null_mut();
            assert_eq!(offgrid_lift_new(2, 5, &mut lift), OffgridStatus::InvalidArgument);
            assert!(lift.is_null());

            let mut truth = ptr::null_mut();
            assert_eq!(offgrid_phantom_random(1, 0, 0.0, 3, &mut truth), OffgridStatus::Ok);
            let mask = vec![0u8; offgrid_grid_len(truth)];
            assert_eq!(offgrid_grid_set_mask(truth, mask.as_ptr(), mask.len()), OffgridStatus::Ok);
            assert_eq!(offgrid_lift_new(3, 1, &mut lift), OffgridStatus::Ok);
            let mut rec = ptr::null_mut();
            assert_eq!(
                offgrid_solve(lift, truth, 0.0, 0, &mut rec, ptr::null_mut()),
                OffgridStatus::InvalidArgument
            );
            assert!(last_error().contains("DC"));
            assert_eq!(offgrid_grid_sample(truth, 1.5, 0), OffgridStatus::InvalidArgument);
            assert_eq!(offgrid_grid_len(ptr::null()), 0);
            offgrid_grid_free(ptr::null_mut());
            offgrid_grid_free(truth);
            offgrid_lift_free(lift);
        }
    }

    #[test]
    fn tv_norms_of_a_stripe() {
        let px = [0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let (mut tv, mut nuc) = (0.0, 0.0);
        unsafe {
            assert_eq!(offgrid_tv_norms(px.as_ptr(), 4, 4, &mut tv, &mut nuc), OffgridStatus::Ok);
            assert_eq!(offgrid_tv_norms(ptr::null(), 4, 4, &mut tv, &mut nuc), OffgridStatus::NullPointer);
        }
        assert!((tv - 8.0).abs() < 1e-12);
        assert!((nuc - 4.0 * tv).abs() < 1e-9);
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(offgrid_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
