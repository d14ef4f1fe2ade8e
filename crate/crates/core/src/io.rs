//! Binary and image formats.
//!
//! * `FGRD`: magic, the grid corners `lo.x lo.y hi.x hi.y` as little-endian
//!   32-bit words (two's complement), then `f64` `(re, im)` pairs in row-major
//!   order. An optional trailer `MASK` followed by one byte per entry stores
//!   the sampling mask.
//! * `LMAT`: magic, little-endian `u32` rows and columns, then row-major
//!   `f64` `(re, im)` pairs.
//! * PGM: binary `P5` with 16-bit big-endian samples, linearly scaled.

use std::io::{Read, Write};

use faer::{c64, Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::index_sets::IndexSet2D;

const FGRD_MAGIC: &[u8; 4] = b"FGRD";
const MASK_MAGIC: &[u8; 4] = b"MASK";
const LMAT_MAGIC: &[u8; 4] = b"LMAT";

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_i32<R: Read>(r: &mut R) -> Result<i64> {
    Ok(i32::from_le_bytes(read_exact::<R, 4>(r)?) as i64)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_exact::<R, 4>(r)?) as usize)
}

fn read_c64<R: Read>(r: &mut R) -> Result<Complex64> {
    let re = f64::from_le_bytes(read_exact::<R, 8>(r)?);
    let im = f64::from_le_bytes(read_exact::<R, 8>(r)?);
    Ok(Complex64::new(re, im))
}

fn corner(v: i64) -> Result<[u8; 4]> {
    i32::try_from(v)
        .map(i32::to_le_bytes)
        .map_err(|_| Error::Format(format!("grid corner {v} does not fit in 32 bits")))
}

pub(crate) fn write_fgrd<W: Write>(
    mut w: W,
    grid: &IndexSet2D,
    values: &[Complex64],
    mask: Option<&[bool]>,
) -> Result<()> {
    w.write_all(FGRD_MAGIC)?;
    for v in [grid.lo()[0], grid.lo()[1], grid.hi()[0], grid.hi()[1]] {
        w.write_all(&corner(v)?)?;
    }
    for z in values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    if let Some(mask) = mask {
        w.write_all(MASK_MAGIC)?;
        let bytes: Vec<u8> = mask.iter().map(|&b| b as u8).collect();
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) type FgrdParts = (IndexSet2D, Vec<Complex64>, Option<Vec<bool>>);

pub(crate) fn read_fgrd<R: Read>(mut r: R) -> Result<FgrdParts> {
    if &read_exact::<R, 4>(&mut r)? != FGRD_MAGIC {
        return Err(Error::Format("missing FGRD magic".into()));
    }
    let lo = [read_i32(&mut r)?, read_i32(&mut r)?];
    let hi = [read_i32(&mut r)?, read_i32(&mut r)?];
    let grid = IndexSet2D::new(lo, hi)?;
    let values = (0..grid.len())
        .map(|_| read_c64(&mut r))
        .collect::<Result<Vec<_>>>()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let mask = if rest.is_empty() {
        None
    } else if rest.len() == 4 + grid.len() && &rest[..4] == MASK_MAGIC {
        Some(rest[4..].iter().map(|&b| b != 0).collect())
    } else {
        return Err(Error::Format("trailing bytes after FGRD payload".into()));
    };
    Ok((grid, values, mask))
}

/// Writes a dense complex matrix in the `LMAT` format.
pub fn write_lmat<W: Write>(mut w: W, m: MatRef<'_, c64>) -> Result<()> {
    w.write_all(LMAT_MAGIC)?;
    for d in [m.nrows(), m.ncols()] {
        let d = u32::try_from(d).map_err(|_| Error::Format("matrix too large".into()))?;
        w.write_all(&d.to_le_bytes())?;
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_lmat<R: Read>(mut r: R) -> Result<Mat<c64>> {
    if &read_exact::<R, 4>(&mut r)? != LMAT_MAGIC {
        return Err(Error::Format("missing LMAT magic".into()));
    }
    let rows = read_u32(&mut r)?;
    let cols = read_u32(&mut r)?;
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = read_c64(&mut r)?;
        }
    }
    Ok(m)
}

/// Writes `pixels` (indexed `[row * width + col]`) as a 16-bit PGM, mapping
/// the value range linearly onto `0..=65535`.
pub fn write_pgm<W: Write>(mut w: W, pixels: &[f64], width: usize, height: usize) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: (height, width),
            found: (pixels.len(), 1),
        });
    }
    let (lo, hi) = pixels
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let mut bytes = Vec::with_capacity(2 * pixels.len());
    for &v in pixels {
        let q = if v.is_finite() {
            (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a 16-bit `P5` PGM as `(width, height, samples)`.
pub fn read_pgm<R: Read>(mut r: R) -> Result<(usize, usize, Vec<u16>)> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    pos += 1;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    if fields[0] != "P5" || parse(&fields[3])? != 65535 {
        return Err(Error::Format("expected a 16-bit P5 PGM".into()));
    }
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = data
        .get(pos..pos + 2 * width * height)
        .ok_or_else(|| Error::Format("truncated PGM body".into()))?;
    let samples = body
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((width, height, samples))
}
