//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "MPFC0001"
//! 8       4     m (u32)
//! 12      4     n (u32)
//! 16      8     h (f64)
//! 24      8     simulation time (f64)
//! 32      8*m*n cell values, row-major with j fastest
//! ```
//!
//! Values round-trip bitwise, so restart files and refinement comparisons are
//! exact.

use crate::error::Error;
use crate::grid::GridFunction;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"MPFC0001";

/// Serialize `phi` at simulation time `time`.
pub fn write_snapshot<W: Write>(mut w: W, phi: &GridFunction, time: f64) -> Result<(), Error> {
    w.write_all(MAGIC)?;
    w.write_all(&(phi.m() as u32).to_le_bytes())?;
    w.write_all(&(phi.n() as u32).to_le_bytes())?;
    w.write_all(&phi.h().to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for &v in phi.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Deserialize a snapshot produced by [`write_snapshot`].
pub fn read_snapshot<R: Read>(mut r: R) -> Result<(GridFunction, f64), Error> {
    let mut magic = [0u8; 8];
    read_exactly(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::BadSnapshot(format!(
            "magic mismatch: expected {:?}, got {:?}",
            String::from_utf8_lossy(MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut b4 = [0u8; 4];
    read_exactly(&mut r, &mut b4, "m")?;
    let m = u32::from_le_bytes(b4) as usize;
    read_exactly(&mut r, &mut b4, "n")?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    read_exactly(&mut r, &mut b8, "h")?;
    let h = f64::from_le_bytes(b8);
    read_exactly(&mut r, &mut b8, "time")?;
    let time = f64::from_le_bytes(b8);
    if m == 0 || n == 0 || !(h > 0.0) || !h.is_finite() {
        return Err(Error::BadSnapshot(format!(
            "invalid header: m={m}, n={n}, h={h}"
        )));
    }
    let mut data = vec![0.0f64; m * n];
    for v in &mut data {
        read_exactly(&mut r, &mut b8, "cell data")?;
        *v = f64::from_le_bytes(b8);
    }
    Ok((GridFunction::from_raw(m, n, h, data), time))
}

/// Write a snapshot file at `path`.
pub fn save(path: &Path, phi: &GridFunction, time: f64) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(file), phi, time)
}

/// Read a snapshot file from `path`.
pub fn load(path: &Path) -> Result<(GridFunction, f64), Error> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}

fn read_exactly<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), Error> {
    r.read_exact(buf)
        .map_err(|e| Error::BadSnapshot(format!("truncated while reading {what}: {e}")))
}
