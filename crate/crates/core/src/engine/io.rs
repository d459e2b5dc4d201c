//! Path set serialization.
//!
//! CSV: header `path_id,step,t,S,V,rd,rf`, one row per path per grid index,
//! floats in shortest round-trip form.
//!
//! Binary (version 1, little endian):
//!
//! | field      | type          |
//! |------------|---------------|
//! | magic      | `b"FXVGPATH"` |
//! | version    | u32           |
//! | n_paths    | u64           |
//! | n_steps    | u64           |
//! | t0         | f64           |
//! | horizon    | f64           |
//! | seed       | u64 (0 when unknown) |
//! | exit_step  | i64 × n_paths (-1 = never) |
//! | states     | f64 × n_paths × (n_steps+1) × 4, path-major, `S,V,rd,rf` |

use std::io::{self, Read, Write};

use super::{PathSet, TimeGrid};
use crate::model::StateVector;
use crate::scalar::Scalar;

pub const BINARY_MAGIC: &[u8; 8] = b"FXVGPATH";
pub const BINARY_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "path_id,step,t,S,V,rd,rf";

pub fn write_csv<T: Scalar, W: Write>(paths: &PathSet<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (i, path) in paths.paths().enumerate() {
        for (j, x) in path.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                i,
                j,
                paths.grid.time(j),
                x.s,
                x.v,
                x.rd,
                x.rf
            )?;
        }
    }
    Ok(())
}

pub fn write_binary<T: Scalar, W: Write>(paths: &PathSet<T>, mut w: W) -> io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&(paths.n_paths as u64).to_le_bytes())?;
    w.write_all(&(paths.grid.n_steps as u64).to_le_bytes())?;
    w.write_all(&paths.grid.t0.to_le_bytes())?;
    w.write_all(&paths.grid.horizon.to_le_bytes())?;
    let seed = paths.provenance.map_or(0, |p| p.seed);
    w.write_all(&seed.to_le_bytes())?;
    for e in &paths.exit_step {
        let v: i64 = e.map_or(-1, |e| e as i64);
        w.write_all(&v.to_le_bytes())?;
    }
    for x in &paths.states {
        for c in x.to_array() {
            w.write_all(&c.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a version-1 binary path file. Provenance other than the seed is
/// not stored in the file and comes back as `None`.
pub fn read_binary<R: Read>(mut r: R) -> io::Result<(PathSet<f64>, u64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(invalid("not an fxvg path file"));
    }
    let version = read_u32(&mut r)?;
    if version != BINARY_VERSION {
        return Err(invalid(format!("unsupported path file version {version}")));
    }
    let n_paths = read_u64(&mut r)? as usize;
    let n_steps = read_u64(&mut r)? as usize;
    let t0 = read_f64(&mut r)?;
    let horizon = read_f64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let grid = TimeGrid { t0, horizon, n_steps };
    grid.validate().map_err(|e| invalid(e.to_string()))?;

    let mut exit_step = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let e = read_u64(&mut r)? as i64;
        exit_step.push(if e < 0 { None } else { Some(e as usize) });
    }
    let total = n_paths
        .checked_mul(n_steps + 1)
        .ok_or_else(|| invalid("path file dimensions overflow"))?;
    let mut states = Vec::with_capacity(total);
    for _ in 0..total {
        let s = read_f64(&mut r)?;
        let v = read_f64(&mut r)?;
        let rd = read_f64(&mut r)?;
        let rf = read_f64(&mut r)?;
        states.push(StateVector::new(s, v, rd, rf));
    }
    Ok((
        PathSet {
            grid,
            n_paths,
            states,
            exit_step,
            provenance: None,
        },
        seed,
    ))
}
