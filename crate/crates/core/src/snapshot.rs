//! Binary field snapshots and CSV export.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes        | content                         |
//! |--------------|---------------------------------|
//! | 4            | magic `FPDE`                    |
//! | 2            | version (`u16`, currently 1)    |
//! | 2            | dim (`u16`)                     |
//! | 4 * dim      | points per axis (`u32` each)    |
//! | 8            | period (`f64`)                  |
//! | 8 * n^dim    | values, row-major (`f64` each)  |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField};

pub const MAGIC: &[u8; 4] = b"FPDE";
pub const VERSION: u16 = 1;

pub fn encode(field: &ScalarField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(16 + 4 * grid.dim() + 8 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u16).to_le_bytes());
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.period().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ScalarField> {
    let mut cur = bytes;
    let mut magic = [0u8; 4];
    take(&mut cur, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(take_array(&mut cur)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u16::from_le_bytes(take_array(&mut cur)?) as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Format(format!("dimension {dim} out of range")));
    }
    let mut ns = Vec::with_capacity(dim);
    for _ in 0..dim {
        ns.push(u32::from_le_bytes(take_array(&mut cur)?) as usize);
    }
    if ns.iter().any(|&n| n != ns[0]) {
        return Err(Error::Format(format!(
            "anisotropic grids are not supported: {ns:?}"
        )));
    }
    let period = f64::from_le_bytes(take_array(&mut cur)?);
    let grid = Grid::new(dim, ns[0], period).map_err(|e| Error::Format(e.to_string()))?;
    if cur.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            8 * grid.len(),
            cur.len()
        )));
    }
    let values = cur
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ScalarField::new(grid, values)
}

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField) -> Result<()> {
    w.write_all(&encode(field))?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ScalarField> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

pub fn save(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, encode(field))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ScalarField> {
    decode(&fs::read(path)?)
}

/// One row per grid point: coordinates, then the value.
pub fn to_csv(field: &ScalarField) -> String {
    let grid = field.grid();
    let dim = grid.dim();
    let mut s = String::new();
    for a in 0..dim {
        s.push_str(&format!("x{a},"));
    }
    s.push_str("value\n");
    for (i, v) in field.values().iter().enumerate() {
        let x = grid.coord(i);
        for xa in &x[..dim] {
            s.push_str(&format!("{xa},"));
        }
        s.push_str(&format!("{v}\n"));
    }
    s
}

fn take(cur: &mut &[u8], out: &mut [u8]) -> Result<()> {
    if cur.len() < out.len() {
        return Err(Error::Format("truncated header".into()));
    }
    let (head, tail) = cur.split_at(out.len());
    out.copy_from_slice(head);
    *cur = tail;
    Ok(())
}

fn take_array<const N: usize>(cur: &mut &[u8]) -> Result<[u8; N]> {
    let mut a = [0u8; N];
    take(cur, &mut a)?;
    Ok(a)
}
