//! `LSPF1` binary field dumps.
//!
//! Layout (all little-endian):
//!
//! | offset | size | content                      |
//! |--------|------|------------------------------|
//! | 0      | 6    | magic `b"LSPF1\0"`           |
//! | 6      | 4    | `N` as `u32`                 |
//! | 10     | 8    | `L` as IEEE-754 `f64`        |
//! | 18     | 6    | zero padding                 |
//! | 24     | 8N²  | values, row-major, `f64`     |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

pub const MAGIC: &[u8; 6] = b"LSPF1\0";
pub const HEADER_LEN: usize = 24;

pub fn write_field<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let grid = field.grid();
    let mut header = [0u8; HEADER_LEN];
    header[..6].copy_from_slice(MAGIC);
    header[6..10].copy_from_slice(&(grid.n() as u32).to_le_bytes());
    header[10..18].copy_from_slice(&grid.half_width().to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(8 * grid.len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..6] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if header[18..].iter().any(|&b| b != 0) {
        return Err(Error::Format("nonzero header padding".into()));
    }
    let n = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let l = f64::from_le_bytes(header[10..18].try_into().unwrap());
    let grid = GridSpec::new(l, n).map_err(|e| Error::Format(e.to_string()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::from_values(grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    read_field(BufReader::new(File::open(path)?))
}
