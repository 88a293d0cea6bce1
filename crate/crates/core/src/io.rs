//! CHQF1 binary field files.
//!
//! Layout: the ASCII lines `CHQF1`, `dim=<d>`, `m=<m>`, `L=<decimal>`, `end`,
//! each terminated by `\n`, followed by `m^dim` little-endian `f64` values in
//! row-major order.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const MAGIC: &str = "CHQF1";

pub fn encode(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let mut out = format!("{MAGIC}\ndim={}\nm={}\nL={}\nend\n", g.dim(), g.m(), g.box_len())
        .into_bytes();
    out.reserve(8 * field.values().len());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(mut reader: impl Read) -> Result<Field> {
    let mut reader = BufReader::new(&mut reader);
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<_>| -> Result<String> {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 || !line.ends_with('\n') {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next_line(&mut reader)? != MAGIC {
        return Err(Error::Format("missing CHQF1 magic".into()));
    }
    let dim: usize = header_value(&next_line(&mut reader)?, "dim")?;
    let m: usize = header_value(&next_line(&mut reader)?, "m")?;
    let box_len: f64 = header_value(&next_line(&mut reader)?, "L")?;
    if next_line(&mut reader)? != "end" {
        return Err(Error::Format("expected `end` after header".into()));
    }
    let grid = Grid::new(dim, m, box_len)?;
    let mut bytes = Vec::with_capacity(8 * grid.len());
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            8 * grid.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(&grid, values)
}

fn header_value<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad header line `{line}` (expected {key}=...)")))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    write_atomic(path, &encode(field))
}

pub fn read_field(path: &Path) -> Result<Field> {
    decode(fs::File::open(path)?)
}
