//! Binary field container and CSV debug export.
//!
//! Layout (all little-endian): magic `TRF1`, `dim: u64`, `n: u64`, `extent: f64`,
//! then either `n^dim` `f64` values (scalar fields) or `n^dim` bytes `0`/`1`
//! (indicator fields). The payload length tells the two apart.

use std::io::{self, Read, Write};

use super::{Grid, IndicatorField, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TRF1";
const HEADER_LEN: usize = 4 + 8 + 8 + 8;

/// A decoded dump.
#[derive(Debug, Clone, PartialEq)]
pub enum Dump {
    Scalar(ScalarField),
    Indicator(IndicatorField),
}

fn write_header<W: Write>(w: &mut W, grid: &Grid) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u64).to_le_bytes())?;
    w.write_all(&(grid.cells_per_axis() as u64).to_le_bytes())?;
    w.write_all(&grid.extent().to_le_bytes())
}

pub fn write_scalar<W: Write>(w: &mut W, field: &ScalarField) -> io::Result<()> {
    write_header(w, field.grid())?;
    let mut buf = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn write_indicator<W: Write>(w: &mut W, field: &IndicatorField) -> io::Result<()> {
    write_header(w, field.grid())?;
    let bytes: Vec<u8> = field.values().iter().map(|&v| v as u8).collect();
    w.write_all(&bytes)
}

pub fn read_dump<R: Read>(r: &mut R) -> Result<Dump> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<Dump> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::BadDump(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadDump("missing TRF1 magic".into()));
    }
    let word = |at: usize| <[u8; 8]>::try_from(&bytes[at..at + 8]).expect("8-byte slice");
    let dim = u64::from_le_bytes(word(4)) as usize;
    let n = u64::from_le_bytes(word(12)) as usize;
    let extent = f64::from_le_bytes(word(20));
    let grid = Grid::new(dim, n, extent)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() == grid.len() * 8 {
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Dump::Scalar(ScalarField::from_values(grid, values)?))
    } else if payload.len() == grid.len() {
        Ok(Dump::Indicator(IndicatorField::from_bytes(grid, payload)?))
    } else {
        Err(Error::BadDump(format!(
            "payload of {} bytes matches neither {} scalar nor indicator nodes",
            payload.len(),
            grid.len()
        )))
    }
}

/// One row per node: index tuple then value.
pub fn write_csv<W: Write>(
    w: &mut W,
    grid: &Grid,
    values: impl Iterator<Item = f64>,
) -> io::Result<()> {
    let axes = ["i", "j", "k"];
    writeln!(w, "{},value", axes[..grid.dim()].join(","))?;
    for (flat, v) in values.enumerate() {
        let idx = grid.unflat(flat);
        for i in &idx[..grid.dim()] {
            write!(w, "{i},")?;
        }
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_scalar_csv<W: Write>(w: &mut W, field: &ScalarField) -> io::Result<()> {
    write_csv(w, field.grid(), field.values().iter().copied())
}

pub fn write_indicator_csv<W: Write>(w: &mut W, field: &IndicatorField) -> io::Result<()> {
    write_csv(
        w,
        field.grid(),
        field.values().iter().map(|&v| v as u8 as f64),
    )
}
