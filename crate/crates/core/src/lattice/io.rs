//! Field serialization: CSV (node index, coordinates, value) and a raw
//! little-endian f64 dump in row-major node order.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use super::Grid;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, enough for a lossless round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_to_csv(grid: &Grid, values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 64);
    if grid.dim() == 1 {
        out.push_str("index,x,value\n");
    } else {
        out.push_str("index,x,y,value\n");
    }
    for (idx, v) in values.iter().enumerate() {
        let x = grid.coord(idx);
        if grid.dim() == 1 {
            let _ = writeln!(out, "{idx},{},{}", fmt_f64(x[0]), fmt_f64(*v));
        } else {
            let _ = writeln!(out, "{idx},{},{},{}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(*v));
        }
    }
    out
}

pub fn write_field_csv<W: Write>(mut w: W, grid: &Grid, values: &[f64]) -> Result<()> {
    w.write_all(field_to_csv(grid, values).as_bytes())?;
    Ok(())
}

/// Reads the value column of a field CSV, checking the index column.
pub fn read_field_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let reader = BufReader::new(r);
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if !line.starts_with("index,") {
                return Err(Error::Malformed(format!("unexpected CSV header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let idx: usize = cols[0]
            .parse()
            .map_err(|_| Error::Malformed(format!("line {}: bad index", lineno + 1)))?;
        if idx != values.len() {
            return Err(Error::Malformed(format!(
                "line {}: index {idx} out of order",
                lineno + 1
            )));
        }
        let v: f64 = cols
            .last()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Malformed(format!("line {}: bad value", lineno + 1)))?;
        values.push(v);
    }
    Ok(values)
}

pub fn write_field_binary<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field_binary<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() % 8 != 0 {
        return Err(Error::Malformed(format!(
            "binary dump of {} bytes is not a multiple of 8",
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
