//! Deterministic output encoding: every float prints with 12 significant
//! digits, in JSON and CSV alike, so identical runs yield identical bytes.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// 12 significant digits; zero collapses to "0" (covers -0.0).
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.11e}")
}

struct SigDigits;

impl Formatter for SigDigits {
    fn write_f64<W: io::Write + ?Sized>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: io::Write + ?Sized>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        writer.write_all(fmt_f64(value as f64).as_bytes())
    }
}

/// JSON document with fixed-precision floats and a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, crate::AppError> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| crate::AppError::io(format!("serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// CSV document from a header and string rows.
pub fn to_csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, crate::AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| crate::AppError::io(format!("csv write failed: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| crate::AppError::io(format!("csv write failed: {e}")))
}

pub fn write_output(path: Option<&std::path::Path>, bytes: &[u8]) -> Result<(), crate::AppError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| crate::AppError::io(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| crate::AppError::io(format!("cannot write stdout: {e}"))),
    }
}
