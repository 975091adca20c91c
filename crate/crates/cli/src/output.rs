//! Deterministic CSV and JSON output.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// Header of every regret CSV; the plotting scripts depend on it.
pub const CURVE_HEADER: [&str; 5] = ["n", "value", "mu0_star", "branch", "tolerance"];

/// Fixed-point rendering with 12 significant digits and trailing zeros
/// removed. Infinite values print as `inf`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// `N` or the `inf` sentinel.
pub fn count(n: Option<usize>) -> String {
    n.map_or_else(|| "inf".into(), |n| n.to_string())
}

/// JSON number with the same rounding as [`num`], or null when not finite.
pub fn json_num(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    num(v).parse::<f64>().map(Value::from).unwrap_or(Value::Null)
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(CliError::io)?;
        for r in &self.rows {
            w.write_record(r).map_err(CliError::io)?;
        }
        w.into_inner().map_err(|e| CliError::io(e.into_error()))
    }
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => File::create(p)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(bytes).map_err(CliError::io),
    }
}

pub fn json_bytes(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(CliError::io)?;
    s.push(b'\n');
    Ok(s)
}
