//! Number formatting and file emission.

use std::fs;
use std::path::Path;

use serde::Serialize;

/// Shortest string that parses back to the same `f64`: plain decimal for
/// magnitudes in `[1e-5, 1e16)`, scientific otherwise.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:e}");
    let exp: i32 = sci.split_once('e').expect("scientific format").1.parse().expect("exponent");
    if (-5..16).contains(&exp) {
        format!("{x}")
    } else {
        sci
    }
}

/// Rectangular table with a fixed header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| e.to_string())?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| format_number(x))).map_err(|e| e.to_string())?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        String::from_utf8(bytes).map_err(|e| e.to_string())
    }

    /// Array of objects keyed by column name.
    pub fn to_json(&self) -> Result<String, String> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.header
                    .iter()
                    .zip(row)
                    .map(|(&k, &v)| (k.to_string(), serde_json::json!(v)))
                    .collect()
            })
            .collect();
        to_json(&rows)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| e.to_string())
}

/// Writes `text` to `path`, or stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
