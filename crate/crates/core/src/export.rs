//! CSV and JSON artifact writers. Floating-point values are written with 17
//! significant digits so every number round-trips exactly.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::measures::QuadratureMeasure;
use crate::orthopoly::ChristoffelField;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Numeric(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv()?.as_bytes())
    }
}

struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with 17-significant-digit floats; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Numeric(format!("json: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("json output is utf-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json(value)?.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Columns `node_re, node_im, weight`.
pub fn measure_table(m: &QuadratureMeasure) -> Table {
    let mut t = Table::new(&["node_re", "node_im", "weight"]);
    for (z, w) in m.nodes().iter().zip(m.weights()) {
        t.push(vec![fmt_f64(z.re), fmt_f64(z.im), fmt_f64(*w)]);
    }
    t
}

/// Columns `z_re, z_im, K_n`.
pub fn christoffel_table(c: &ChristoffelField) -> Table {
    let mut t = Table::new(&["z_re", "z_im", "K_n"]);
    for (z, k) in c.points.iter().zip(&c.values) {
        t.push(vec![fmt_f64(z.re), fmt_f64(z.im), fmt_f64(*k)]);
    }
    t
}

/// Columns `node, mass, density, potential`; `node` is the cell position.
pub fn equilibrium_table(eq: &EquilibriumMeasure) -> Table {
    let mut t = Table::new(&["node", "mass", "density", "potential"]);
    for ((c, m), p) in eq.cells.iter().zip(&eq.masses).zip(&eq.potential) {
        t.push(vec![
            fmt_f64(c.position),
            fmt_f64(*m),
            fmt_f64(m / c.width),
            fmt_f64(*p),
        ]);
    }
    t
}
