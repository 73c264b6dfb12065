//! Report envelope and deterministic JSON/CSV emission.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Pretty JSON with every float written as 17 significant digits.
struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Warning {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub input_digest: String,
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub grids: BTreeMap<String, Vec<f64>>,
    pub results: Value,
    pub warnings: Vec<Warning>,
}

impl Report {
    pub fn new(subcommand: &str, input_digest: String) -> Self {
        Self {
            tool: "dirint",
            version: env!("CARGO_PKG_VERSION"),
            input_digest,
            subcommand: subcommand.to_string(),
            parameters: BTreeMap::new(),
            grids: BTreeMap::new(),
            results: Value::Null,
            warnings: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), to_value(&value));
    }

    pub fn grid(&mut self, key: &str, values: &[f64]) {
        self.grids.insert(key.to_string(), values.to_vec());
    }

    pub fn warn(&mut self, kind: &str, message: impl Into<String>, details: Option<Value>) {
        self.warnings.push(Warning {
            kind: kind.to_string(),
            message: message.into(),
            details,
        });
    }
}

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Value {
    serde_json::to_value(value).expect("report values serialize")
}

/// A CSV sidecar table: header plus rows of already-formatted cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn write(&self, dir: &Path) -> csv::Result<()> {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.name)))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Same 17-significant-digit rendering as the JSON report; non-finite values as `inf`/`nan`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_digits() {
        let s = to_json_string(&[0.1, 1.0, f64::INFINITY]);
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("null"));
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0], Some(0.1));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let values = [std::f64::consts::PI, 1e-300, -2.5e307, 5e-324, 0.30000000000000004];
        let back: Vec<f64> = serde_json::from_str(&to_json_string(&values)).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
