//! Bit-stable report files.
//!
//! A report is a set of summary fields plus at most one named table.
//! Structured output is indented JSON with sorted keys; tabular output is
//! CSV with one row per table entry. Floats are rounded to 12 significant
//! digits and non-finite values are written as the strings `inf`, `-inf`
//! and `nan`, so the same report always produces the same bytes.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Structured,
    Tabular,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Structured => "json",
            ReportFormat::Tabular => "csv",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" | "json" => Ok(ReportFormat::Structured),
            "tabular" | "csv" => Ok(ReportFormat::Tabular),
            _ => Err(format!("format must be `structured` or `tabular`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if its width differs from the header.
    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub summary: Map<String, Value>,
    pub table: Option<Table>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.summary.insert(key.into(), v);
        self
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.set(key, value);
        self
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn to_structured(&self) -> String {
        let mut root = self.summary.clone();
        if let Some(t) = &self.table {
            let rows = t
                .rows
                .iter()
                .map(|r| Value::Object(t.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            root.insert(t.name.clone(), Value::Array(rows));
        }
        let mut s = serde_json::to_string_pretty(&canonical(Value::Object(root))).expect("json values serialize");
        s.push('\n');
        s
    }

    /// CSV of the table, or `key,value` rows of the summary when there is no
    /// table.
    pub fn to_tabular(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        match &self.table {
            Some(t) => {
                w.write_record(&t.columns).expect("in-memory csv");
                for r in &t.rows {
                    w.write_record(r.iter().map(|v| cell(&canonical(v.clone()))))
                        .expect("in-memory csv");
                }
            }
            None => {
                w.write_record(["key", "value"]).expect("in-memory csv");
                for (k, v) in &self.summary {
                    w.write_record([k.clone(), cell(&canonical(v.clone()))])
                        .expect("in-memory csv");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Structured => self.to_structured(),
            ReportFormat::Tabular => self.to_tabular(),
        }
    }
}

/// Round to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn float_value(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x.is_infinite() {
        Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        let r = round12(x);
        // -0.0 prints as "-0.0"; normalise it away
        Value::Number(Number::from_f64(if r == 0.0 { 0.0 } else { r }).expect("finite"))
    }
}

/// Rounded floats, everything else untouched. Keys are sorted because
/// `serde_json::Map` is ordered.
fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => float_value(n.as_f64().expect("f64 number")),
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Serialize a float that may be non-finite, for use inside reports.
pub fn float(x: f64) -> Value {
    float_value(x)
}

pub fn write_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, report.render(format)).map_err(|e| Error::io(path, e))
}
