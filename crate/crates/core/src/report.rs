//! Structured-text reports.
//!
//! A report is an ordered tree of key/value entries. Rendering is
//! deterministic: entries keep insertion order, floats use a fixed
//! scientific format, and lines end in LF.

use std::fmt::Write as _;

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Num(f64),
    Bool(bool),
    List(Vec<Value>),
    Map(Section),
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}
impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<Section> for Value {
    fn from(s: Section) -> Self {
        Value::Map(s)
    }
}
impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::List(v.into_iter().map(Into::into).collect())
    }
}
impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        match v {
            Some(x) => x.into(),
            None => Value::Str("none".into()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    entries: Vec<(String, Value)>,
}

impl Section {
    pub fn new() -> Self {
        Section::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl Into<Value>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }
}

/// Anything that can describe itself as a report section.
pub trait ToSection {
    fn to_section(&self) -> Section;
}

/// Outcome of a residual check over a set of sample points.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub check: String,
    pub passed: bool,
    pub tol: f64,
    /// Samples that entered the check.
    pub samples: usize,
    /// Samples excluded because a precondition failed there.
    pub rejected: usize,
    pub max_residual: f64,
    pub point_vars: Vec<String>,
    pub worst_point: Option<Vec<f64>>,
    /// Check-specific quantities, rendered after the common fields.
    pub details: Section,
    pub notes: Vec<String>,
}

impl Diagnostics {
    pub fn new(check: &str, tol: f64, point_vars: Vec<String>) -> Self {
        Diagnostics {
            check: check.to_string(),
            tol,
            point_vars,
            ..Diagnostics::default()
        }
    }

    /// Record a residual observed at `x`, keeping the worst one.
    pub fn observe(&mut self, residual: f64, x: &[f64]) {
        self.samples += 1;
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        if self.worst_point.is_none() || r > self.max_residual {
            self.max_residual = r;
            self.worst_point = Some(x.to_vec());
        }
    }
}

impl ToSection for Diagnostics {
    fn to_section(&self) -> Section {
        let mut s = Section::new()
            .with("check", self.check.as_str())
            .with("passed", self.passed)
            .with("tol", self.tol)
            .with("samples", self.samples)
            .with("rejected", self.rejected)
            .with("max-residual", self.max_residual);
        if let Some(x) = &self.worst_point {
            s.push("worst-point", point_value(&self.point_vars, x));
        }
        for (k, v) in self.details.entries() {
            s.push(k, v.clone());
        }
        if !self.notes.is_empty() {
            s.push("notes", self.notes.clone());
        }
        s
    }
}

/// Fixed float format used in every report.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        "0.000000000e0".into()
    } else {
        format!("{v:.9e}")
    }
}

/// A named point rendered as `name=value` pairs.
pub fn point_value(names: &[String], x: &[f64]) -> Value {
    Value::Str(
        names
            .iter()
            .zip(x)
            .map(|(n, v)| format!("{n}={}", fmt_float(*v)))
            .collect::<Vec<_>>()
            .join(" "),
    )
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Str(s) => Some(s.clone()),
        Value::Int(i) => Some(i.to_string()),
        Value::Num(x) => Some(fmt_float(*x)),
        Value::Bool(b) => Some(b.to_string()),
        Value::List(items) if items.is_empty() => Some("[]".into()),
        Value::Map(s) if s.entries.is_empty() => Some("{}".into()),
        _ => None,
    }
}

fn write_section(out: &mut String, s: &Section, indent: usize) {
    let pad = "  ".repeat(indent);
    for (k, v) in &s.entries {
        match scalar(v) {
            Some(text) => {
                let _ = writeln!(out, "{pad}{k} {text}");
            }
            None => {
                let _ = writeln!(out, "{pad}{k}");
                write_value_block(out, v, indent + 1);
            }
        }
    }
}

fn write_value_block(out: &mut String, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Map(s) => write_section(out, s, indent),
        Value::List(items) => {
            for item in items {
                match scalar(item) {
                    Some(text) => {
                        let _ = writeln!(out, "{pad}- {text}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}-");
                        write_value_block(out, item, indent + 1);
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other).unwrap_or_default());
        }
    }
}

/// Render a full document with the version header.
pub fn render(body: &Section) -> String {
    let mut out = format!("report-version {REPORT_VERSION}\n");
    write_section(&mut out, body, 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_nested_tree() {
        let s = Section::new()
            .with("command", "check")
            .with("passed", true)
            .with("residual", 1.5e-12)
            .with("constraints", vec!["p2", "q1"])
            .with("empty", Vec::<String>::new())
            .with("inner", Section::new().with("k", 3usize));
        let text = render(&s);
        assert_eq!(
            text,
            "report-version 1\ncommand check\npassed true\nresidual 1.500000000e-12\n\
             constraints\n  - p2\n  - q1\nempty []\ninner\n  k 3\n"
        );
    }
}
