use std::fmt::Write as _;

use serde::Serialize;

use crate::args::Format;

/// One scalar in a table or CSV report.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as u64)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_owned())
    }
}

/// Flat key/value view of a report, used by the table and CSV formats.
#[derive(Debug, Default)]
pub struct Rows(Vec<(String, Value)>);

impl Rows {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.0.push((key.into(), value.into()));
    }

    pub fn push_opt(&mut self, key: impl Into<String>, value: Option<impl Into<Value>>) {
        match value {
            Some(v) => self.push(key, v),
            None => self.push(key, "-"),
        }
    }
}

/// A report that JSON-serializes field-for-field and can also be flattened.
pub trait Report: Serialize {
    fn rows(&self) -> Rows;
}

pub fn render<R: Report>(report: &R, format: Format) -> String {
    match format {
        Format::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("reports serialize");
            out.push('\n');
            out
        }
        Format::Table => table(&report.rows()),
        Format::Csv => csv(&report.rows()),
    }
}

fn table(rows: &Rows) -> String {
    let width = rows.0.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, value) in &rows.0 {
        let text = match value {
            Value::Num(x) => x.to_string(),
            Value::Int(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
        };
        let _ = writeln!(out, "{key:<width$}  {text}");
    }
    out
}

fn csv(rows: &Rows) -> String {
    let mut out = String::from("key,value\n");
    for (key, value) in &rows.0 {
        let text = match value {
            Value::Num(x) => sig9(*x),
            Value::Int(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => csv_field(s),
        };
        let _ = writeln!(out, "{},{text}", csv_field(key));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Formats with nine significant digits, dropping trailing zeros.
pub fn sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // Round first so the exponent reflects carries such as 9.999999999 -> 10.
    let rounded: f64 = format!("{:.*e}", (DIGITS - 1) as usize, x)
        .parse()
        .expect("float formatting");
    let exponent = rounded.abs().log10().floor() as i32;
    if (-5..=15).contains(&exponent) {
        let decimals = (DIGITS - 1 - exponent).max(0) as usize;
        trim_zeros(format!("{rounded:.decimals$}"))
    } else {
        let text = format!("{:.*e}", (DIGITS - 1) as usize, rounded);
        let (mantissa, exp) = text.split_once('e').expect("exponent form");
        format!("{}e{exp}", trim_zeros(mantissa.to_owned()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Space-separated path indices, e.g. `1 1 0`.
pub fn profile_text(choice: &[usize]) -> String {
    choice.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}
