//! Report assembly and the two output formats.

use std::fmt::Write;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    #[value(name = "json-like")]
    JsonLike,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub problem: String,
    pub problem_hash: String,
    pub version: String,
    pub seed: u64,
    pub parameters: Map<String, Value>,
    pub results: Map<String, Value>,
    pub flags: Vec<String>,
}

pub fn source_hash(source: &str) -> String {
    Sha256::digest(source.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Report {
    pub fn new(command: &str, problem: &str, source: &str, seed: u64) -> Self {
        Report {
            command: command.into(),
            problem: problem.into(),
            problem_hash: source_hash(source),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            parameters: Map::new(),
            results: Map::new(),
            flags: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) {
        self.parameters.insert(key.into(), to_value(v));
    }

    pub fn result(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), to_value(v));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::JsonLike => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Text => {
                let mut out = String::new();
                let head = [
                    ("command", self.command.clone()),
                    ("problem", self.problem.clone()),
                    ("problem-hash", self.problem_hash.clone()),
                    ("version", self.version.clone()),
                    ("seed", self.seed.to_string()),
                ];
                for (k, v) in head {
                    writeln!(out, "{k}: {v}").unwrap();
                }
                out.push_str("parameters:\n");
                write_map(&mut out, &self.parameters, 1);
                out.push_str("results:\n");
                write_map(&mut out, &self.results, 1);
                writeln!(out, "flags: {}", if self.flags.is_empty() { "none".into() } else { self.flags.join(", ") })
                    .unwrap();
                out
            }
        }
    }
}

pub fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("value serializes")
}

/// Non-finite floats become the strings `inf`, `-inf` and `nan`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("null".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.iter().all(|x| scalar(x).is_some() && !x.is_array()) => {
            Some(format!("[{}]", a.iter().map(|x| scalar(x).unwrap()).collect::<Vec<_>>().join(", ")))
        }
        Value::Array(a) if a.iter().all(|x| matches!(x, Value::Array(_)) && scalar(x).is_some()) => {
            Some(format!("[{}]", a.iter().map(|x| scalar(x).unwrap()).collect::<Vec<_>>().join(", ")))
        }
        _ => None,
    }
}

fn write_map(out: &mut String, m: &Map<String, Value>, depth: usize) {
    for (k, v) in m {
        write_entry(out, k, v, depth);
    }
}

fn write_entry(out: &mut String, key: &str, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    if let Some(s) = scalar(v) {
        writeln!(out, "{pad}{key}: {s}").unwrap();
        return;
    }
    match v {
        Value::Object(m) => {
            writeln!(out, "{pad}{key}:").unwrap();
            write_map(out, m, depth + 1);
        }
        Value::Array(a) => {
            writeln!(out, "{pad}{key}:").unwrap();
            for (i, item) in a.iter().enumerate() {
                write_entry(out, &format!("[{i}]"), item, depth + 1);
            }
        }
        _ => unreachable!(),
    }
}
