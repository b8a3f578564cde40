//! Report assembly. JSON reports carry `"schema": "choi-divergence/1"`;
//! non-finite numbers are written as the strings `"inf"`, `"-inf"`, `"nan"`.

use choi_divergence::channel::MatrixJson;
use choi_divergence::linalg::HermitianMatrix;
use serde_json::{json, Map, Value};

use crate::{Common, Format};

pub const SCHEMA: &str = "choi-divergence/1";

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub struct Report {
    format: Format,
    no_meta: bool,
    bits: bool,
    fields: Map<String, Value>,
    timings: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str, c: &Common) -> Self {
        let mut fields = Map::new();
        fields.insert("schema".into(), json!(SCHEMA));
        fields.insert("command".into(), json!(command));
        fields.insert("units".into(), json!(if c.bits { "bits" } else { "nats" }));
        fields.insert("seed".into(), json!(c.seed));
        Self { format: c.format, no_meta: c.no_meta, bits: c.bits, fields, timings: Map::new() }
    }

    pub fn field(&mut self, name: &str, v: Value) {
        self.fields.insert(name.into(), v);
    }

    pub fn entropy(&mut self, name: &str, v: f64) {
        let v = if self.bits { v / std::f64::consts::LN_2 } else { v };
        self.field(name, num(v));
    }

    /// JSON only.
    pub fn matrix(&mut self, name: &str, m: Option<&HermitianMatrix>) {
        if let Some(m) = m {
            let v = serde_json::to_value(MatrixJson::from_matrix(m.as_matrix())).expect("serializable");
            self.field(name, v);
        }
    }

    /// JSON only; wall-clock fields are dropped under `--no-meta`.
    pub fn detail(&mut self, name: &str, mut v: Value) {
        if self.no_meta {
            strip_seconds(&mut v);
        }
        self.field(name, v);
    }

    pub fn timing(&mut self, phase: &str, seconds: f64) {
        self.timings.insert(format!("{phase}_s"), json!(seconds));
    }

    pub fn render(mut self) -> Result<String, String> {
        match self.format {
            Format::Json => {
                if !self.no_meta {
                    let meta = json!({ "version": env!("CARGO_PKG_VERSION"), "timings": self.timings });
                    self.fields.insert("meta".into(), meta);
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(self.fields)).map_err(|e| e.to_string())?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let scalars: Vec<(&String, String)> = self
                    .fields
                    .iter()
                    .filter_map(|(k, v)| match v {
                        Value::Number(n) => Some((k, n.to_string())),
                        Value::String(s) => Some((k, s.clone())),
                        Value::Bool(b) => Some((k, b.to_string())),
                        _ => None,
                    })
                    .collect();
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(scalars.iter().map(|(k, _)| k.as_str())).map_err(|e| e.to_string())?;
                w.write_record(scalars.iter().map(|(_, v)| v.as_str())).map_err(|e| e.to_string())?;
                String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
            }
        }
    }
}

fn strip_seconds(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("seconds");
            m.values_mut().for_each(strip_seconds);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_seconds),
        _ => {}
    }
}
