//! Rendering of command results: JSON as-is, CSV and text by flattening.

use std::f64::consts::LN_2;

use serde_json::{Map, Value};

use crate::args::Format;

/// Divides every number stored under one of `keys` (at any depth) by ln 2
/// and records the unit at the top level.
pub fn convert_units(v: &mut Value, keys: &[&str], bits: bool) {
    fn walk(v: &mut Value, keys: &[&str]) {
        match v {
            Value::Object(map) => {
                for (k, x) in map.iter_mut() {
                    if keys.contains(&k.as_str()) {
                        if let Some(f) = x.as_f64() {
                            *x = serde_json::json!(f / LN_2);
                            continue;
                        }
                    }
                    walk(x, keys);
                }
            }
            Value::Array(xs) => xs.iter_mut().for_each(|x| walk(x, keys)),
            _ => {}
        }
    }
    if bits {
        walk(v, keys);
    }
    let unit = Value::String(if bits { "bits" } else { "nats" }.into());
    match v {
        Value::Object(map) => {
            map.insert("units".into(), unit);
        }
        Value::Array(xs) => {
            for x in xs {
                if let Value::Object(map) = x {
                    map.insert("units".into(), unit.clone());
                }
            }
        }
        _ => {}
    }
}

/// Dotted-key flattening; arrays become compact JSON cells.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn rows(v: &Value) -> Vec<Vec<(String, String)>> {
    let one = |x: &Value| {
        let mut out = Vec::new();
        flatten("", x, &mut out);
        if out.len() == 1 && out[0].0.is_empty() {
            out[0].0 = "value".into();
        }
        out
    };
    match v {
        Value::Array(xs) => xs.iter().map(one).collect(),
        x => vec![one(x)],
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(v: &Value) -> String {
    let rows = rows(v);
    let mut header: Vec<String> = Vec::new();
    for r in &rows {
        for (k, _) in r {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut s = header.iter().map(|h| csv_cell(h)).collect::<Vec<_>>().join(",");
    s.push('\n');
    for r in rows {
        let m: Map<String, Value> = r.into_iter().map(|(k, x)| (k, Value::String(x))).collect();
        let line: Vec<String> = header
            .iter()
            .map(|h| csv_cell(m.get(h).and_then(Value::as_str).unwrap_or("")))
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn to_text(v: &Value) -> String {
    let rows = rows(v);
    let many = rows.len() > 1 || v.is_array();
    let mut s = String::new();
    for (i, r) in rows.into_iter().enumerate() {
        if many {
            if i > 0 {
                s.push('\n');
            }
            s.push_str(&format!("[{i}]\n"));
        }
        for (k, x) in r {
            s.push_str(&format!("{k}: {x}\n"));
        }
    }
    s
}

pub fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialise");
            s.push('\n');
            s
        }
        Format::Csv => to_csv(v),
        Format::Text => to_text(v),
    }
}
