//! Deterministic text output: 17-significant-digit floats, sorted-key JSON, CSV.

use serde_json::Value;
use std::fmt::Write as _;

/// Shortest exact rendering is not stable across libraries; we always print 17
/// significant digits so values round-trip bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    format!("{x:.16e}")
}

/// JSON with sorted keys, two-space indentation and 17-digit floats.
pub fn to_json(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v, 0);
    s.push('\n');
    s
}

fn write_value(s: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(s, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(s, "{u}");
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    s.push_str(&fmt_f64(f));
                } else {
                    s.push_str("null");
                }
            }
        }
        Value::String(t) => s.push_str(&serde_json::to_string(t).unwrap()),
        Value::Array(a) => {
            if a.is_empty() {
                s.push_str("[]");
                return;
            }
            if a.iter().all(|x| !x.is_object() && !x.is_array()) {
                s.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        s.push_str(", ");
                    }
                    write_value(s, x, indent);
                }
                s.push(']');
                return;
            }
            s.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(s, indent + 1);
                write_value(s, x, indent + 1);
                if i + 1 < a.len() {
                    s.push(',');
                }
                s.push('\n');
            }
            pad(s, indent);
            s.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                s.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            s.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(s, indent + 1);
                s.push_str(&serde_json::to_string(k).unwrap());
                s.push_str(": ");
                write_value(s, &m[*k], indent + 1);
                if i + 1 < keys.len() {
                    s.push(',');
                }
                s.push('\n');
            }
            pad(s, indent);
            s.push('}');
        }
    }
}

fn pad(s: &mut String, n: usize) {
    for _ in 0..n {
        s.push_str("  ");
    }
}

/// CSV table with a header row and `\n` line endings.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| fmt_f64(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
