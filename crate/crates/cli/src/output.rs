//! Number formatting: 17 significant digits in JSON, 12 in human tables.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

pub const JSON_DIGITS: usize = 17;
pub const TABLE_DIGITS: usize = 12;

/// `x` with `digits` significant digits, positional for moderate exponents.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        format!("{:.*}", (digits as i32 - 1 - exp) as usize, x)
    } else {
        sci
    }
}

/// Pretty JSON with every float at 17 significant digits; non-finite floats
/// become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable report");
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.push_str(&"  ".repeat(d));
    match v {
        Value::Number(n) if n.is_f64() => {
            out.push_str(&sig(n.as_f64().expect("f64"), JSON_DIGITS));
        }
        Value::Array(items) if !items.is_empty() => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, depth + 1);
                write!(out, "{}: ", Value::String(k.clone())).expect("string write");
                write_value(out, item, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Two-column `key  value` table of the scalar leaves of a report.
pub fn table<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable report");
    let mut rows = Vec::new();
    flatten("", &v, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, val)| format!("{k:<width$}  {val}\n"))
        .collect()
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                flatten(&key(k), item, rows);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let cells: Vec<String> = items.iter().map(cell).collect();
            rows.push((prefix.to_string(), cells.join(", ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), item, rows);
            }
        }
        other => rows.push((prefix.to_string(), cell(other))),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => sig(n.as_f64().expect("f64"), TABLE_DIGITS),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(21.0, 17), "21.000000000000000");
        assert_eq!(sig(0.1, 17), "0.10000000000000001");
        assert_eq!(sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(sig(0.0, 4), "0.000");
        assert_eq!(sig(1.5e-9, 3), "1.50e-9");
        assert_eq!(sig(9.9999e2, 3), "1.00e3");
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 1e16, 123456.789] {
            assert_eq!(sig(x, 17).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_is_valid_and_round_trips() {
        let v = serde_json::json!({"a": 0.1, "b": [1, 2.5], "c": {"d": f64::NAN}, "e": "x"});
        let s = to_json(&v);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["b"][0].as_u64(), Some(1));
        assert!(back["c"]["d"].is_null());
        assert!(s.contains("0.10000000000000001"));
    }

    #[test]
    fn table_rows() {
        let t = table(&serde_json::json!({"lhs": 1.0 / 3.0, "v": "pass"}));
        assert!(t.contains("lhs  0.333333333333"));
        assert!(t.contains("v    pass"));
    }
}
