//! Report documents with byte-stable rendering.
//!
//! Reports print with sorted keys, fixed indentation, and floating point
//! values at 17 significant digits, so identical runs produce identical
//! bytes. Integers and floats are distinct value kinds: counts stay exact.

use std::collections::BTreeMap;

pub const SCHEMA: &str = "gerbelab-report/1";

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Value>),
    Obj(BTreeMap<String, Value>),
}

impl Value {
    pub fn obj(entries: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
        Value::Obj(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    pub fn arr(values: impl IntoIterator<Item = Value>) -> Value {
        Value::Arr(values.into_iter().collect())
    }

    /// Inserts into an object value; panics on other kinds.
    pub fn set(&mut self, key: &str, value: Value) {
        match self {
            Value::Obj(map) => {
                map.insert(key.to_string(), value);
            }
            _ => panic!("set on a non-object report value"),
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Value::Null)
    }
}

fn escape_into(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("\"NaN\"");
    } else if v.is_infinite() {
        out.push_str(if v > 0.0 { "\"Infinity\"" } else { "\"-Infinity\"" });
    } else {
        out.push_str(&format!("{v:.16e}"));
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Num(x) => write_num(out, *x),
        Value::Str(s) => escape_into(out, s),
        Value::Arr(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Obj(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                escape_into(out, key);
                out.push_str(": ");
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Renders a report value to its canonical text, newline terminated.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_render_sorted_and_floats_pinned() {
        let mut v = Value::obj([("zeta", Value::from(1usize))]);
        v.set("alpha", Value::from(0.5));
        let text = render(&v);
        assert_eq!(text, "{\n  \"alpha\": 5.0000000000000000e-1,\n  \"zeta\": 1\n}\n");
    }

    #[test]
    fn rendered_text_is_valid_json() {
        let v = Value::obj([
            ("list", Value::arr([Value::Null, Value::from(true), Value::from("a\"b")])),
            ("nested", Value::obj([("x", Value::from(-0.0))])),
            ("none", Value::from(Option::<i64>::None)),
        ]);
        let text = render(&v);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["list"][2], serde_json::Value::String("a\"b".to_string()));
    }

    #[test]
    fn identical_values_render_identically() {
        let build = || {
            Value::obj([
                ("b", Value::from(2.0_f64.sqrt())),
                ("a", Value::arr([Value::from(3usize)])),
            ])
        };
        assert_eq!(render(&build()), render(&build()));
    }

    #[test]
    fn non_finite_values_render_as_strings() {
        let v = Value::arr([Value::from(f64::NAN), Value::from(f64::INFINITY)]);
        assert_eq!(render(&v), "[\n  \"NaN\",\n  \"Infinity\"\n]\n");
    }

    #[test]
    fn seventeen_significant_digits_round_trip() {
        let xs = [std::f64::consts::PI, 0.1, 1.0 / 3.0, 6.02e23, 5.0e-324];
        for x in xs {
            let text = format!("{x:.16e}");
            let back: f64 = text.parse().unwrap();
            assert_eq!(back, x, "{text}");
        }
    }
}
