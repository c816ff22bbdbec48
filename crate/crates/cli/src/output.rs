use std::fmt::Write as _;
use std::io::Write as _;

use serde_json::{Map, Number, Value};

use crate::args::{Format, OutputArgs};
use crate::error::CliError;

/// One output row; keys keep insertion order.
pub type Record = Map<String, Value>;

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn render(records: &[Record], format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(records).expect("records serialize");
            s.push('\n');
            s
        }
        Format::Csv => to_csv(records),
    }
}

pub fn emit(records: &[Record], out: &OutputArgs) -> Result<(), CliError> {
    write_text(&render(records, out.format), out.out.as_deref())
}

pub fn write_text(text: &str, path: Option<&std::path::Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError {
                    code: 4,
                    msg: format!("cannot write output: {e}"),
                })
        }
    }
}

/// Header from the union of flattened keys in first-seen order. Nested
/// arrays become `key_i_j` columns; `null` is an empty cell.
fn to_csv(records: &[Record]) -> String {
    let rows: Vec<Vec<(String, String)>> = records
        .iter()
        .map(|r| {
            let mut cells = Vec::new();
            for (k, v) in r {
                flatten(k, v, &mut cells);
            }
            cells
        })
        .collect();
    let mut header: Vec<&str> = Vec::new();
    for row in &rows {
        for (k, _) in row {
            if !header.contains(&k.as_str()) {
                header.push(k);
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for row in &rows {
        let line: Vec<&str> = header
            .iter()
            .map(|h| {
                row.iter()
                    .find(|(k, _)| k == h)
                    .map_or("", |(_, v)| v.as_str())
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

fn flatten(key: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{key}_{i}"), item, out);
            }
        }
        Value::Object(map) => {
            for (k, item) in map {
                flatten(&format!("{key}_{k}"), item, out);
            }
        }
        Value::Null => out.push((key.to_string(), String::new())),
        Value::Bool(b) => out.push((key.to_string(), b.to_string())),
        Value::Number(n) => out.push((key.to_string(), n.to_string())),
        Value::String(s) => out.push((key.to_string(), csv_field(s))),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(v: Value) -> Record {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn csv_flattens_and_fills_gaps() {
        let rows = [
            rec(json!({"a": 1.5, "m": [[1, 2]], "b": null})),
            rec(json!({"a": 2, "c": "x,y"})),
        ];
        let csv = render(&rows, Format::Csv);
        assert_eq!(csv, "a,m_0_0,m_0_1,b,c\n1.5,1,2,,\n2,,,,\"x,y\"\n");
    }

    #[test]
    fn json_round_trips() {
        let rows = [rec(json!({"z": 1.0, "a": [0.25, f64::MAX]}))];
        let text = render(&rows, Format::Json);
        let back: Vec<Record> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rows);
        assert!(text.find("\"z\"").unwrap() < text.find("\"a\"").unwrap());
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(num(f64::INFINITY), Value::Null);
        assert_eq!(opt_num(None), Value::Null);
    }
}
