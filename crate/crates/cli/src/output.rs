//! Report emission: JSON to a file or stdout, or a plain-text rendering of
//! the same JSON with `--pretty`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

pub fn to_json<T: Serialize>(report: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn write_file(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes the report to `out` when given. Stdout gets the JSON, or the text
/// rendering under `pretty`; with `out` and no `pretty` stdout stays empty.
pub fn emit<T: Serialize>(report: &T, out: Option<&Path>, pretty: bool) -> anyhow::Result<()> {
    let json = to_json(report)?;
    if let Some(path) = out {
        write_file(path, json.as_bytes())?;
    }
    if pretty {
        print!("{}", render(&serde_json::to_value(report)?));
    } else if out.is_none() {
        print!("{json}");
    }
    Ok(())
}

pub fn render(value: &Value) -> String {
    let mut out = String::new();
    render_into(value, 0, &mut out);
    out
}

fn scalar(value: &Value) -> Option<String> {
    match value {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.6}"),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.is_empty() => Some("[]".into()),
        Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            Some(items.iter().filter_map(scalar).collect::<Vec<_>>().join(", "))
        }
        _ => None,
    }
}

/// Rows of flat objects sharing the same keys render as an aligned table.
fn table(items: &[Value]) -> Option<Vec<Vec<String>>> {
    let first = items.first()?.as_object()?;
    let keys: Vec<&String> = first.keys().collect();
    let mut rows = vec![keys.iter().map(|k| k.to_string()).collect::<Vec<_>>()];
    for item in items {
        let obj = item.as_object()?;
        if obj.len() != keys.len() {
            return None;
        }
        let row = keys
            .iter()
            .map(|k| obj.get(*k).and_then(scalar))
            .collect::<Option<Vec<_>>>()?;
        rows.push(row);
    }
    Some(rows)
}

fn render_into(value: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    match value {
        Value::Object(map) => {
            for (key, v) in map {
                match scalar(v) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}{key}: {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}{key}:");
                        render_into(v, indent + 2, out);
                    }
                }
            }
        }
        Value::Array(items) => {
            if let Some(rows) = table(items) {
                let widths: Vec<usize> = (0..rows[0].len())
                    .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
                    .collect();
                for row in rows {
                    let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                    let _ = writeln!(out, "{pad}{}", cells.join("  ").trim_end());
                }
            } else {
                for item in items {
                    match scalar(item) {
                        Some(s) => {
                            let _ = writeln!(out, "{pad}- {s}");
                        }
                        None => {
                            let _ = writeln!(out, "{pad}-");
                            render_into(item, indent + 2, out);
                        }
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other).unwrap_or_default());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flat_rows_become_a_table() {
        let text = render(&json!({"rows": [{"a": 1, "b": "x"}, {"a": 22, "b": "y"}], "n": 2}));
        assert_eq!(text, "n: 2\nrows:\n  a   b\n  1   x\n  22  y\n");
    }

    #[test]
    fn nested_objects_indent() {
        let text = render(&json!({"outer": {"inner": 0.5, "list": [1, 2]}}));
        assert_eq!(text, "outer:\n  inner: 0.500000\n  list: 1, 2\n");
    }
}
