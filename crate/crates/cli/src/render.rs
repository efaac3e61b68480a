//! Plain-text rendering of a JSON report.

use serde_json::Value;

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !(n.is_i64() || n.is_u64()) => format!("{x:>12.6e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn is_matrix(items: &[Value]) -> bool {
    !items.is_empty()
        && items
            .iter()
            .all(|r| r.as_array().is_some_and(|row| row.iter().all(|x| x.is_number())))
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                match x {
                    Value::Object(_) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        write(x, indent + 1, out);
                    }
                    Value::Array(items) if is_matrix(items) || items.iter().any(|i| i.is_object()) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        write(x, indent + 1, out);
                    }
                    _ => {
                        out.push_str(&format!("{pad}{k}: "));
                        write(x, 0, out);
                    }
                }
            }
        }
        Value::Array(items) if is_matrix(items) => {
            for row in items {
                let cells: Vec<String> = row.as_array().unwrap().iter().map(scalar).collect();
                out.push_str(&format!("{pad}{}\n", cells.join(" ")));
            }
        }
        Value::Array(items) if items.iter().any(|i| i.is_object() || i.is_array()) => {
            for (i, x) in items.iter().enumerate() {
                out.push_str(&format!("{pad}[{}]\n", i + 1));
                write(x, indent + 1, out);
            }
        }
        Value::Array(items) => {
            let cells: Vec<String> = items.iter().map(|x| scalar(x).trim().to_string()).collect();
            out.push_str(&format!("{pad}[{}]\n", cells.join(", ")));
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).trim())),
    }
}

pub fn table(v: &Value) -> String {
    let mut out = String::new();
    write(v, 0, &mut out);
    out.trim_end().to_string()
}
