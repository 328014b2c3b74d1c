//! Output records: one JSON object per line, or aligned text tables.

use std::io::Write;

use serde_json::{Map, Value};

fn fmt_number(v: &serde_json::Number) -> String {
    if let Some(i) = v.as_i64() {
        return i.to_string();
    }
    if let Some(u) = v.as_u64() {
        return u.to_string();
    }
    let f = v.as_f64().unwrap_or(f64::NAN);
    if f == 0.0 || (1e-4..1e6).contains(&f.abs()) {
        format!("{f:.6}")
    } else {
        format!("{f:.4e}")
    }
}

fn fmt_scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => fmt_number(n),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Splits a record into dotted scalar columns and array columns.
fn flatten(prefix: &str, obj: &Map<String, Value>, scalars: &mut Vec<(String, Value)>, arrays: &mut Vec<(String, Vec<Value>)>) {
    for (k, v) in obj {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(inner) => flatten(&key, inner, scalars, arrays),
            Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
                arrays.push((key, items.clone()))
            }
            Value::Array(_) => scalars.push((key, Value::String("[nested]".into()))),
            _ => scalars.push((key, v.clone())),
        }
    }
}

fn write_grid(out: &mut dyn Write, header: &[String], rows: &[Vec<String>]) -> std::io::Result<()> {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
    };
    writeln!(out, "{}", line(header))?;
    for r in rows {
        writeln!(out, "{}", line(r))?;
    }
    Ok(())
}

/// Records with the same shape share one table; array fields of a single
/// record are printed as an indexed table beneath it.
pub fn write_table(out: &mut dyn Write, records: &[Value]) -> std::io::Result<()> {
    let mut flat = Vec::new();
    for r in records {
        let (mut s, mut a) = (Vec::new(), Vec::new());
        match r {
            Value::Object(obj) => flatten("", obj, &mut s, &mut a),
            other => s.push(("value".into(), other.clone())),
        }
        flat.push((s, a));
    }
    if flat.len() > 1 {
        let header: Vec<String> = flat[0].0.iter().map(|(k, _)| k.clone()).collect();
        let rows: Vec<Vec<String>> = flat
            .iter()
            .map(|(s, _)| {
                header
                    .iter()
                    .map(|h| s.iter().find(|(k, _)| k == h).map_or("-".into(), |(_, v)| fmt_scalar(v)))
                    .collect()
            })
            .collect();
        return write_grid(out, &header, &rows);
    }
    let Some((scalars, arrays)) = flat.into_iter().next() else { return Ok(()) };
    let key_w = scalars.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &scalars {
        writeln!(out, "{k:<key_w$}  {}", fmt_scalar(v))?;
    }
    if !arrays.is_empty() {
        let len = arrays.iter().map(|(_, a)| a.len()).max().unwrap_or(0);
        let header: Vec<String> = std::iter::once("i".to_string()).chain(arrays.iter().map(|(k, _)| k.clone())).collect();
        let rows: Vec<Vec<String>> = (0..len)
            .map(|i| {
                std::iter::once(i.to_string())
                    .chain(arrays.iter().map(|(_, a)| a.get(i).map_or("-".into(), fmt_scalar)))
                    .collect()
            })
            .collect();
        writeln!(out)?;
        write_grid(out, &header, &rows)?;
    }
    Ok(())
}

pub fn write_json_lines(out: &mut dyn Write, records: &[Value]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("records are valid JSON values"))?;
    }
    Ok(())
}
