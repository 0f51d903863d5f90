//! Plot-ready CSV tables flattened from a run's JSON reports.

use std::path::Path;

use serde_json::Value;

use crate::config::hex_digest;
use crate::error::{CliError, CliResult};
use crate::output::{csv_bytes, fmt_f64, OutputTree, RunManifest, MANIFEST_NAME};

/// Every array of objects inside `v`, keyed by its path joined with `_`.
fn object_arrays<'a>(v: &'a Value, path: &str, out: &mut Vec<(String, &'a Vec<Value>)>) {
    match v {
        Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_object) => {
            out.push((path.to_string(), items));
        }
        Value::Object(map) => {
            for (k, child) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}_{k}") };
                object_arrays(child, &p, out);
            }
        }
        _ => {}
    }
}

fn flatten(v: &Value, prefix: &str, cols: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(child, &name, cols);
            }
        }
        Value::Array(_) => {}
        Value::Null => cols.push((prefix.to_string(), String::new())),
        Value::Bool(b) => cols.push((prefix.to_string(), b.to_string())),
        Value::Number(n) => {
            let s = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()).map(fmt_f64).unwrap_or_else(|| n.to_string());
            cols.push((prefix.to_string(), s));
        }
        Value::String(s) => cols.push((prefix.to_string(), s.clone())),
    }
}

/// One table per array of objects; columns are the union of scalar leaves
/// in order of first appearance.
pub fn tables(v: &Value) -> Vec<(String, Vec<String>, Vec<Vec<String>>)> {
    let mut arrays = Vec::new();
    object_arrays(v, "", &mut arrays);
    arrays
        .into_iter()
        .map(|(path, items)| {
            let flat: Vec<Vec<(String, String)>> = items
                .iter()
                .map(|item| {
                    let mut cols = Vec::new();
                    flatten(item, "", &mut cols);
                    cols
                })
                .collect();
            let mut header: Vec<String> = Vec::new();
            for cols in &flat {
                for (k, _) in cols {
                    if !header.contains(k) {
                        header.push(k.clone());
                    }
                }
            }
            let rows = flat
                .iter()
                .map(|cols| {
                    header
                        .iter()
                        .map(|h| cols.iter().find(|(k, _)| k == h).map(|(_, v)| v.clone()).unwrap_or_default())
                        .collect()
                })
                .collect();
            (path, header, rows)
        })
        .collect()
}

/// Writes `plots/<report>[_<path>].csv` for each JSON report listed in the
/// manifest and rewrites the manifest to include them.
pub fn export_plots(manifest_path: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut out = OutputTree::create(root)?;
    for entry in &manifest.files {
        if entry.path == MANIFEST_NAME || entry.path.starts_with("plots/") {
            continue;
        }
        out.adopt(entry.clone());
        if !entry.path.ends_with(".json") {
            continue;
        }
        let path = root.join(&entry.path);
        let bytes = std::fs::read(&path).map_err(CliError::io(&path))?;
        if let Some(expected) = &entry.sha256 {
            if &hex_digest(&bytes) != expected {
                return Err(CliError::Artifact { path, msg: "contents differ from the manifest hash".into() });
            }
        }
        let value: Value = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Artifact { path: path.clone(), msg: e.to_string() })?;
        let stem = entry.path.trim_end_matches(".json").replace('/', "_");
        for (sub, header, rows) in tables(&value) {
            let name = if sub.is_empty() { format!("plots/{stem}.csv") } else { format!("plots/{stem}_{sub}.csv") };
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.write_bytes(&name, "plots", &csv_bytes(&header, &rows))?;
        }
    }
    manifest.files = out.entries();
    manifest.write(root)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattens_nested_rows() {
        let v: Value = serde_json::json!({
            "rows": [{"t": 0.5, "pair": {"a": 1, "b": null}}, {"t": 1.0, "extra": true}],
            "scalar": 3
        });
        let t = tables(&v);
        assert_eq!(t.len(), 1);
        let (path, header, rows) = &t[0];
        assert_eq!(path, "rows");
        assert_eq!(header, &["pair.a", "pair.b", "t", "extra"]);
        assert_eq!(rows[0], ["1", "", "0.5", ""]);
        assert_eq!(rows[1], ["", "", "1", "true"]);
    }
}
