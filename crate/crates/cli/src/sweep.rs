//! Cartesian parameter sweeps over dotted configuration keys.

use std::path::Path;

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult};
use crate::output::{tool_version, DiagnosticSummary, FileEntry, OutputTree, RunManifest, Status};
use crate::run::{run_scenario, RunOptions};
use crate::verify::{status_name, worker_count};

/// `key=v1,v2,...`; values are TOML literals, bare words become strings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParam {
    pub key: String,
    pub values: Vec<toml::Value>,
}

fn parse_value(s: &str) -> toml::Value {
    let s = s.trim();
    toml::from_str::<toml::Table>(&format!("v = {s}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(s.to_string()))
}

impl SweepParam {
    pub fn parse(arg: &str) -> CliResult<Self> {
        let (key, vals) =
            arg.split_once('=').ok_or_else(|| CliError::Config(format!("--param {arg:?}: expected key=v1,v2,...")))?;
        let key = key.trim().to_string();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(CliError::Config(format!("--param {arg:?}: empty key segment")));
        }
        let values: Vec<toml::Value> = split_top_level(vals).into_iter().map(parse_value).collect();
        if values.is_empty() {
            return Err(CliError::Config(format!("--param {arg:?}: no values")));
        }
        Ok(Self { key, values })
    }
}

/// Splits on commas outside brackets so that array values survive.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter().filter(|v| !v.trim().is_empty()).collect()
}

pub fn set_dotted(root: &mut toml::Value, key: &str, value: toml::Value) -> CliResult<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = cur.as_table_mut().ok_or_else(|| CliError::Config(format!("{key}: {part} is not a table")))?;
        cur = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur.as_table_mut().ok_or_else(|| CliError::Config(format!("{key}: parent is not a table")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// One configuration per point of the cartesian product, named
/// `<name>-<index>`.
pub fn expand(base: &ScenarioConfig, params: &[SweepParam]) -> CliResult<Vec<(Vec<toml::Value>, ScenarioConfig)>> {
    let base_value = toml::Value::try_from(base).map_err(|e| CliError::Config(e.to_string()))?;
    let total: usize = params.iter().map(|p| p.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut point = vec![toml::Value::Boolean(false); params.len()];
        for (k, p) in params.iter().enumerate().rev() {
            point[k] = p.values[rem % p.values.len()].clone();
            rem /= p.values.len();
        }
        let mut v = base_value.clone();
        for (p, val) in params.iter().zip(&point) {
            set_dotted(&mut v, &p.key, val.clone())?;
        }
        set_dotted(&mut v, "name", toml::Value::String(format!("{}-{index:03}", base.name)))?;
        if let Some(t) = v.as_table_mut() {
            t.remove("output_dir");
        }
        let cfg: ScenarioConfig = v.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        out.push((point, cfg));
    }
    Ok(out)
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs every point into `root/<name>-<index>/` and writes `sweep.csv` and a
/// manifest at `root`.
pub fn run_sweep(
    base: &ScenarioConfig,
    params: &[SweepParam],
    root: &Path,
    workers: Option<usize>,
) -> CliResult<RunManifest> {
    let points = expand(base, params)?;
    for (_, cfg) in &points {
        cfg.build()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<CliResult<RunManifest>> = pool.install(|| {
        points
            .par_iter()
            .map(|(_, cfg)| run_scenario(cfg, &RunOptions { out_dir: Some(root.join(&cfg.name)), timings: false }))
            .collect()
    });
    let mut out = OutputTree::create(root)?;
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    for ((point, cfg), res) in points.iter().zip(results) {
        let m = res?;
        let mut row = vec![cfg.name.clone()];
        row.extend(point.iter().map(value_text));
        row.push(status_name(m.status));
        rows.push(row);
        for f in &m.files {
            out.adopt(FileEntry {
                path: format!("{}/{}", cfg.name, f.path),
                diagnostic: cfg.name.clone(),
                ..f.clone()
            });
        }
        diagnostics.push(DiagnosticSummary {
            name: cfg.name.clone(),
            status: m.status,
            message: None,
            files: vec![format!("{}/{}", cfg.name, crate::output::MANIFEST_NAME)],
        });
    }
    let mut header = vec!["name"];
    header.extend(params.iter().map(|p| p.key.as_str()));
    header.push("status");
    out.write_csv("sweep.csv", "sweep", &header, &rows)?;
    let status = diagnostics.iter().map(|d| d.status).find(|s| !s.is_ok()).unwrap_or(Status::Pass);
    let manifest = RunManifest {
        name: format!("{}-sweep", base.name),
        config_hash: base.hash(),
        tool_version: tool_version(),
        seed: base.seed,
        status,
        diagnostics,
        files: out.entries(),
        timings: None,
    };
    manifest.write(root)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "base"
[grid]
dim = 1
points = 64
half_width = 8.0
[evolution]
a = 0.0
b = 1.0
t_final = 0.25
steps = 2
method = "exact"
[initial]
family = "gaussian"
"#;

    #[test]
    fn parses_scalars_arrays_and_words() {
        let p = SweepParam::parse("initial.center=[0.5],[1.0]").unwrap();
        assert_eq!(p.values.len(), 2);
        assert!(p.values[0].is_array());
        let p = SweepParam::parse("initial.family=gaussian,sech").unwrap();
        assert_eq!(p.values[1], toml::Value::String("sech".into()));
        let p = SweepParam::parse("grid.points=64, 128").unwrap();
        assert_eq!(p.values, [toml::Value::Integer(64), toml::Value::Integer(128)]);
        assert!(SweepParam::parse("nokey").is_err());
    }

    #[test]
    fn cartesian_expansion_in_row_major_order() {
        let base = ScenarioConfig::from_toml_str(BASE).unwrap();
        let params = [
            SweepParam::parse("initial.width=1.0,2.0").unwrap(),
            SweepParam::parse("evolution.b=1.0,2.0,3.0").unwrap(),
        ];
        let pts = expand(&base, &params).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].1.name, "base-004");
        assert_eq!(pts[4].1.initial.width, 2.0);
        assert_eq!(pts[4].1.evolution.b, 2.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let base = ScenarioConfig::from_toml_str(BASE).unwrap();
        let params = [SweepParam::parse("evolution.bogus=1").unwrap()];
        assert!(matches!(expand(&base, &params), Err(CliError::Config(_))));
    }
}
