//! The built-in battery: every catalog scenario plus the static Hardy check
//! on random smooth fields, written to one output tree.

use std::path::Path;

use hardylab_core::weights::hardy_envelope;
use hardylab_core::{Field, Grid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::builtins;
use crate::config::hex_digest;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, tool_version, DiagnosticSummary, FileEntry, OutputTree, RunManifest, Status};
use crate::run::{run_scenario, RunOptions};

pub const HARDY_RANDOM_FIELDS: usize = 50;
pub const HARDY_RANDOM_SEED: u64 = 20_240_601;
/// Static envelope products must reach `4 (1 - HARDY_STATIC_SLACK)`.
pub const HARDY_STATIC_SLACK: f64 = 5e-2;

/// Worker count: explicit value, then `HARDYLAB_WORKERS`, then the number of
/// available cores.
pub fn worker_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("HARDYLAB_WORKERS").ok().and_then(|v| v.parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

/// Sum of two or three shifted, chirped Gaussians times a random quadratic.
pub fn random_smooth_field(grid: &Grid, rng: &mut impl Rng) -> CliResult<Field> {
    let terms: Vec<(Complex64, f64, f64, f64)> = (0..rng.gen_range(2..=3))
        .map(|_| {
            let amp = Complex64::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
            (amp, rng.gen_range(-3.0..3.0), rng.gen_range(0.5..2.0), rng.gen_range(-0.3..0.3))
        })
        .collect();
    let (p1, p2): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..0.5));
    Field::from_fn(grid, |x, _| {
        let x = x[0];
        let sum: Complex64 = terms
            .iter()
            .map(|&(amp, c, w, chirp)| {
                let d2 = (x - c) * (x - c);
                amp * Complex64::new(-d2 / (w * w), -chirp * d2).exp()
            })
            .sum();
        sum * (1.0 + p1 * x + p2 * x * x)
    })
    .map_err(CliError::stage("hardy random fields"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyRandomRow {
    pub index: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub product: f64,
}

pub fn hardy_random(count: usize, seed: u64) -> CliResult<Vec<HardyRandomRow>> {
    let grid = Grid::new(1, 512, 16.0, 1).map_err(CliError::stage("hardy random fields"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| {
            let f = random_smooth_field(&grid, &mut rng)?;
            let e = hardy_envelope(&f).map_err(CliError::stage("hardy random fields"))?;
            Ok(HardyRandomRow { index, alpha_hat: e.alpha_hat, beta_hat: e.beta_hat, product: e.product })
        })
        .collect()
}

fn hardy_random_summary(out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "hardy-random";
    let rows = hardy_random(HARDY_RANDOM_FIELDS, HARDY_RANDOM_SEED)?;
    let floor = 4.0 * (1.0 - HARDY_STATIC_SLACK);
    let min = rows.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.index.to_string(), fmt_f64(r.alpha_hat), fmt_f64(r.beta_hat), fmt_f64(r.product)])
        .collect();
    let file =
        out.write_csv("hardy-random/products.csv", name, &["index", "alpha_hat", "beta_hat", "product"], &csv)?;
    Ok(DiagnosticSummary {
        name: name.into(),
        status: Status::from_pass(min >= floor),
        message: Some(format!("min static product {min:.4} over {} fields (floor {floor})", rows.len())),
        files: vec![file],
    })
}

/// Runs the battery into `root/<scenario>/` and writes `summary.csv` and a
/// top-level manifest.
pub fn run_verify(root: &Path, workers: Option<usize>) -> CliResult<RunManifest> {
    let configs = builtins();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<CliResult<RunManifest>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| run_scenario(cfg, &RunOptions { out_dir: Some(root.join(&cfg.name)), timings: false }))
            .collect()
    });

    let mut out = OutputTree::create(root)?;
    let mut diagnostics = Vec::new();
    let mut rows = Vec::new();
    for (cfg, res) in configs.iter().zip(results) {
        let m = res?;
        for f in &m.files {
            let path = format!("{}/{}", cfg.name, f.path);
            let (bytes, sha256) = if f.path == crate::output::MANIFEST_NAME {
                let data = std::fs::read(root.join(&path)).map_err(CliError::io(root.join(&path)))?;
                (Some(data.len() as u64), Some(hex_digest(&data)))
            } else {
                (f.bytes, f.sha256.clone())
            };
            out.adopt(FileEntry { path, diagnostic: cfg.name.clone(), bytes, sha256 });
        }
        let failed: Vec<&str> = m.diagnostics.iter().filter(|d| !d.status.is_ok()).map(|d| d.name.as_str()).collect();
        rows.push(vec![cfg.name.clone(), status_name(m.status), failed.join(" ")]);
        diagnostics.push(DiagnosticSummary {
            name: cfg.name.clone(),
            status: m.status,
            message: (!failed.is_empty()).then(|| format!("failed: {}", failed.join(", "))),
            files: vec![format!("{}/{}", cfg.name, crate::output::MANIFEST_NAME)],
        });
    }
    let hardy = hardy_random_summary(&mut out)?;
    rows.push(vec![hardy.name.clone(), status_name(hardy.status), String::new()]);
    diagnostics.push(hardy);
    out.write_csv("summary.csv", "verify", &["scenario", "status", "failed"], &rows)?;

    let status = if diagnostics.iter().any(|d| d.status == Status::Error) {
        Status::Error
    } else if diagnostics.iter().any(|d| d.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    };
    let hashes: Vec<String> = configs.iter().map(|c| c.hash()).collect();
    let manifest = RunManifest {
        name: "verify".into(),
        config_hash: hex_digest(hashes.join("\n").as_bytes()),
        tool_version: tool_version(),
        seed: HARDY_RANDOM_SEED,
        status,
        diagnostics,
        files: out.entries(),
        timings: None,
    };
    manifest.write(root)?;
    Ok(manifest)
}

pub fn status_name(s: Status) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_worker_count_wins() {
        assert_eq!(worker_count(Some(3)), 3);
        assert_eq!(worker_count(Some(0)), 1);
        assert!(worker_count(None) >= 1);
    }

    #[test]
    fn random_fields_are_seeded() {
        let a = hardy_random(3, 7).unwrap();
        let b = hardy_random(3, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, hardy_random(3, 8).unwrap());
    }
}
