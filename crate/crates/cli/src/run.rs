//! One scenario run: build, evolve, diagnose, write the artifact tree.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hardylab_core::propagator::evolve;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::diagnostics::{self as diag, RunContext};
use crate::error::{CliError, CliResult};
use crate::initial::initial_field;
use crate::output::{tool_version, DiagnosticSummary, OutputTree, RunManifest, Status};
use crate::scenarios;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output_dir` of the configuration.
    pub out_dir: Option<PathBuf>,
    /// Record wall-clock stage timings in the manifest.
    pub timings: bool,
}

/// `--out`, then `output_dir`, then `out/<name>`.
pub fn output_dir(cfg: &ScenarioConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

type Diagnostic = fn(&RunContext, &mut OutputTree) -> CliResult<DiagnosticSummary>;

fn enabled(cfg: &ScenarioConfig) -> Vec<(&'static str, Diagnostic)> {
    let d = &cfg.diagnostics;
    let table: [(bool, &'static str, Diagnostic); 13] = [
        (true, "mass", diag::mass),
        (d.oracle, "oracle", diag::oracle),
        (d.group_law, "group_law", diag::group_law),
        (d.system, "system", diag::system),
        (d.convexity, "convexity", diag::convexity),
        (d.commutator, "commutator", diag::commutator),
        (d.interpolation_bound, "interpolation_bound", diag::interpolation_bound),
        (d.hardy, "hardy", diag::hardy),
        (d.appell, "appell", diag::appell),
        (d.appell_inverse, "appell_inverse", diag::appell_inverse),
        (d.carleman, "carleman", diag::carleman),
        (d.decay, "decay", diag::decay),
        (d.admissibility, "admissibility", diag::admissibility),
    ];
    let mut out: Vec<_> = table.into_iter().filter(|(on, _, _)| *on).map(|(_, n, f)| (n, f)).collect();
    if d.snapshot_every > 0 {
        out.push(("snapshots", diag::snapshots));
    }
    out
}

/// Stage failures inside a diagnostic are recorded, not propagated.
fn contain(name: &str, r: CliResult<DiagnosticSummary>) -> CliResult<DiagnosticSummary> {
    match r {
        Ok(s) => Ok(s),
        Err(CliError::Stage { stage, source }) => Ok(DiagnosticSummary {
            name: name.to_string(),
            status: Status::Error,
            message: Some(format!("{stage}: {source}")),
            files: Vec::new(),
        }),
        Err(e) => Err(e),
    }
}

fn overall(diagnostics: &[DiagnosticSummary]) -> Status {
    if diagnostics.iter().any(|d| d.status == Status::Error) {
        Status::Error
    } else if diagnostics.iter().any(|d| d.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    }
}

/// Runs a scenario and writes its artifacts and manifest.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> CliResult<RunManifest> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(stage.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let setup = cfg.build()?;
    let u0 = initial_field(cfg, &setup.grid, setup.weights.as_ref())?;
    let traj = evolve(&setup.plan, &u0, &setup.a, &setup.v, None).map_err(CliError::stage("evolution"))?;
    lap("evolution", &mut timings);

    let root = output_dir(cfg, opts);
    let mut out = OutputTree::create(&root)?;
    let ctx = RunContext { cfg, setup: &setup, traj: &traj };
    let mut diagnostics = Vec::new();
    for (name, f) in enabled(cfg) {
        diagnostics.push(contain(name, f(&ctx, &mut out))?);
        lap(name, &mut timings);
    }
    let scenario = match cfg.kind {
        ScenarioKind::Evolution => None,
        ScenarioKind::Frontier => Some((
            "frontier",
            scenarios::frontier_sweep(cfg, &setup).and_then(|r| scenarios::write_frontier(&r, &mut out)),
        )),
        ScenarioKind::HeatDecay => Some((
            "heat_decay",
            scenarios::heat_decay(cfg, &setup, &traj).and_then(|r| scenarios::write_heat_decay(&r, &mut out)),
        )),
        ScenarioKind::NonlinearDifference => Some((
            "nonlinear_difference",
            scenarios::nonlinear_difference(cfg, &setup, &traj)
                .and_then(|r| scenarios::write_nonlinear_difference(&r, &mut out)),
        )),
    };
    if let Some((name, r)) = scenario {
        diagnostics.push(contain(name, r)?);
        lap(name, &mut timings);
    }

    out.write_bytes("config.toml", "config", cfg.to_toml_string().as_bytes())?;
    let manifest = RunManifest {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        tool_version: tool_version(),
        seed: cfg.seed,
        status: overall(&diagnostics),
        diagnostics,
        files: out.entries(),
        timings: opts.timings.then_some(timings),
    };
    manifest.write(&root)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREE: &str = r#"
name = "free"
[grid]
dim = 1
points = 128
half_width = 12.0
[evolution]
a = 0.0
b = 1.0
t_final = 0.5
steps = 4
method = "exact"
[initial]
family = "gaussian"
[diagnostics]
oracle = true
"#;

    #[test]
    fn free_gaussian_run_passes_and_lists_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScenarioConfig::from_toml_str(FREE).unwrap();
        let m = run_scenario(&cfg, &RunOptions { out_dir: Some(dir.path().join("r")), timings: false }).unwrap();
        assert!(m.passed(), "{m:?}");
        let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["config.toml", "manifest.json", "mass.csv", "mass.json", "oracle.csv"]);
        assert!(m.timings.is_none());
        let back = ScenarioConfig::load(&dir.path().join("r/config.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn output_dir_precedence() {
        let mut cfg = ScenarioConfig::from_toml_str(FREE).unwrap();
        assert_eq!(output_dir(&cfg, &RunOptions::default()), Path::new("out/free"));
        cfg.output_dir = Some("cfg_dir".into());
        assert_eq!(output_dir(&cfg, &RunOptions::default()), Path::new("cfg_dir"));
        let opts = RunOptions { out_dir: Some("cli_dir".into()), timings: false };
        assert_eq!(output_dir(&cfg, &opts), Path::new("cli_dir"));
    }
}
