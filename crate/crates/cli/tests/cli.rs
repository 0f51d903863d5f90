use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hardylab_cli::config::hex_digest;
use hardylab_cli::output::read_snapshot;
use hardylab_cli::{RunManifest, ScenarioConfig, Status};

fn hardylab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardylab")).args(args).current_dir(cwd).output().unwrap()
}

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
snapshot_every = 2
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn check_hashes(root: &Path, m: &RunManifest) {
    for f in &m.files {
        let bytes = fs::read(root.join(&f.path)).unwrap();
        if let Some(h) = &f.sha256 {
            assert_eq!(&hex_digest(&bytes), h, "{}", f.path);
            assert_eq!(f.bytes, Some(bytes.len() as u64));
        }
    }
}

#[test]
fn run_writes_a_complete_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    let out = dir.path().join("nested/deeper/run");
    let o = hardylab(&["run", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.status, Status::Pass);
    check_hashes(&out, &m);
    let snaps: Vec<&str> = m.files.iter().filter(|f| f.diagnostic == "snapshots").map(|f| f.path.as_str()).collect();
    assert_eq!(snaps, ["snapshots/u_00000.bin", "snapshots/u_00002.bin", "snapshots/u_00004.bin"]);
    assert!(m.timings.is_none());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &FREE.replace("steps = 4", "steps = 4\nstepz = 1"));
    let o = hardylab(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stepz") && err.contains("line"), "{err}");

    let o = hardylab(&["run", "builtin:no-such-scenario"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let exact_with_v = FREE.replace("[initial]", "[potential.v1]\nre = [[\"0.1\"]]\n[initial]");
    let cfg = write_config(dir.path(), "exact_v.toml", &exact_with_v);
    assert_eq!(hardylab(&["run", &cfg], dir.path()).status.code(), Some(2));
}

#[test]
fn diagnostic_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = FREE.replace("oracle = true", "oracle = true\noracle_tol = 0.0");
    let cfg = write_config(dir.path(), "strict.toml", &body);
    let out = dir.path().join("strict");
    let o = hardylab(&["run", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.status, Status::Fail);
    assert_eq!(m.diagnostics.iter().find(|d| d.name == "oracle").unwrap().status, Status::Fail);
}

#[test]
fn default_output_dir_is_out_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    assert_eq!(hardylab(&["run", &cfg], dir.path()).status.code(), Some(0));
    assert!(dir.path().join("out/free/manifest.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical_and_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    hardylab(&["run", &cfg, "--out", a.to_str().unwrap()], dir.path());
    hardylab(&["run", &cfg, "--out", b.to_str().unwrap()], dir.path());
    let ma = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.join("manifest.json")).unwrap());

    // Rerunning from the written canonical config reproduces the tree.
    let c = dir.path().join("c");
    let written = a.join("config.toml");
    let o = hardylab(&["run", written.to_str().unwrap(), "--out", c.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(ma, fs::read(c.join("manifest.json")).unwrap());
    let original = ScenarioConfig::load(Path::new(&cfg)).unwrap();
    assert_eq!(ScenarioConfig::load(&written).unwrap(), original);
}

#[test]
fn timings_are_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    let out = dir.path().join("t");
    hardylab(&["run", &cfg, "--out", out.to_str().unwrap(), "--timings"], dir.path());
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    let t = m.timings.unwrap();
    assert!(t.contains_key("evolution") && t.contains_key("oracle"));
}

#[test]
fn snapshot_feeds_file_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    let first = dir.path().join("first");
    hardylab(&["run", &cfg, "--out", first.to_str().unwrap()], dir.path());
    let snap = first.join("snapshots/u_00000.bin");
    let body = FREE
        .replace("family = \"gaussian\"", &format!("family = \"file\"\npath = {:?}", snap.to_str().unwrap()))
        .replace("oracle = true", "oracle = false");
    let cfg2 = write_config(dir.path(), "from_file.toml", &body);
    let second = dir.path().join("second");
    let o = hardylab(&["run", &cfg2, "--out", second.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // Equal up to the roundoff of re-reading the first sample.
    for k in ["00000", "00004"] {
        let rel = format!("snapshots/u_{k}.bin");
        let (a, b) = (read_snapshot(&first.join(&rel)).unwrap(), read_snapshot(&second.join(&rel)).unwrap());
        assert_eq!(a.grid(), b.grid());
        assert_eq!(a.time(), b.time());
        assert!(a.sup_distance(&b).unwrap() <= 1e-14, "{rel}");
    }
}

#[test]
fn sweep_runs_the_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    let out = dir.path().join("sweep");
    let o = hardylab(
        &[
            "sweep",
            &cfg,
            "--param",
            "initial.width=1.0,1.5",
            "--param",
            "evolution.b=1.0,0.5",
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "name,initial.width,evolution.b,status");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[3], "free-002,1.5,1.0,pass");
    assert!(out.join("free-003/manifest.json").exists());

    let bad = hardylab(&["sweep", &cfg, "--param", "grid.nope=1"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn export_plots_adds_tables_to_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv");
    let o = hardylab(&["run", "builtin:convexity-g01", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let manifest = out.join("manifest.json");
    let o = hardylab(&["export-plots", manifest.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::load(&manifest).unwrap();
    check_hashes(&out, &m);
    let plots: Vec<&str> = m.files.iter().filter(|f| f.diagnostic == "plots").map(|f| f.path.as_str()).collect();
    assert!(plots.contains(&"plots/interpolation_bound_rows.csv"), "{plots:?}");
    let table = fs::read_to_string(out.join("plots/interpolation_bound_rows.csv")).unwrap();
    assert!(table.lines().next().unwrap().contains("margin_standard"));
    assert_eq!(table.lines().count(), 65);
}

#[test]
fn list_names_every_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let o = hardylab(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let names = String::from_utf8(o.stdout).unwrap();
    for n in ["free-gaussian", "frontier", "carleman", "system-n2", "heat-decay-box"] {
        assert!(names.lines().any(|l| l == n), "{n}");
    }
}
