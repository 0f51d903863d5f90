use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hardylab_cli::catalog::{builtin, builtins};
use hardylab_cli::plots::export_plots;
use hardylab_cli::run::output_dir;
use hardylab_cli::sweep::{run_sweep, SweepParam};
use hardylab_cli::{run_scenario, run_verify, CliResult, RunManifest, RunOptions, ScenarioConfig};

/// Weighted-norm uniqueness experiments for Schrödinger-type evolutions.
#[derive(Debug, Parser)]
#[command(name = "hardylab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario: a TOML file or `builtin:<name>`.
    Run {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record stage timings in the manifest.
        #[arg(long)]
        timings: bool,
    },
    /// Run the cartesian product of `--param key=v1,v2,...` overrides.
    Sweep {
        config: String,
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the built-in battery.
    Verify {
        #[arg(long, default_value = "out/verify")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Flatten a run's JSON reports into plot-ready CSV files.
    ExportPlots { manifest: PathBuf },
    /// List the built-in scenarios.
    List,
}

fn load(arg: &str) -> CliResult<ScenarioConfig> {
    match arg.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => ScenarioConfig::load(Path::new(arg)),
    }
}

fn report(m: &RunManifest, root: &Path) {
    for d in &m.diagnostics {
        println!(
            "{:<24} {:<10} {}",
            d.name,
            format!("{:?}", d.status).to_lowercase(),
            d.message.as_deref().unwrap_or("")
        );
    }
    println!("{}: {:?} ({})", m.name, m.status, root.display());
}

fn execute(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run { config, out, timings } => {
            let cfg = load(&config)?;
            let opts = RunOptions { out_dir: out, timings };
            let m = run_scenario(&cfg, &opts)?;
            report(&m, &output_dir(&cfg, &opts));
            Ok(m.passed())
        }
        Command::Sweep { config, params, out, workers } => {
            let cfg = load(&config)?;
            let params = params.iter().map(|p| SweepParam::parse(p)).collect::<CliResult<Vec<_>>>()?;
            let root = out.unwrap_or_else(|| Path::new("out").join(format!("{}-sweep", cfg.name)));
            let m = run_sweep(&cfg, &params, &root, workers)?;
            report(&m, &root);
            Ok(m.passed())
        }
        Command::Verify { out, workers } => {
            let m = run_verify(&out, workers)?;
            report(&m, &out);
            Ok(m.passed())
        }
        Command::ExportPlots { manifest } => {
            let m = export_plots(&manifest)?;
            let plots = m.files.iter().filter(|f| f.diagnostic == "plots").count();
            println!("wrote {plots} plot tables next to {}", manifest.display());
            Ok(true)
        }
        Command::List => {
            for c in builtins() {
                println!("{}", c.name);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
