//! Scenario runner for weighted-norm uniqueness experiments: configuration,
//! diagnostics, artifact trees and the built-in verification battery.

pub mod catalog;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod initial;
pub mod output;
pub mod plots;
pub mod run;
pub mod scenarios;
pub mod sweep;
pub mod verify;

pub use config::{ScenarioConfig, ScenarioKind};
pub use error::{CliError, CliResult};
pub use output::{RunManifest, Status};
pub use run::{run_scenario, RunOptions};
pub use verify::run_verify;
