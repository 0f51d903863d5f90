//! Scenario configuration: a TOML document with one section per module.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hardylab_core::carleman::{CarlemanParams, Regime as CarlemanRegime, WeightVariant};
use hardylab_core::linalg::RMatrix;
use hardylab_core::propagator::Nonlinearity;
use hardylab_core::weights::WeightParams;
use hardylab_core::{EvolutionCoefficients, EvolutionPlan, Grid, MatrixPotential, Method, TimePotential};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// One trajectory plus the enabled diagnostics.
    #[default]
    Evolution,
    /// Endpoint weighted norms over an `(alpha, beta)` lattice.
    Frontier,
    /// Weighted norms of heat-type flows at the final time.
    HeatDecay,
    /// Difference of two nonlinear solutions.
    NonlinearDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinearityConfig>,
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carleman: Option<CarlemanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<FrontierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_decay: Option<HeatDecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
    #[serde(default = "one_usize")]
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
    pub steps: usize,
    /// Stored samples including both endpoints; defaults to `steps + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "default_method")]
    pub method: Method,
}

/// Real symmetric `A(x)`: either constant entries or expressions in `x1`, `x2`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntries {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<String>>>,
}

/// Complex matrix given by real and imaginary expression entries; an empty
/// part is zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixEntries {
    #[serde(default)]
    pub re: Vec<Vec<String>>,
    #[serde(default)]
    pub im: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixEntries>,
    /// Time-independent part; must not mention `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<ComplexMatrixEntries>,
    /// Time-dependent part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<ComplexMatrixEntries>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub lambda: f64,
    pub sigma: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Zero,
    Gaussian,
    /// `exp(-(1/beta^2 + i/(4T)) |x|^2)` with `beta` from `[weights]` and `T = t_final`.
    SharpGaussian,
    HermiteGaussian,
    Sech,
    /// Indicator of the cube of half-width `width`, one half on its faces.
    Box,
    /// Snapshot file written by `run`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub family: Family,
    #[serde(default = "one_f64")]
    pub width: f64,
    /// Quadratic phase `exp(-i chirp |x - center|^2)`.
    #[serde(default)]
    pub chirp: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    /// Per-component amplitudes; empty means `(1, 0, ..., 0)`.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Closed-form comparison for free Gaussian data.
    pub oracle: bool,
    /// `U(t) U(s) = U(t + s)` for the exact propagator.
    pub group_law: bool,
    pub convexity: bool,
    pub commutator: bool,
    pub interpolation_bound: bool,
    pub hardy: bool,
    pub appell: bool,
    pub appell_inverse: bool,
    pub carleman: bool,
    pub decay: bool,
    pub admissibility: bool,
    pub system: bool,
    /// Write every `snapshot_every`-th sample and the last one; 0 disables.
    pub snapshot_every: usize,
    pub convexity_tol: f64,
    pub slack_tol: f64,
    pub mass_tol: f64,
    pub oracle_tol: f64,
    pub group_tol: f64,
    pub system_tol: f64,
    pub commutator_tol: f64,
    pub appell_identity_tol: f64,
    pub appell_tol: f64,
    pub envelope_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub appell_window: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            oracle: false,
            group_law: false,
            convexity: false,
            commutator: false,
            interpolation_bound: false,
            hardy: false,
            appell: false,
            appell_inverse: false,
            carleman: false,
            decay: false,
            admissibility: false,
            system: false,
            snapshot_every: 0,
            convexity_tol: 5e-4,
            slack_tol: 1e-3,
            mass_tol: 1e-8,
            oracle_tol: 1e-8,
            group_tol: 1e-10,
            system_tol: 1e-6,
            commutator_tol: 1e-5,
            appell_identity_tol: 1e-5,
            appell_tol: 1e-4,
            envelope_tol: 2e-2,
            appell_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    pub mu: f64,
    pub r: f64,
    pub eps: f64,
    pub variant: WeightVariant,
    pub regimes: Vec<CarlemanRegime>,
    pub probes: usize,
    pub time_samples: usize,
    pub points: usize,
    pub half_width: f64,
    pub tol: f64,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            r: 2.0,
            eps: 1.0,
            variant: WeightVariant::Shifted,
            regimes: vec![CarlemanRegime::Schroedinger, CarlemanRegime::Parabolic],
            probes: 20,
            time_samples: 801,
            points: 256,
            half_width: 4.0,
            tol: hardylab_core::carleman::CARLEMAN_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: Family,
    #[serde(default = "one_f64")]
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontierConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub families: Vec<FamilyConfig>,
    #[serde(default = "default_falsification_tol")]
    pub falsification_tol: f64,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Threshold pair `alpha beta = 4T` for the surviving Gaussian.
    pub sharp_alpha: f64,
    pub sharp_beta: f64,
    /// Weights of the survival check are `relax` times the threshold pair.
    #[serde(default = "default_relax")]
    pub sharp_relax: f64,
    /// Half-width of the window the survival norms are evaluated on.
    #[serde(default = "default_window")]
    pub sharp_window: f64,
    #[serde(default = "default_product_tol")]
    pub product_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatDecayConfig {
    pub deltas: Vec<f64>,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
}

/// Second datum `u1(0) + amplitude exp(-|x - center|^2 / width^2)` in the
/// first component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub amplitude: f64,
    #[serde(default = "one_f64")]
    pub width: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default = "default_identity_tol")]
    pub identity_tol: f64,
}

fn one_usize() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn default_method() -> Method {
    Method::Strang
}
fn default_falsification_tol() -> f64 {
    1e-8
}
fn default_tail_tol() -> f64 {
    hardylab_core::field::DEFAULT_TAIL_TOL
}
fn default_relax() -> f64 {
    1.3
}
fn default_window() -> f64 {
    11.0
}
fn default_product_tol() -> f64 {
    2e-2
}
fn default_oracle_tol() -> f64 {
    1e-6
}
fn default_identity_tol() -> f64 {
    1e-8
}

/// Everything a run needs, built and checked from a configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub coef: EvolutionCoefficients,
    pub plan: EvolutionPlan,
    pub a: MatrixPotential,
    pub v: TimePotential,
    pub weights: Option<WeightParams>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn core_err(field: &str) -> impl Fn(hardylab_core::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{field}: {e}"))
}

impl ScenarioConfig {
    pub fn from_toml_str(src: &str) -> CliResult<Self> {
        toml::from_str(src).map_err(|e| config_err(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let src = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml_str(&src).map_err(|e| match e {
            CliError::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical serialization; parsing it back gives an equal config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        hex_digest(self.to_toml_string().as_bytes())
    }

    fn weights_required(&self, what: &str) -> CliResult<WeightParams> {
        let w = self.weights.ok_or_else(|| config_err(format!("{what} needs a [weights] section")))?;
        WeightParams::new(w.alpha, w.beta, w.gamma).map_err(core_err("weights"))
    }

    /// Checks every module precondition and builds the run inputs.
    pub fn build(&self) -> CliResult<Setup> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(config_err(format!("name {:?}: use letters, digits, '-' and '_'", self.name)));
        }
        let g = &self.grid;
        let grid = Grid::new(g.dim, g.points, g.half_width, g.components).map_err(core_err("grid"))?;
        let e = &self.evolution;
        let coef = EvolutionCoefficients::new(e.a, e.b).map_err(core_err("evolution"))?;
        if !(e.t_final.is_finite() && e.t_final > 0.0) {
            return Err(config_err(format!("evolution.t_final = {} must be positive", e.t_final)));
        }
        let samples = e.samples.unwrap_or(e.steps + 1);
        if e.steps == 0 || samples < 2 || !e.steps.is_multiple_of(samples - 1) {
            return Err(config_err(format!(
                "evolution: steps = {} must be a positive multiple of samples - 1 = {}",
                e.steps,
                samples.saturating_sub(1)
            )));
        }
        let mut plan = EvolutionPlan::new(coef, e.t_final, e.steps, e.method).with_samples(samples);
        if let Some(nl) = self.nonlinearity {
            plan.nonlinearity = Some(Nonlinearity::new(nl.lambda, nl.sigma).map_err(core_err("nonlinearity"))?);
        }
        let a = self.build_a(&grid)?;
        let v = self.build_v(&grid)?;
        if e.method == Method::Exact && (!v.is_zero() || plan.nonlinearity.is_some()) {
            return Err(config_err("evolution.method = \"exact\" admits neither a potential V nor a nonlinearity"));
        }
        if e.method == Method::Duhamel && plan.nonlinearity.is_some() {
            return Err(config_err("evolution.method = \"duhamel\" does not take a nonlinearity"));
        }
        self.check_initial(&grid)?;

        let d = &self.diagnostics;
        let mut weights = match self.weights {
            Some(w) => Some(WeightParams::new(w.alpha, w.beta, w.gamma).map_err(core_err("weights"))?),
            None => None,
        };
        if d.convexity || d.commutator {
            weights = Some(self.weights_required("diagnostics.convexity")?);
        }
        if d.interpolation_bound || d.admissibility {
            weights = Some(self.weights_required("diagnostics.interpolation_bound/admissibility")?);
        }
        if d.decay {
            weights = Some(self.weights_required("diagnostics.decay")?);
            if coef.a <= 0.0 {
                return Err(config_err("diagnostics.decay needs evolution.a > 0"));
            }
        }
        if d.group_law && !a.is_constant() {
            return Err(config_err("diagnostics.group_law needs a constant potential.a"));
        }
        if d.appell || d.appell_inverse {
            weights = Some(self.weights_required("diagnostics.appell")?);
            if (e.t_final - 1.0).abs() > 1e-12 {
                return Err(config_err("diagnostics.appell needs evolution.t_final = 1"));
            }
            if samples < hardylab_core::appell::MIN_SOURCE_SAMPLES {
                return Err(config_err(format!(
                    "diagnostics.appell needs at least {} stored samples",
                    hardylab_core::appell::MIN_SOURCE_SAMPLES
                )));
            }
            if !a.is_constant() {
                return Err(config_err("diagnostics.appell needs a constant potential.a"));
            }
        }
        if d.system && grid.components() < 2 {
            return Err(config_err("diagnostics.system needs grid.components >= 2"));
        }
        if d.carleman {
            let c = self.carleman.clone().unwrap_or_default();
            CarlemanParams::new(c.mu, c.r, c.eps).map_err(core_err("carleman"))?;
            Grid::new(grid.dim(), c.points, c.half_width, grid.components()).map_err(core_err("carleman"))?;
            if c.probes == 0 || c.regimes.is_empty() {
                return Err(config_err("carleman: probes and regimes must be non-empty"));
            }
        }
        let tols = [
            ("convexity_tol", d.convexity_tol),
            ("slack_tol", d.slack_tol),
            ("mass_tol", d.mass_tol),
            ("oracle_tol", d.oracle_tol),
            ("group_tol", d.group_tol),
            ("system_tol", d.system_tol),
            ("commutator_tol", d.commutator_tol),
            ("appell_identity_tol", d.appell_identity_tol),
            ("appell_tol", d.appell_tol),
            ("envelope_tol", d.envelope_tol),
        ];
        for (flag, tol) in tols {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(config_err(format!("diagnostics.{flag} = {tol}")));
            }
        }

        match self.kind {
            ScenarioKind::Evolution => {}
            ScenarioKind::Frontier => {
                let f = self
                    .frontier
                    .as_ref()
                    .ok_or_else(|| config_err("kind = \"frontier\" needs a [frontier] section"))?;
                if f.alphas.is_empty() || f.betas.is_empty() || f.families.is_empty() {
                    return Err(config_err("frontier: alphas, betas and families must be non-empty"));
                }
                for &x in f.alphas.iter().chain(&f.betas) {
                    if !(x > 0.0 && x.is_finite()) {
                        return Err(config_err(format!("frontier: weight width {x} must be positive")));
                    }
                }
                let sharp = WeightParams::new(f.sharp_alpha, f.sharp_beta, 0.0).map_err(core_err("frontier"))?;
                if (sharp.alpha * sharp.beta - 4.0 * e.t_final).abs() > 1e-12 {
                    return Err(config_err("frontier: sharp_alpha * sharp_beta must equal 4 evolution.t_final"));
                }
                if f.sharp_relax.is_nan()
                    || f.sharp_relax <= 1.0
                    || f.sharp_window.is_nan()
                    || f.sharp_window <= 0.0
                    || f.sharp_window > g.half_width
                {
                    return Err(config_err("frontier: need sharp_relax > 1 and 0 < sharp_window <= grid.half_width"));
                }
                if f.families.iter().any(|fam| matches!(fam.family, Family::File | Family::SharpGaussian)) {
                    return Err(config_err("frontier: families must be analytic (no file or sharp-gaussian)"));
                }
            }
            ScenarioKind::HeatDecay => {
                let h = self
                    .heat_decay
                    .as_ref()
                    .ok_or_else(|| config_err("kind = \"heat-decay\" needs a [heat_decay] section"))?;
                if coef.a <= 0.0 {
                    return Err(config_err("kind = \"heat-decay\" needs evolution.a > 0"));
                }
                if h.deltas.is_empty() || h.deltas.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(config_err("heat_decay.deltas must be positive and non-empty"));
                }
            }
            ScenarioKind::NonlinearDifference => {
                if plan.nonlinearity.is_none() {
                    return Err(config_err("kind = \"nonlinear-difference\" needs a [nonlinearity] section"));
                }
                if self.perturbation.is_none() {
                    return Err(config_err("kind = \"nonlinear-difference\" needs a [perturbation] section"));
                }
                if e.method != Method::Strang {
                    return Err(config_err("kind = \"nonlinear-difference\" needs evolution.method = \"strang\""));
                }
            }
        }
        Ok(Setup { grid, coef, plan, a, v, weights })
    }

    pub fn build_a(&self, grid: &Grid) -> CliResult<MatrixPotential> {
        let given = match &self.potential.a {
            None => return Ok(MatrixPotential::zero(grid)),
            Some(s) => s,
        };
        match (&given.constant, &given.entries) {
            (Some(rows), None) => {
                let n = grid.components();
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(config_err(format!("potential.a.constant must be {n}x{n}")));
                }
                let m = RMatrix::from_fn(n, n, |i, j| rows[i][j]);
                MatrixPotential::constant(grid, m).map_err(core_err("potential.a"))
            }
            (None, Some(entries)) => MatrixPotential::from_expressions(grid, entries).map_err(core_err("potential.a")),
            _ => Err(config_err("potential.a needs exactly one of `constant` or `entries`")),
        }
    }

    pub fn build_v(&self, grid: &Grid) -> CliResult<TimePotential> {
        let mut v = TimePotential::zero(grid);
        if let Some(given) = &self.potential.v1 {
            let v1 = TimePotential::from_expressions(grid, &given.re, &given.im).map_err(core_err("potential.v1"))?;
            if v1.has_dynamic() {
                return Err(config_err("potential.v1 must not depend on t; use potential.v2"));
            }
            v = v.with_static(move |x| v1.eval(x, 0.0)).map_err(core_err("potential.v1"))?;
        }
        if let Some(given) = &self.potential.v2 {
            let v2 = TimePotential::from_expressions(grid, &given.re, &given.im).map_err(core_err("potential.v2"))?;
            v = v.with_dynamic(Arc::new(move |x: &[f64], t: f64| v2.eval(x, t)));
        }
        Ok(v)
    }

    fn check_initial(&self, grid: &Grid) -> CliResult<()> {
        let init = &self.initial;
        if !init.amplitudes.is_empty() && init.amplitudes.len() != grid.components() {
            return Err(config_err(format!("initial.amplitudes must have {} entries", grid.components())));
        }
        if !init.center.is_empty() && init.center.len() != grid.dim() {
            return Err(config_err(format!("initial.center must have {} entries", grid.dim())));
        }
        if !(init.width > 0.0 && init.width.is_finite()) {
            return Err(config_err(format!("initial.width = {} must be positive", init.width)));
        }
        match init.family {
            Family::SharpGaussian => {
                let w = self.weights_required("initial.family = \"sharp-gaussian\"")?;
                if (w.alpha * w.beta - 4.0 * self.evolution.t_final).abs() > 1e-12 {
                    return Err(config_err(
                        "initial.family = \"sharp-gaussian\" needs alpha * beta = 4 evolution.t_final",
                    ));
                }
            }
            Family::File if init.path.is_none() => {
                return Err(config_err("initial.family = \"file\" needs initial.path"));
            }
            _ => {}
        }
        Ok(())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
