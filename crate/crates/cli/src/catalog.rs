//! Built-in scenarios run by `verify` and reachable as `builtin:<name>`.

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult};

const FREE_GAUSSIAN: &str = r#"
name = "free-gaussian"
[grid]
dim = 1
points = 512
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 0.5
steps = 20
method = "exact"
[initial]
family = "gaussian"
[diagnostics]
oracle = true
"#;

const UNITARITY: &str = r#"
name = "unitarity"
[grid]
dim = 1
points = 256
half_width = 16.0
components = 3
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 1000
samples = 101
method = "strang"
[potential.a]
constant = [[1.0, 0.5, 0.0], [0.5, -1.0, 0.2], [0.0, 0.2, 0.5]]
[potential.v1]
re = [["0.5*cos(x1)", "0.1*exp(-x1^2)", "0"], ["0.1*exp(-x1^2)", "0.2", "0"], ["0", "0", "-0.3*sin(x1)^2"]]
[initial]
family = "gaussian"
amplitudes = [1.0, 0.5, 0.25]
[diagnostics]
group_law = true
"#;

const SHARP_T1: &str = r#"
name = "sharp-gaussian-t1"
[grid]
dim = 1
points = 512
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 10
method = "exact"
[initial]
family = "sharp-gaussian"
[weights]
alpha = 2.0
beta = 2.0
gamma = 0.0
[diagnostics]
hardy = true
"#;

const SHARP_T05: &str = r#"
name = "sharp-gaussian-t05"
[grid]
dim = 1
points = 512
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 0.5
steps = 10
method = "exact"
[initial]
family = "sharp-gaussian"
[weights]
alpha = 2.0
beta = 1.0
gamma = 0.0
[diagnostics]
hardy = true
"#;

const CONVEXITY_G005: &str = r#"
name = "convexity-g005"
[grid]
dim = 1
points = 256
half_width = 12.0
[evolution]
a = 0.0
b = 1.0
t_final = 0.5
steps = 63
samples = 64
method = "exact"
[initial]
family = "gaussian"
[weights]
alpha = 3.0
beta = 2.0
gamma = 0.05
[diagnostics]
convexity = true
commutator = true
"#;

const CONVEXITY_G01: &str = r#"
name = "convexity-g01"
[grid]
dim = 1
points = 256
half_width = 12.0
[evolution]
a = 0.0
b = 1.0
t_final = 0.5
steps = 63
samples = 64
method = "exact"
[initial]
family = "gaussian"
[weights]
alpha = 4.0
beta = 3.0
gamma = 0.1
[diagnostics]
convexity = true
commutator = true
interpolation_bound = true
admissibility = true
"#;

const APPELL: &str = r#"
name = "appell"
[grid]
dim = 1
points = 512
half_width = 32.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 1024
method = "exact"
[initial]
family = "gaussian"
[weights]
alpha = 1.0
beta = 2.0
gamma = 0.5
[diagnostics]
appell = true
appell_window = 5.0
"#;

const APPELL_INVERSE: &str = r#"
name = "appell-inverse"
[grid]
dim = 1
points = 1024
half_width = 64.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 512
method = "exact"
[initial]
family = "gaussian"
[weights]
alpha = 1.0
beta = 2.0
gamma = 0.5
[diagnostics]
appell_inverse = true
"#;

const CARLEMAN: &str = r#"
name = "carleman"
seed = 1
[grid]
dim = 1
points = 32
half_width = 4.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 1
method = "exact"
[initial]
family = "zero"
[diagnostics]
carleman = true
[carleman]
mu = 1.0
r = 2.0
eps = 1.0
"#;

const FRONTIER: &str = r#"
name = "frontier"
kind = "frontier"
[grid]
dim = 1
points = 512
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 1
method = "exact"
[initial]
family = "zero"
[frontier]
alphas = [0.75, 1.25, 2.0, 3.0, 4.0]
betas = [0.75, 1.25, 2.0, 3.0, 4.0]
families = [
    { family = "gaussian", width = 2.0 },
    { family = "hermite-gaussian", width = 2.0 },
    { family = "sech", width = 1.0 },
]
sharp_alpha = 2.0
sharp_beta = 2.0
"#;

const HEAT_BOX: &str = r#"
name = "heat-decay-box"
kind = "heat-decay"
[grid]
dim = 1
points = 512
half_width = 16.0
[evolution]
a = 1.0
b = 0.0
t_final = 1.0
steps = 1
method = "exact"
[initial]
family = "box"
width = 1.0
[heat_decay]
deltas = [0.5, 0.9, 1.5, 4.0, 6.0]
oracle_tol = 1e-4
"#;

const HEAT_GAUSSIAN: &str = r#"
name = "heat-decay-gaussian"
kind = "heat-decay"
[grid]
dim = 1
points = 512
half_width = 16.0
[evolution]
a = 1.0
b = 0.0
t_final = 1.0
steps = 1
method = "exact"
[initial]
family = "gaussian"
[heat_decay]
deltas = [0.5, 0.9, 1.5, 4.0, 6.0]
"#;

const SYSTEM_N2: &str = r#"
name = "system-n2"
[grid]
dim = 1
points = 256
half_width = 16.0
components = 2
[evolution]
a = 0.0
b = 1.0
t_final = 1.5
steps = 30
method = "exact"
[potential.a]
constant = [[0.0, 1.0], [1.0, 0.0]]
[initial]
family = "gaussian"
amplitudes = [1.0, 0.0]
[diagnostics]
system = true
"#;

const NONLINEAR_IDENTICAL: &str = r#"
name = "nonlinear-identical"
kind = "nonlinear-difference"
[grid]
dim = 1
points = 256
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 200
samples = 21
method = "strang"
[nonlinearity]
lambda = 1.0
sigma = 1
[initial]
family = "gaussian"
[perturbation]
amplitude = 0.0
"#;

const NONLINEAR_LINEAR: &str = r#"
name = "nonlinear-linear"
kind = "nonlinear-difference"
[grid]
dim = 1
points = 256
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 200
samples = 21
method = "strang"
[nonlinearity]
lambda = 0.0
sigma = 1
[initial]
family = "gaussian"
[perturbation]
amplitude = 0.1
center = [1.0]
"#;

const NONLINEAR_PERTURBED: &str = r#"
name = "nonlinear-perturbed"
kind = "nonlinear-difference"
[grid]
dim = 1
points = 256
half_width = 16.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 200
samples = 21
method = "strang"
[nonlinearity]
lambda = 1.0
sigma = 1
[initial]
family = "gaussian"
[weights]
alpha = 3.0
beta = 2.0
gamma = 0.05
[perturbation]
amplitude = 0.1
center = [1.0]
"#;

const ZERO_DATA: &str = r#"
name = "zero-data"
[grid]
dim = 1
points = 128
half_width = 12.0
[evolution]
a = 0.0
b = 1.0
t_final = 1.0
steps = 10
method = "exact"
[initial]
family = "zero"
[weights]
alpha = 3.0
beta = 2.0
gamma = 0.1
[diagnostics]
convexity = true
hardy = true
admissibility = true
"#;

const DISSIPATIVE: &str = r#"
name = "dissipative"
[grid]
dim = 1
points = 256
half_width = 12.0
[evolution]
a = 0.5
b = 1.0
t_final = 1.0
steps = 200
samples = 51
method = "strang"
[potential.v1]
re = [["0.3*exp(-x1^2)"]]
im = [["0.1*cos(x1)"]]
[initial]
family = "gaussian"
[weights]
alpha = 3.0
beta = 2.0
gamma = 0.05
[diagnostics]
decay = true
"#;

const SOURCES: [&str; 18] = [
    FREE_GAUSSIAN,
    UNITARITY,
    SHARP_T1,
    SHARP_T05,
    CONVEXITY_G005,
    CONVEXITY_G01,
    APPELL,
    APPELL_INVERSE,
    CARLEMAN,
    FRONTIER,
    HEAT_BOX,
    HEAT_GAUSSIAN,
    SYSTEM_N2,
    NONLINEAR_IDENTICAL,
    NONLINEAR_LINEAR,
    NONLINEAR_PERTURBED,
    ZERO_DATA,
    DISSIPATIVE,
];

/// All built-in scenarios in a fixed order.
pub fn builtins() -> Vec<ScenarioConfig> {
    SOURCES.iter().map(|s| ScenarioConfig::from_toml_str(s).expect("built-in scenario parses")).collect()
}

pub fn builtin(name: &str) -> CliResult<ScenarioConfig> {
    builtins().into_iter().find(|c| c.name == name).ok_or_else(|| {
        let names: Vec<String> = builtins().into_iter().map(|c| c.name).collect();
        CliError::Config(format!("unknown built-in {name:?}; available: {}", names.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_have_unique_names() {
        let all = builtins();
        let mut names: Vec<&str> = all.iter().map(|c| c.name.as_str()).collect();
        for c in &all {
            c.build().unwrap_or_else(|e| panic!("{}: {e}", c.name));
        }
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), all.len());
    }

    #[test]
    fn unknown_builtin_is_a_config_error() {
        assert!(matches!(builtin("nope"), Err(CliError::Config(_))));
    }
}
