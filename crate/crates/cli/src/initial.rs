//! Initial data families.

use hardylab_core::weights::{sharp_gaussian_initial, WeightParams};
use hardylab_core::{Field, Grid};
use num_complex::Complex64;

use crate::config::{Family, InitialConfig, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::output::read_snapshot;

/// Scalar profile of an analytic family at `x`, centred at `center`.
pub fn profile(family: Family, width: f64, chirp: f64, center: &[f64], x: &[f64]) -> Complex64 {
    let d: Vec<f64> = x.iter().enumerate().map(|(k, &v)| v - center.get(k).copied().unwrap_or(0.0)).collect();
    let r2: f64 = d.iter().map(|v| v * v).sum();
    let phase = Complex64::new(0.0, -chirp * r2).exp();
    let amp = match family {
        Family::Zero | Family::File | Family::SharpGaussian => 0.0,
        Family::Gaussian => (-r2 / (width * width)).exp(),
        Family::HermiteGaussian => d[0] / width * (-r2 / (width * width)).exp(),
        Family::Sech => 1.0 / (r2.sqrt() / width).cosh(),
        Family::Box => d.iter().map(|v| box_factor(v.abs(), width)).product(),
    };
    phase * amp
}

fn box_factor(r: f64, h: f64) -> f64 {
    let gap = r - h;
    if gap.abs() <= 1e-12 * h.max(1.0) {
        0.5
    } else if gap < 0.0 {
        1.0
    } else {
        0.0
    }
}

fn amplitudes(init: &InitialConfig, n: usize) -> Vec<f64> {
    if init.amplitudes.is_empty() {
        let mut a = vec![0.0; n];
        a[0] = 1.0;
        a
    } else {
        init.amplitudes.clone()
    }
}

/// Samples an analytic family with the given per-component amplitudes.
pub fn family_field(
    grid: &Grid,
    family: Family,
    width: f64,
    chirp: f64,
    center: &[f64],
    amps: &[f64],
) -> CliResult<Field> {
    let d = grid.dim();
    Field::from_fn(grid, |x, c| profile(family, width, chirp, center, &x[..d]) * amps[c])
        .map_err(CliError::stage("initial data"))
}

pub fn initial_field(cfg: &ScenarioConfig, grid: &Grid, weights: Option<&WeightParams>) -> CliResult<Field> {
    let init = &cfg.initial;
    let amps = amplitudes(init, grid.components());
    match init.family {
        Family::SharpGaussian => {
            let w = weights.ok_or_else(|| CliError::Config("sharp-gaussian needs [weights]".into()))?;
            let f = sharp_gaussian_initial(w, cfg.evolution.t_final, grid).map_err(CliError::stage("initial data"))?;
            Ok(scale_components(f, &amps))
        }
        Family::File => {
            let path = init.path.as_ref().ok_or_else(|| CliError::Config("initial.path missing".into()))?;
            let f = read_snapshot(path)?;
            if f.grid() != grid {
                return Err(CliError::Config(format!("{}: snapshot grid differs from [grid]", path.display())));
            }
            Ok(f.with_time(0.0))
        }
        family => family_field(grid, family, init.width, init.chirp, &init.center, &amps),
    }
}

fn scale_components(mut f: Field, amps: &[f64]) -> Field {
    let n = amps.len();
    for chunk in f.values_mut().chunks_mut(n) {
        for (z, a) in chunk.iter_mut().zip(amps) {
            *z *= a;
        }
    }
    f
}
