//! Shared fixtures for the benchmarks.

use hardylab_core::linalg::{CMatrix, RMatrix};
use hardylab_core::{Field, Grid, MatrixPotential, Result, TimePotential};
use num_complex::Complex64;

/// Chirped Gaussian in every component.
pub fn gaussian(grid: &Grid) -> Result<Field> {
    Field::from_fn(grid, |x, c| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex64::new(0.0, 0.3 * r2 + c as f64).exp() * (-r2 / 2.0).exp()
    })
}

/// Constant symmetric coupling between neighbouring components.
pub fn coupling(grid: &Grid) -> Result<MatrixPotential> {
    let n = grid.components();
    let a = RMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            0.5
        } else if i == j {
            0.1 * i as f64
        } else {
            0.0
        }
    });
    MatrixPotential::constant(grid, a)
}

/// Smooth static diagonal potential.
pub fn bump_potential(grid: &Grid) -> Result<TimePotential> {
    let n = grid.components();
    TimePotential::zero(grid).with_static(move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        CMatrix::from_diagonal_element(n, n, Complex64::new((-r2).exp(), 0.0))
    })
}
