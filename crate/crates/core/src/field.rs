//! Periodic grids, vector-valued fields and their unitary Fourier transform.
//!
//! Points are stored row-major with the first axis slowest; the `N`
//! components of a point are contiguous. Spectral data use the standard
//! FFT ordering (non-negative indices first).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of components.
pub const MAX_COMPONENTS: usize = 16;
/// Default relative bound on boundary-shell integrands.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Shape of a grid, independent of FFT plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
    pub components: usize,
}

/// Uniform periodic grid on `[-L, L)^n` carrying `N` components per point.
#[derive(Clone)]
pub struct Grid {
    shape: GridShape,
    axis: Arc<Vec<f64>>,
    freqs: Arc<Vec<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("shape", &self.shape).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64, components: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("points per axis {points} must be a power of two >= 8")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half width {half_width} must be positive")));
        }
        if components == 0 || components > MAX_COMPONENTS {
            return Err(Error::InvalidGrid(format!("component count {components} not in 1..={MAX_COMPONENTS}")));
        }
        let h = 2.0 * half_width / points as f64;
        let axis: Vec<f64> = (0..points).map(|j| -half_width + j as f64 * h).collect();
        let dxi = std::f64::consts::PI / half_width;
        let freqs: Vec<f64> = (0..points).map(|j| signed_index(j, points) as f64 * dxi).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            shape: GridShape { dim, points, half_width, components },
            axis: Arc::new(axis),
            freqs: Arc::new(freqs),
            fwd: planner.plan_fft_forward(points),
            inv: planner.plan_fft_inverse(points),
        })
    }

    pub fn from_shape(shape: GridShape) -> Result<Self> {
        Self::new(shape.dim, shape.points, shape.half_width, shape.components)
    }

    /// Same geometry with a different component count.
    pub fn with_components(&self, components: usize) -> Result<Self> {
        if components == 0 || components > MAX_COMPONENTS {
            return Err(Error::InvalidGrid(format!("component count {components}")));
        }
        let mut g = self.clone();
        g.shape.components = components;
        Ok(g)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }
    pub fn dim(&self) -> usize {
        self.shape.dim
    }
    pub fn points(&self) -> usize {
        self.shape.points
    }
    pub fn half_width(&self) -> f64 {
        self.shape.half_width
    }
    pub fn components(&self) -> usize {
        self.shape.components
    }
    pub fn spacing(&self) -> f64 {
        2.0 * self.shape.half_width / self.shape.points as f64
    }
    /// Number of spatial points, `M^n`.
    pub fn total_points(&self) -> usize {
        self.shape.points.pow(self.shape.dim as u32)
    }
    /// Number of stored complex values, `M^n N`.
    pub fn len(&self) -> usize {
        self.total_points() * self.shape.components
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Quadrature weight `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.shape.dim as i32)
    }
    /// Frequency cell `(pi/L)^n`.
    pub fn frequency_cell(&self) -> f64 {
        (std::f64::consts::PI / self.shape.half_width).powi(self.shape.dim as i32)
    }
    pub fn axis_coords(&self) -> &[f64] {
        &self.axis
    }
    /// Axis frequencies in FFT order.
    pub fn axis_freqs(&self) -> &[f64] {
        &self.freqs
    }

    fn split(&self, p: usize) -> (usize, usize) {
        let m = self.shape.points;
        if self.shape.dim == 1 {
            (p, 0)
        } else {
            (p / m, p % m)
        }
    }

    /// Coordinates of point `p`; unused trailing entries are zero.
    pub fn coords(&self, p: usize) -> [f64; 2] {
        let (i, j) = self.split(p);
        if self.shape.dim == 1 {
            [self.axis[i], 0.0]
        } else {
            [self.axis[i], self.axis[j]]
        }
    }

    pub fn radius_sq(&self, p: usize) -> f64 {
        let x = self.coords(p);
        x[0] * x[0] + x[1] * x[1]
    }

    /// Frequency vector of mode `p` (FFT order).
    pub fn mode_freq(&self, p: usize) -> [f64; 2] {
        let (i, j) = self.split(p);
        if self.shape.dim == 1 {
            [self.freqs[i], 0.0]
        } else {
            [self.freqs[i], self.freqs[j]]
        }
    }

    pub fn freq_sq(&self, p: usize) -> f64 {
        let k = self.mode_freq(p);
        k[0] * k[0] + k[1] * k[1]
    }

    /// Whether point `p` lies on the outermost layer of the box.
    pub fn is_outer_shell(&self, p: usize) -> bool {
        let m = self.shape.points;
        let (i, j) = self.split(p);
        let edge = |k: usize| k == 0 || k == m - 1;
        edge(i) || (self.shape.dim == 2 && edge(j))
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn signed_index(j: usize, m: usize) -> i64 {
    if j < m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// Vector-valued sampled field `R^n -> C^N` with a time tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
    time: f64,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(Self { grid: grid.clone(), values, time })
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values, time }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid, vec![ZERO; grid.len()], 0.0)
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64], usize) -> Complex64) -> Result<Self> {
        let n = grid.components();
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for p in 0..grid.total_points() {
            let x = grid.coords(p);
            for c in 0..n {
                values.push(f(&x[..d], c));
            }
        }
        Self::new(grid, values, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }
    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// The `N` components at point `p`.
    pub fn at(&self, p: usize) -> &[Complex64] {
        let n = self.grid.components();
        &self.values[p * n..(p + 1) * n]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [Complex64] {
        let n = self.grid.components();
        &mut self.values[p * n..(p + 1) * n]
    }

    /// Samples of one component.
    pub fn component(&self, c: usize) -> Vec<Complex64> {
        let n = self.grid.components();
        self.values.iter().skip(c).step_by(n).copied().collect()
    }

    /// Pointwise `|u(x)|^2` summed over components.
    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        let n = self.grid.components();
        self.values.chunks(n).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    pub fn scale(&self, s: Complex64) -> Field {
        let values = self.values.iter().map(|z| z * s).collect();
        Field::from_raw(&self.grid, values, self.time)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field::from_raw(&self.grid, values, self.time))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field::from_raw(&self.grid, values, self.time))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    /// Multiplies every component at point `p` by `w(p)`.
    pub fn mul_pointwise(&self, w: impl Fn(usize) -> Complex64) -> Field {
        let n = self.grid.components();
        let mut out = self.clone();
        for (p, chunk) in out.values.chunks_mut(n).enumerate() {
            let s = w(p);
            chunk.iter_mut().for_each(|z| *z *= s);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise difference.
    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn conj(&self) -> Field {
        let values = self.values.iter().map(|z| z.conj()).collect();
        Field::from_raw(&self.grid, values, self.time)
    }
}

/// Runs the unnormalised DFT over every axis of every component in place.
pub(crate) fn dft_in_place(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let m = grid.points();
    let nc = grid.components();
    let plan = if inverse { &grid.inv } else { &grid.fwd };
    let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
    let np = grid.total_points();
    let mut plane = vec![ZERO; np];
    for c in 0..nc {
        if nc == 1 {
            plane.copy_from_slice(data);
        } else {
            for (p, v) in plane.iter_mut().enumerate() {
                *v = data[p * nc + c];
            }
        }
        plan.process_with_scratch(&mut plane, &mut scratch);
        if grid.dim() == 2 {
            transpose(&mut plane, m);
            plan.process_with_scratch(&mut plane, &mut scratch);
            transpose(&mut plane, m);
        }
        if nc == 1 {
            data.copy_from_slice(&plane);
        } else {
            for (p, v) in plane.iter().enumerate() {
                data[p * nc + c] = *v;
            }
        }
    }
}

fn transpose(a: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            a.swap(i * m + j, j * m + i);
        }
    }
}

/// Raw DFT coefficients of a field.
pub(crate) fn raw_modes(f: &Field) -> Vec<Complex64> {
    let mut data = f.values.clone();
    dft_in_place(&f.grid, &mut data, false);
    data
}

/// Inverse of [`raw_modes`], including the `1/M^n` normalisation.
pub(crate) fn from_raw_modes(grid: &Grid, mut modes: Vec<Complex64>, time: f64) -> Field {
    dft_in_place(grid, &mut modes, true);
    let s = 1.0 / grid.total_points() as f64;
    modes.iter_mut().for_each(|z| *z *= s);
    Field::from_raw(grid, modes, time)
}

/// Applies a scalar Fourier multiplier `m(p)` to every component.
pub(crate) fn apply_multiplier(f: &Field, mult: impl Fn(usize) -> Complex64) -> Field {
    let n = f.grid.components();
    let mut modes = raw_modes(f);
    for (p, chunk) in modes.chunks_mut(n).enumerate() {
        let s = mult(p);
        chunk.iter_mut().for_each(|z| *z *= s);
    }
    from_raw_modes(&f.grid, modes, f.time)
}

/// Fourier coefficients `f^(xi_k)` in FFT order, unitary normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    values: Vec<Complex64>,
    time: f64,
}

impl SpectralField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn at(&self, p: usize) -> &[Complex64] {
        let n = self.grid.components();
        &self.values[p * n..(p + 1) * n]
    }
    /// `(sum_k |f^(xi_k)|^2 (pi/L)^n)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        (s * self.grid.frequency_cell()).sqrt()
    }
    /// Pointwise `|f^(xi)|^2` summed over components.
    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        let n = self.grid.components();
        self.values.chunks(n).map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect()
    }
}

/// Factor `(h / sqrt(2 pi))^n (-1)^(sum k)` linking raw DFT output to `f^`.
fn spectral_factor(grid: &Grid, p: usize) -> f64 {
    let m = grid.points();
    let mag = (grid.spacing() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.dim() as i32);
    let parity = if grid.dim() == 1 { p % 2 } else { (p / m + p % m) % 2 };
    if parity == 0 {
        mag
    } else {
        -mag
    }
}

/// Unitary Fourier transform; Parseval holds exactly on the grid.
pub fn forward_transform(f: &Field) -> SpectralField {
    let n = f.grid.components();
    let mut modes = raw_modes(f);
    for (p, chunk) in modes.chunks_mut(n).enumerate() {
        let s = spectral_factor(&f.grid, p);
        chunk.iter_mut().for_each(|z| *z *= s);
    }
    SpectralField { grid: f.grid.clone(), values: modes, time: f.time }
}

pub fn inverse_transform(s: &SpectralField) -> Field {
    let n = s.grid.components();
    let mut modes = s.values.clone();
    for (p, chunk) in modes.chunks_mut(n).enumerate() {
        let k = 1.0 / spectral_factor(&s.grid, p);
        chunk.iter_mut().for_each(|z| *z *= k);
    }
    from_raw_modes(&s.grid, modes, s.time)
}

/// `(f, g) = integral of sum_c f_c conj(g_c)` by the periodic trapezoid rule.
pub fn inner_product(f: &Field, g: &Field) -> Result<Complex64> {
    f.grid.check_same(&g.grid)?;
    let s: Complex64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.cell_volume())
}

pub fn l2_norm(f: &Field) -> f64 {
    let s: f64 = f.values.iter().map(|z| z.norm_sqr()).sum();
    (s * f.grid.cell_volume()).sqrt()
}

/// Real weight `w(x) = exp(log_w(x))`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightProfile {
    /// `exp(gamma |x|^2)`.
    Gaussian { gamma: f64 },
    /// Arbitrary log-weight sampled at every grid point.
    Log(Vec<f64>),
}

impl WeightProfile {
    fn log_at(&self, grid: &Grid, p: usize) -> f64 {
        match self {
            WeightProfile::Gaussian { gamma } => gamma * grid.radius_sq(p),
            WeightProfile::Log(v) => v[p],
        }
    }
}

/// `log ||w f||`, with the boundary-shell check at tolerance `tol`.
///
/// Returns `-inf` for the zero field. Works entirely in log space, so weights
/// far beyond the floating-point range are fine as long as the product is.
pub fn weighted_log_norm(f: &Field, w: &WeightProfile, tol: Option<f64>) -> Result<f64> {
    let grid = &f.grid;
    if let WeightProfile::Log(v) = w {
        if v.len() != grid.total_points() {
            return Err(Error::ShapeMismatch("log-weight length".into()));
        }
    }
    let dens = f.pointwise_norm_sq();
    let max_u = dens.iter().cloned().fold(0.0, f64::max);
    if max_u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let logs: Vec<f64> = dens
        .iter()
        .enumerate()
        .map(|(p, &d)| if d > 0.0 { 2.0 * w.log_at(grid, p) + d.ln() } else { f64::NEG_INFINITY })
        .collect();
    let lmax = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lmax.is_finite() {
        return Err(Error::NonFinite("weighted integrand".into()));
    }
    if let Some(tol) = tol {
        let mut edge_u: f64 = 0.0;
        let mut edge_w = f64::NEG_INFINITY;
        for p in (0..grid.total_points()).filter(|&p| grid.is_outer_shell(p)) {
            edge_u = edge_u.max(dens[p]);
            edge_w = edge_w.max(logs[p]);
        }
        let ratio = (edge_u / max_u).max((edge_w - lmax).exp());
        if ratio > tol {
            return Err(Error::TailNotResolved { ratio, tol });
        }
    }
    let s: f64 = logs.iter().map(|&l| (l - lmax).exp()).sum();
    Ok(0.5 * (lmax + (s * grid.cell_volume()).ln()))
}

/// `||w f||` with the default boundary-shell check.
pub fn weighted_l2_norm(f: &Field, w: &WeightProfile) -> Result<f64> {
    let l = weighted_log_norm(f, w, Some(DEFAULT_TAIL_TOL))?;
    let v = l.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("weighted norm overflows; use weighted_log_norm".into()))
    }
}

/// Spectral partial derivative along `axis` (Nyquist mode zeroed).
pub fn partial(f: &Field, axis: usize) -> Field {
    let grid = f.grid.clone();
    let m = grid.points();
    let i = Complex64::i();
    apply_multiplier(f, |p| {
        let idx = if grid.dim() == 1 {
            p
        } else if axis == 0 {
            p / m
        } else {
            p % m
        };
        if idx == m / 2 {
            ZERO
        } else {
            i * grid.axis_freqs()[idx]
        }
    })
}

/// Spectral gradient, one field per axis.
pub fn gradient(f: &Field) -> Vec<Field> {
    (0..f.grid.dim()).map(|a| partial(f, a)).collect()
}

/// Spectral Laplacian.
pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid.clone();
    apply_multiplier(f, |p| Complex64::new(-grid.freq_sq(p), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn gauss(grid: &Grid) -> Field {
        Field::from_fn(grid, |x, _| Complex64::new((-x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, 64, 1.0, 1).is_err());
        assert!(Grid::new(1, 48, 1.0, 1).is_err());
        assert!(Grid::new(1, 4, 1.0, 1).is_err());
        assert!(Grid::new(1, 64, 0.0, 1).is_err());
        assert!(Grid::new(1, 64, 1.0, 17).is_err());
        assert!(Grid::new(2, 8, 1.0, 16).is_ok());
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let grid = Grid::new(1, 256, 16.0, 1).unwrap();
        let s = forward_transform(&gauss(&grid));
        for p in 0..grid.total_points() {
            let xi = grid.mode_freq(p)[0];
            let exact = (-xi * xi / 4.0).exp() / 2f64.sqrt();
            assert!((s.at(p)[0] - exact).norm() < 1e-10, "xi = {xi}");
        }
    }

    #[test]
    fn gaussian_transform_2d() {
        let grid = Grid::new(2, 64, 8.0, 1).unwrap();
        let s = forward_transform(&gauss(&grid));
        for p in 0..grid.total_points() {
            let exact = (-grid.freq_sq(p) / 4.0).exp() / 2.0;
            assert!((s.at(p)[0] - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn gaussian_norms() {
        let grid = Grid::new(1, 256, 16.0, 1).unwrap();
        let f = gauss(&grid);
        assert!((l2_norm(&f) - (PI / 2.0).powf(0.25)).abs() < 1e-12);
        let w = weighted_l2_norm(&f, &WeightProfile::Gaussian { gamma: 0.25 }).unwrap();
        assert!((w - (PI / 1.5).powf(0.25)).abs() < 1e-12);
        let err = weighted_l2_norm(&f, &WeightProfile::Gaussian { gamma: 1.5 }).unwrap_err();
        assert!(matches!(err, Error::TailNotResolved { .. }));
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let grid = Grid::new(1, 64, 4.0, 3).unwrap();
        let f = Field::zeros(&grid);
        assert_eq!(l2_norm(&f), 0.0);
        assert_eq!(weighted_l2_norm(&f, &WeightProfile::Gaussian { gamma: 5.0 }).unwrap(), 0.0);
    }

    #[test]
    fn huge_weights_stay_finite_in_log_space() {
        let grid = Grid::new(1, 256, 16.0, 1).unwrap();
        let f = Field::from_fn(&grid, |x, _| Complex64::new((-20.0 * x[0] * x[0]).exp(), 0.0)).unwrap();
        let l = weighted_log_norm(&f, &WeightProfile::Gaussian { gamma: 19.0 }, Some(1e-10)).unwrap();
        let exact = 0.25 * (PI / 2.0).ln();
        assert!((l - exact).abs() < 1e-10);
    }

    #[test]
    fn gradient_of_gaussian() {
        let grid = Grid::new(2, 64, 8.0, 2).unwrap();
        let f = gauss(&grid);
        let g = gradient(&f);
        let lap = laplacian(&f);
        for p in 0..grid.total_points() {
            let x = grid.coords(p);
            let e = (-(x[0] * x[0] + x[1] * x[1])).exp();
            for c in 0..2 {
                assert!((g[0].at(p)[c].re + 2.0 * x[0] * e).abs() < 1e-9);
                assert!((g[1].at(p)[c].re + 2.0 * x[1] * e).abs() < 1e-9);
                let l = (4.0 * (x[0] * x[0] + x[1] * x[1]) - 4.0) * e;
                assert!((lap.at(p)[c].re - l).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn outer_shell() {
        let grid = Grid::new(2, 8, 1.0, 1).unwrap();
        let count = (0..64).filter(|&p| grid.is_outer_shell(p)).count();
        assert_eq!(count, 64 - 36);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn transform_round_trip_and_parseval(
            re in prop::collection::vec(-1.0f64..1.0, 128),
            im in prop::collection::vec(-1.0f64..1.0, 128),
            half_width in 1.0f64..20.0,
        ) {
            let grid = Grid::new(1, 64, half_width, 2).unwrap();
            let values: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            let f = Field::new(&grid, values, 0.0).unwrap();
            let s = forward_transform(&f);
            prop_assert!(inverse_transform(&s).sup_distance(&f).unwrap() < 1e-13);
            prop_assert!((s.l2_norm() - l2_norm(&f)).abs() < 1e-12 * l2_norm(&f).max(1.0));
        }
    }
}
