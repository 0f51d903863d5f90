//! Appell-type change of variables between weight pairs.
//!
//! For a solution `u(y, s)` on `[0, 1]`,
//!
//! ```text
//! u~(x, t) = (sqrt(ab)/rho(t))^(n/2) u(sqrt(ab) x / rho(t), b t / rho(t)) exp(phi(x, t)),
//! phi(x, t) = (a - b) |x|^2 / (4 (a_c + i b_c) rho(t)),   rho(t) = a (1 - t) + b t,
//! ```
//!
//! with `(a, b) = (alpha, beta)` and `(a_c, b_c)` the evolution
//! coefficients. Off-grid spatial samples come from exact evaluation of the
//! trigonometric interpolant (chirp-z), time samples from quintic
//! interpolation of the source trajectory.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l2_norm, laplacian, weighted_log_norm, Field, Grid, WeightProfile, DEFAULT_TAIL_TOL};
use crate::linalg::{self, CMatrix};
use crate::operators::{MatrixPotential, TimePotential};
use crate::propagator::{EvolutionCoefficients, Trajectory};
use crate::weights::WeightParams;

/// Minimum number of trajectory samples accepted as a time source.
pub const MIN_SOURCE_SAMPLES: usize = 256;
/// Amplitude allowed in the region that wraps around when stretching.
const WRAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppellMap {
    pub alpha: f64,
    pub beta: f64,
    pub coef: EvolutionCoefficients,
}

impl AppellMap {
    pub fn new(alpha: f64, beta: f64, coef: EvolutionCoefficients) -> Result<Self> {
        WeightParams::new(alpha, beta, 0.0)?;
        Ok(Self { alpha, beta, coef })
    }

    /// The map with `alpha` and `beta` exchanged.
    pub fn inverse(&self) -> Self {
        Self { alpha: self.beta, beta: self.alpha, coef: self.coef }
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.alpha * (1.0 - t) + self.beta * t
    }

    /// `s(t) = beta t / rho(t)`.
    pub fn time_map(&self, t: f64) -> f64 {
        self.beta * t / self.rho(t)
    }

    /// Spatial stretch `sqrt(alpha beta) / rho(t)`.
    pub fn scale(&self, t: f64) -> f64 {
        (self.alpha * self.beta).sqrt() / self.rho(t)
    }

    /// Coefficient `c` of `phi = c |x|^2`.
    pub fn phase_coefficient(&self, t: f64) -> Complex64 {
        Complex64::new(self.alpha - self.beta, 0.0) / (4.0 * self.coef.complex() * self.rho(t))
    }

    /// `ds/dt = alpha beta / rho(t)^2`.
    pub fn time_derivative(&self, t: f64) -> f64 {
        self.alpha * self.beta / self.rho(t).powi(2)
    }
}

/// Evaluates `f(scale * x)` on the grid of `f`.
pub struct Resampler {
    planner: FftPlanner<f64>,
}

impl Default for Resampler {
    fn default() -> Self {
        Self { planner: FftPlanner::new() }
    }
}

impl Resampler {
    pub fn resample(&mut self, f: &Field, scale: f64) -> Result<Field> {
        let grid = f.grid().clone();
        self.resample_onto(f, scale, &grid)
    }

    /// Evaluates `f(scale * x)` at the nodes `x` of `target`, a grid with the
    /// same shape as that of `f` but possibly a different half-width.
    pub fn resample_onto(&mut self, f: &Field, scale: f64, target: &Grid) -> Result<Field> {
        let grid = f.grid().clone();
        if target.dim() != grid.dim() || target.points() != grid.points() || target.components() != grid.components() {
            return Err(Error::GridMismatch);
        }
        let scale = scale * target.half_width() / grid.half_width();
        if !(scale > 0.0 && scale < 2.0) {
            return Err(Error::ScaleOutOfBox(scale));
        }
        if scale > 1.0 {
            let edge = (2.0 - scale) * grid.half_width();
            let max = f.max_abs();
            let d = grid.dim();
            for p in 0..grid.total_points() {
                let x = grid.coords(p);
                if x[..d].iter().any(|v| v.abs() >= edge) && f.at(p).iter().any(|z| z.norm() > WRAP_TOL * max) {
                    return Err(Error::ScaleOutOfBox(scale));
                }
            }
        }
        if scale == 1.0 {
            return Field::new(target, f.values().to_vec(), f.time());
        }
        let m = grid.points();
        let nc = grid.components();
        let kernel = ChirpZ::new(&mut self.planner, m, scale);
        let mut out = f.values().to_vec();
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let lines_per_axis = grid.total_points() / m;
        for axis in 0..grid.dim() {
            for c in 0..nc {
                for l in 0..lines_per_axis {
                    let idx = |j: usize| {
                        let p = if grid.dim() == 1 {
                            j
                        } else if axis == 0 {
                            j * m + l
                        } else {
                            l * m + j
                        };
                        p * nc + c
                    };
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = out[idx(j)];
                    }
                    kernel.apply(&mut line);
                    for (j, v) in line.iter().enumerate() {
                        out[idx(j)] = *v;
                    }
                }
            }
        }
        Field::new(target, out, f.time())
    }
}

/// Bluestein evaluation of the periodic interpolant at `scale * x_m`.
struct ChirpZ {
    m: usize,
    scale: f64,
    fwd_m: Arc<dyn rustfft::Fft<f64>>,
    fwd_p: Arc<dyn rustfft::Fft<f64>>,
    inv_p: Arc<dyn rustfft::Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

impl ChirpZ {
    fn new(planner: &mut FftPlanner<f64>, m: usize, scale: f64) -> Self {
        let p = 2 * m;
        let fwd_p = planner.plan_fft_forward(p);
        let mut kernel = vec![Complex64::new(0.0, 0.0); p];
        let half = (m / 2) as f64;
        for q in -(m as i64 - 1)..(m as i64) {
            let d = q as f64 + half;
            kernel[q.rem_euclid(p as i64) as usize] = chirp(d, scale, m).conj();
        }
        fwd_p.process(&mut kernel);
        Self {
            m,
            scale,
            fwd_m: planner.plan_fft_forward(m),
            fwd_p,
            inv_p: planner.plan_fft_inverse(p),
            kernel_hat: kernel,
        }
    }

    fn apply(&self, line: &mut [Complex64]) {
        let m = self.m;
        let p = 2 * m;
        self.fwd_m.process(line);
        let mut a = vec![Complex64::new(0.0, 0.0); p];
        for (kp, slot) in a.iter_mut().take(m).enumerate() {
            let k = kp as i64 - (m / 2) as i64;
            let coeff = line[k.rem_euclid(m as i64) as usize] / m as f64;
            let shift = Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 * (1.0 - self.scale));
            *slot = coeff * shift * chirp(k as f64, self.scale, m);
        }
        self.fwd_p.process(&mut a);
        for (x, h) in a.iter_mut().zip(&self.kernel_hat) {
            *x *= h;
        }
        self.inv_p.process(&mut a);
        for (j, v) in line.iter_mut().enumerate() {
            *v = a[j] / p as f64 * chirp(j as f64, self.scale, m);
        }
    }
}

/// `w^(x^2/2)` with `w = exp(2 pi i scale / M)`.
fn chirp(x: f64, scale: f64, m: usize) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::PI * scale * x * x / m as f64)
}

/// Transformed field at time `t` from a source trajectory on `[0, 1]`.
pub fn appell_forward(src: &Trajectory, map: &AppellMap, t: f64) -> Result<Field> {
    let mut rs = Resampler::default();
    forward_with(&mut rs, src, map, t, None)
}

fn forward_with(rs: &mut Resampler, src: &Trajectory, map: &AppellMap, t: f64, target: Option<&Grid>) -> Result<Field> {
    if src.len() < MIN_SOURCE_SAMPLES {
        return Err(Error::Unresolved(format!("{} source samples, at least {MIN_SOURCE_SAMPLES} required", src.len())));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange { t, lo: 0.0, hi: 1.0 });
    }
    let u = src.field_at(map.time_map(t))?;
    let scale = map.scale(t);
    let r = rs.resample_onto(&u, scale, target.unwrap_or(src.grid()))?;
    let grid = r.grid().clone();
    let amp = scale.powf(grid.dim() as f64 / 2.0);
    let c = map.phase_coefficient(t);
    Ok(r.mul_pointwise(|p| amp * (c * grid.radius_sq(p)).exp()).with_time(t))
}

/// Transformed trajectory sampled at `times`.
pub fn appell_trajectory(src: &Trajectory, map: &AppellMap, times: &[f64]) -> Result<Trajectory> {
    let mut rs = Resampler::default();
    let fields = times.iter().map(|&t| forward_with(&mut rs, src, map, t, None)).collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), fields)
}

/// `n` equispaced times covering `[0, 1]`.
pub fn unit_times(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// `V~(x, t) = alpha beta rho^-2 V(sqrt(alpha beta) x / rho, beta t / rho)`;
/// a constant matrix potential transforms the same way and is folded in.
pub fn appell_potential(v: &TimePotential, a: &MatrixPotential, map: &AppellMap) -> Result<TimePotential> {
    let am = a.constant_matrix().ok_or(Error::NonConstantPotential)?;
    let am = linalg::to_complex(am);
    let map = *map;
    let v = v.clone();
    let f = move |x: &[f64], t: f64| -> CMatrix {
        let scale = map.scale(t);
        let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
        (v.eval(&y, map.time_map(t)) + &am) * Complex64::new(map.time_derivative(t), 0.0)
    };
    Ok(TimePotential::zero(a.grid()).with_dynamic(Arc::new(f)))
}

/// `w(y, s) = conj(u(y, 1 - s))`, resampled onto the same time lattice.
pub fn reverse_conjugate(src: &Trajectory) -> Result<Trajectory> {
    let (t0, t1) = (src.t_start(), src.t_end());
    let times: Vec<f64> = src.times.iter().rev().map(|&t| t0 + t1 - t).collect();
    let fields = src.fields.iter().rev().zip(&times).map(|(f, &t)| f.conj().with_time(t)).collect();
    Trajectory::new(times, fields)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// Largest relative gap `| ||u~(t)|| - ||u(s(t))|| | / ||u(s(t))||`.
    pub max_gap: f64,
}

/// Unweighted norm identity (exact for `a = 0`).
pub fn unweighted_identity(src: &Trajectory, map: &AppellMap, times: &[f64]) -> Result<IdentityReport> {
    let mut rs = Resampler::default();
    let mut max_gap: f64 = 0.0;
    for &t in times {
        let ut = forward_with(&mut rs, src, map, t, None)?;
        let us = src.field_at(map.time_map(t))?;
        let n = l2_norm(&us);
        max_gap = max_gap.max((l2_norm(&ut) - n).abs() / n.max(1e-300));
    }
    Ok(IdentityReport { max_gap })
}

/// One candidate exponent convention for the weighted identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionGap {
    pub name: String,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedIdentityReport {
    pub gamma: f64,
    pub candidates: Vec<ConventionGap>,
    pub winner: String,
    pub winner_gap: f64,
    /// Gap for the coefficient `(gamma rho^2 + (alpha-beta) a rho/(4 kappa^2)) / (alpha beta)`.
    pub exact_gap: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Compares `||exp(gamma |x|^2) u~(t)||` with `||exp(c |y|^2) u(s)||` for
/// several candidate coefficients `c`; times where either side is not
/// resolved are skipped. With `window = Some(w)` both sides are resampled
/// onto `[-w, w)` first, which keeps the weight from amplifying roundoff in
/// the far field.
pub fn weighted_identity(
    src: &Trajectory,
    map: &AppellMap,
    gamma: f64,
    times: &[f64],
    window: Option<f64>,
) -> Result<WeightedIdentityReport> {
    let src_grid = src.grid();
    let target = match window {
        Some(w) => Grid::new(src_grid.dim(), src_grid.points(), w, src_grid.components())?,
        None => src_grid.clone(),
    };
    let w = WeightParams::new(map.alpha, map.beta, gamma)?;
    let k2 = map.coef.a.powi(2) + map.coef.b.powi(2);
    type Coef = Box<dyn Fn(f64, f64) -> f64>;
    let candidates: Vec<(&str, Coef)> = vec![
        ("mu^2(t)", Box::new(move |t, _s| w.mu(t).powi(2))),
        ("mu^-2(t)", Box::new(move |t, _s| w.mu(t).powi(-2))),
        ("mu^2(s)", Box::new(move |_t, s| w.mu(s).powi(2))),
        ("mu^-2(s)", Box::new(move |_t, s| w.mu(s).powi(-2))),
    ];
    let m = *map;
    let exact = move |t: f64| {
        let r = m.rho(t);
        (gamma * r * r + (m.alpha - m.beta) * m.coef.a * r / (4.0 * k2)) / (m.alpha * m.beta)
    };
    let mut rs = Resampler::default();
    let mut gaps = vec![0.0f64; candidates.len()];
    let mut exact_gap: f64 = 0.0;
    let (mut evaluated, mut skipped) = (0, 0);
    let tol = Some(DEFAULT_TAIL_TOL);
    for &t in times {
        let s = map.time_map(t);
        let ut = forward_with(&mut rs, src, map, t, Some(&target))?;
        let us = rs.resample_onto(&src.field_at(s)?, 1.0, &target)?;
        let lhs = match weighted_log_norm(&ut, &WeightProfile::Gaussian { gamma }, tol) {
            Ok(v) => v,
            Err(Error::TailNotResolved { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let rhs_exact = match weighted_log_norm(&us, &WeightProfile::Gaussian { gamma: exact(t) }, tol) {
            Ok(v) => v,
            Err(Error::TailNotResolved { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        evaluated += 1;
        exact_gap = exact_gap.max(((lhs - rhs_exact).exp() - 1.0).abs());
        for (g, (_, c)) in gaps.iter_mut().zip(&candidates) {
            let gap = match weighted_log_norm(&us, &WeightProfile::Gaussian { gamma: c(t, s) }, tol) {
                Ok(r) => ((lhs - r).exp() - 1.0).abs(),
                Err(Error::TailNotResolved { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            *g = g.max(gap);
        }
    }
    let candidates: Vec<ConventionGap> = candidates
        .iter()
        .zip(&gaps)
        .map(|((name, _), &max_gap)| ConventionGap { name: name.to_string(), max_gap })
        .collect();
    let best = candidates
        .iter()
        .min_by(|a, b| a.max_gap.total_cmp(&b.max_gap))
        .cloned()
        .ok_or_else(|| Error::Unresolved("no candidates".into()))?;
    if evaluated == 0 {
        return Err(Error::Unresolved("no time sample resolved on the box".into()));
    }
    Ok(WeightedIdentityReport {
        gamma,
        winner: best.name,
        winner_gap: best.max_gap,
        candidates,
        exact_gap,
        evaluated,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: f64,
    /// `||residual|| / ||u~||`.
    pub relative: f64,
    /// `||residual|| / (||d_t u~|| + ||(a+ib) lap u~||)`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub max_relative: f64,
}

/// Residual of `d_t u~ = (a+ib)(lap u~ + V~ u~)` on `n_times` equispaced
/// times, with a fourth-order centred time difference.
pub fn appell_pde_residual(
    src: &Trajectory,
    map: &AppellMap,
    a: &MatrixPotential,
    v: &TimePotential,
    n_times: usize,
) -> Result<ResidualReport> {
    if n_times < 5 {
        return Err(Error::Unresolved("residual needs at least five time samples".into()));
    }
    let vt = appell_potential(v, a, map)?;
    let times = unit_times(n_times);
    let dt = times[1] - times[0];
    let tr = appell_trajectory(src, map, &times)?;
    let c = map.coef.complex();
    let mut rows = Vec::with_capacity(n_times - 4);
    for k in 2..n_times - 2 {
        let f = &tr.fields;
        let mut d = f[k - 2].sub(&f[k + 2])?;
        d.axpy(Complex64::new(8.0, 0.0), &f[k + 1])?;
        d.axpy(Complex64::new(-8.0, 0.0), &f[k - 1])?;
        let d = d.scale(Complex64::new(1.0 / (12.0 * dt), 0.0));
        let lap = laplacian(&f[k]).scale(c);
        let pot = vt.apply(&f[k], times[k])?.scale(c);
        let r = d.sub(&lap)?.sub(&pot)?;
        let rn = l2_norm(&r);
        let denom = l2_norm(&d) + l2_norm(&lap);
        rows.push(ResidualRow {
            t: times[k],
            relative: rn / l2_norm(&f[k]).max(1e-300),
            scaled: rn / denom.max(1e-300),
        });
    }
    let max_relative = rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    Ok(ResidualReport { rows, max_relative })
}

/// Grid helper for tests and scenarios: stretch factor range over `[0, 1]`.
pub fn scale_range(map: &AppellMap) -> (f64, f64) {
    let (a, b) = (map.scale(0.0), map.scale(1.0));
    (a.min(b), a.max(b))
}
