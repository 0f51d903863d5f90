//! Time evolution of `d_t u = (a + ib) [lap u + A u + V u + F]`.
//!
//! Three integrators share the same conventions: the exact per-mode
//! propagator for constant `A`, second-order Strang splitting for general
//! `A(x)` and `V(x, t)`, and a fixed-point solver for the Duhamel integral.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{from_raw_modes, l2_norm, raw_modes, Field, Grid};
use crate::linalg::{self, CMatrix};
use crate::operators::{MatrixPotential, TimePotential};

/// Coefficients `(a, b)` of the generator, with `a >= 0` and `(a, b) != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionCoefficients {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Schroedinger,
    Parabolic,
    Mixed,
}

impl EvolutionCoefficients {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a < 0.0 || (a == 0.0 && b == 0.0) {
            return Err(Error::InvalidCoefficients(format!("a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    pub fn schroedinger() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn heat() -> Self {
        Self { a: 1.0, b: 0.0 }
    }

    /// `a + ib`.
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.a, self.b)
    }

    /// `sqrt(a^2 + b^2)`.
    pub fn kappa(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn regime(&self) -> Regime {
        if self.a == 0.0 {
            Regime::Schroedinger
        } else if self.b == 0.0 {
            Regime::Parabolic
        } else {
            Regime::Mixed
        }
    }

    fn check_direction(&self, t: f64) -> Result<()> {
        if self.a > 0.0 && t < 0.0 {
            return Err(Error::BackwardParabolic);
        }
        Ok(())
    }
}

/// Exact solution for constant `A`, `V = 0`, `F = 0`:
/// `u^(xi, t) = exp(t (a+ib) (A - |xi|^2)) u^(xi, 0)`.
pub fn free_propagate(f: &Field, a: &MatrixPotential, coef: EvolutionCoefficients, t: f64) -> Result<Field> {
    coef.check_direction(t)?;
    a.grid().check_same(f.grid())?;
    let am = a.constant_matrix().ok_or(Error::NonConstantPotential)?;
    let grid = f.grid().clone();
    let n = grid.components();
    let c = coef.complex() * t;
    if a.is_zero() {
        let mut modes = raw_modes(f);
        for (p, chunk) in modes.chunks_mut(n).enumerate() {
            let s = (-c * grid.freq_sq(p)).exp();
            chunk.iter_mut().for_each(|z| *z *= s);
        }
        return Ok(from_raw_modes(&grid, modes, f.time() + t));
    }
    let eig = SymmetricEigen::new(am.clone());
    let q = linalg::to_complex(&eig.eigenvectors);
    let qt = linalg::to_flat(&q.adjoint());
    let qf = linalg::to_flat(&q);
    let mut g = f.clone();
    for chunk in g.values_mut().chunks_mut(n) {
        linalg::matvec_in_place(&qt, chunk);
    }
    let mut modes = raw_modes(&g);
    for (p, chunk) in modes.chunks_mut(n).enumerate() {
        let k2 = grid.freq_sq(p);
        for (j, z) in chunk.iter_mut().enumerate() {
            *z *= (c * (eig.eigenvalues[j] - k2)).exp();
        }
    }
    let mut out = from_raw_modes(&grid, modes, f.time() + t);
    for chunk in out.values_mut().chunks_mut(n) {
        linalg::matvec_in_place(&qf, chunk);
    }
    Ok(out)
}

/// Time-dependent forcing `F(., t)`.
pub type Forcing = Arc<dyn Fn(f64) -> Field + Send + Sync>;

/// Strang splitting with a fixed step, caching everything that does not
/// depend on time.
pub struct StrangStepper {
    grid: Grid,
    coef: EvolutionCoefficients,
    dt: f64,
    kinetic: Vec<Complex64>,
    a: MatrixPotential,
    v: TimePotential,
    cached_half: Option<Vec<Complex64>>,
    skip_pointwise: bool,
}

impl StrangStepper {
    pub fn new(a: &MatrixPotential, v: &TimePotential, coef: EvolutionCoefficients, dt: f64) -> Result<Self> {
        coef.check_direction(dt)?;
        a.grid().check_same(v.grid())?;
        let grid = a.grid().clone();
        let c = coef.complex() * dt;
        let kinetic = (0..grid.total_points()).map(|p| (-c * grid.freq_sq(p)).exp()).collect();
        let skip_pointwise = a.is_zero() && v.is_zero();
        let mut s = Self { grid, coef, dt, kinetic, a: a.clone(), v: v.clone(), cached_half: None, skip_pointwise };
        if !skip_pointwise && v.is_static() {
            let n2 = s.grid.components().pow(2);
            let mut cache = Vec::with_capacity(s.grid.total_points() * n2);
            for p in 0..s.grid.total_points() {
                cache.extend(s.half_matrix(p, 0.0));
            }
            s.cached_half = Some(cache);
        }
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn half_matrix(&self, p: usize, t_mid: f64) -> Vec<Complex64> {
        let m = linalg::to_complex(&self.a.matrix_at(p)) + self.v.at(p, t_mid);
        let h = self.coef.complex() * (0.5 * self.dt);
        if m.nrows() == 1 {
            return vec![(h * m[(0, 0)]).exp()];
        }
        linalg::to_flat(&linalg::exp_scaled(h, &m))
    }

    fn half_step(&self, u: &mut Field, t_mid: f64) {
        if self.skip_pointwise {
            return;
        }
        let n = self.grid.components();
        let n2 = n * n;
        match &self.cached_half {
            Some(cache) => {
                for (p, chunk) in u.values_mut().chunks_mut(n).enumerate() {
                    linalg::matvec_in_place(&cache[p * n2..(p + 1) * n2], chunk);
                }
            }
            None => {
                for p in 0..self.grid.total_points() {
                    let m = self.half_matrix(p, t_mid);
                    linalg::matvec_in_place(&m, u.at_mut(p));
                }
            }
        }
    }

    fn kinetic_step(&self, u: &Field) -> Field {
        let n = self.grid.components();
        let mut modes = raw_modes(u);
        for (chunk, k) in modes.chunks_mut(n).zip(&self.kinetic) {
            chunk.iter_mut().for_each(|z| *z *= k);
        }
        from_raw_modes(&self.grid, modes, u.time())
    }

    /// Advances the homogeneous equation from `t` to `t + dt`.
    pub fn step(&self, u: &Field, t: f64) -> Result<Field> {
        self.grid.check_same(u.grid())?;
        let t_mid = t + 0.5 * self.dt;
        let mut w = u.clone();
        self.half_step(&mut w, t_mid);
        let mut w = self.kinetic_step(&w);
        self.half_step(&mut w, t_mid);
        w.set_time(t + self.dt);
        Ok(w)
    }

    /// Step including forcing, by the trapezoid rule on the Duhamel term.
    pub fn step_forced(&self, u: &Field, t: f64, forcing: &Forcing) -> Result<Field> {
        let mut next = self.step(u, t)?;
        let f0 = self.step(&forcing(t), t)?;
        let f1 = forcing(t + self.dt);
        let w = self.coef.complex() * (0.5 * self.dt);
        next.axpy(w, &f0)?;
        next.axpy(w, &f1)?;
        Ok(next)
    }
}

/// One Strang step of size `dt` starting at time `t`.
pub fn strang_step(
    u: &Field,
    a: &MatrixPotential,
    v: &TimePotential,
    coef: EvolutionCoefficients,
    t: f64,
    dt: f64,
) -> Result<Field> {
    StrangStepper::new(a, v, coef, dt)?.step(u, t)
}

/// Power-law term `lambda |u|^(2 sigma) u` added inside the bracket of the
/// generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub lambda: f64,
    pub sigma: u32,
}

impl Nonlinearity {
    pub fn new(lambda: f64, sigma: u32) -> Result<Self> {
        if !(sigma == 1 || sigma == 2) {
            return Err(Error::UnsupportedNonlinearity(format!("sigma = {sigma}, expected 1 or 2")));
        }
        if !lambda.is_finite() {
            return Err(Error::UnsupportedNonlinearity("non-finite lambda".into()));
        }
        Ok(Self { lambda, sigma })
    }
}

/// Exact pointwise flow of `d_t u = (a+ib) lambda |u|^(2 sigma) u` over `tau`.
pub fn nonlinear_flow(u: &Field, nl: Nonlinearity, coef: EvolutionCoefficients, tau: f64) -> Result<Field> {
    let n = u.grid().components();
    let s = nl.sigma as i32;
    let mut out = u.clone();
    for chunk in out.values_mut().chunks_mut(n) {
        let q = chunk.iter().map(|z| z.norm_sqr()).sum::<f64>().powi(s);
        let factor = if coef.a == 0.0 {
            Complex64::from_polar(1.0, coef.b * nl.lambda * q * tau)
        } else {
            let k = 2.0 * s as f64 * coef.a;
            let denom = 1.0 - k * nl.lambda * q * tau;
            if denom <= 0.0 {
                return Err(Error::BlowUp);
            }
            let modulus = denom.powf(-1.0 / (2.0 * s as f64));
            Complex64::from_polar(modulus, -coef.b / k * denom.ln())
        };
        chunk.iter_mut().for_each(|z| *z *= factor);
    }
    Ok(out)
}

/// Strang step for the nonlinear problem: half nonlinear flow, linear
/// Strang step, half nonlinear flow.
pub fn nonlinear_step(
    u: &Field,
    a: &MatrixPotential,
    v: &TimePotential,
    nl: Nonlinearity,
    coef: EvolutionCoefficients,
    t: f64,
    dt: f64,
) -> Result<Field> {
    let w = nonlinear_flow(u, nl, coef, 0.5 * dt)?;
    let w = strang_step(&w, a, v, coef, t, dt)?;
    let mut w = nonlinear_flow(&w, nl, coef, 0.5 * dt)?;
    w.set_time(t + dt);
    Ok(w)
}

/// Samples of a solution at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<Field>) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::ShapeMismatch("trajectory times and fields".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("trajectory times must increase".into()));
        }
        for f in &fields[1..] {
            fields[0].grid().check_same(f.grid())?;
        }
        Ok(Self { times, fields })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }
    pub fn first(&self) -> &Field {
        &self.fields[0]
    }
    pub fn last(&self) -> &Field {
        &self.fields[self.fields.len() - 1]
    }
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }
    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Field at time `t` by six-point Lagrange interpolation in time.
    pub fn field_at(&self, t: f64) -> Result<Field> {
        let (lo, hi) = (self.t_start(), self.t_end());
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if t < lo - slack || t > hi + slack {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        if let Some(k) = self.times.iter().position(|&s| (s - t).abs() <= slack) {
            return Ok(self.fields[k].clone().with_time(t));
        }
        let n = self.len();
        if n < 6 {
            return Err(Error::Unresolved(format!("{n} time samples, interpolation needs 6")));
        }
        let j = self.times.partition_point(|&s| s < t);
        let start = j.saturating_sub(3).min(n - 6);
        let nodes = &self.times[start..start + 6];
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid().len()];
        for (i, &ti) in nodes.iter().enumerate() {
            let w: f64 =
                nodes.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &tk)| (t - tk) / (ti - tk)).product();
            for (o, v) in out.iter_mut().zip(self.fields[start + i].values()) {
                *o += v * w;
            }
        }
        Ok(Field::from_raw(self.grid(), out, t))
    }
}

/// `(t, ||u(t)||)` for every sample.
pub fn mass_trace(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times.iter().zip(&traj.fields).map(|(&t, f)| (t, l2_norm(f))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Per-mode exponential; constant `A`, no potential or forcing.
    Exact,
    Strang,
    Duhamel,
}

/// Integration settings for [`evolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub coef: EvolutionCoefficients,
    pub t0: f64,
    pub t_final: f64,
    pub steps: usize,
    /// Number of stored samples including both endpoints; `samples - 1`
    /// must divide `steps`.
    pub samples: usize,
    pub method: Method,
    pub nonlinearity: Option<Nonlinearity>,
    pub picard_iters: usize,
    pub duhamel_tol: f64,
}

impl EvolutionPlan {
    pub fn new(coef: EvolutionCoefficients, t_final: f64, steps: usize, method: Method) -> Self {
        Self {
            coef,
            t0: 0.0,
            t_final,
            steps,
            samples: steps + 1,
            method,
            nonlinearity: None,
            picard_iters: 8,
            duhamel_tol: 1e-10,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.samples < 2 || !self.steps.is_multiple_of(self.samples - 1) {
            return Err(Error::InvalidParameter(format!(
                "steps {} must be a positive multiple of samples - 1 = {}",
                self.steps,
                self.samples.saturating_sub(1)
            )));
        }
        if !(self.t_final.is_finite() && self.t0.is_finite()) || self.t_final == self.t0 {
            return Err(Error::InvalidParameter("empty time interval".into()));
        }
        self.coef.check_direction(self.t_final - self.t0)
    }
}

/// Integrates `u0` according to `plan`.
pub fn evolve(
    plan: &EvolutionPlan,
    u0: &Field,
    a: &MatrixPotential,
    v: &TimePotential,
    forcing: Option<&Forcing>,
) -> Result<Trajectory> {
    plan.validate()?;
    let dt = (plan.t_final - plan.t0) / plan.steps as f64;
    let stride = plan.steps / (plan.samples - 1);
    let sample_time = |k: usize| plan.t0 + (k * stride) as f64 * dt;
    let u0 = u0.clone().with_time(plan.t0);
    match plan.method {
        Method::Exact => {
            if !v.is_zero() || forcing.is_some() || plan.nonlinearity.is_some() {
                return Err(Error::InvalidParameter(
                    "exact propagation supports neither potentials, forcing nor nonlinearity".into(),
                ));
            }
            let mut times = Vec::with_capacity(plan.samples);
            let mut fields = Vec::with_capacity(plan.samples);
            for k in 0..plan.samples {
                let t = sample_time(k);
                times.push(t);
                fields.push(free_propagate(&u0, a, plan.coef, t - plan.t0)?.with_time(t));
            }
            Trajectory::new(times, fields)
        }
        Method::Strang => {
            let stepper = StrangStepper::new(a, v, plan.coef, dt)?;
            let mut times = vec![plan.t0];
            let mut fields = vec![u0.clone()];
            let mut u = u0;
            for s in 0..plan.steps {
                let t = plan.t0 + s as f64 * dt;
                u = match (plan.nonlinearity, forcing) {
                    (Some(nl), None) => {
                        let w = nonlinear_flow(&u, nl, plan.coef, 0.5 * dt)?;
                        let w = stepper.step(&w, t)?;
                        nonlinear_flow(&w, nl, plan.coef, 0.5 * dt)?
                    }
                    (None, Some(f)) => stepper.step_forced(&u, t, f)?,
                    (None, None) => stepper.step(&u, t)?,
                    (Some(_), Some(_)) => return Err(Error::InvalidParameter("forcing with nonlinearity".into())),
                };
                if (s + 1) % stride == 0 {
                    let tk = sample_time((s + 1) / stride);
                    u.set_time(tk);
                    times.push(tk);
                    fields.push(u.clone());
                }
            }
            Trajectory::new(times, fields)
        }
        Method::Duhamel => {
            if forcing.is_some() || plan.nonlinearity.is_some() {
                return Err(Error::InvalidParameter("Duhamel solver takes no forcing or nonlinearity".into()));
            }
            let full = duhamel_evolve(
                &u0,
                a,
                v,
                plan.coef,
                plan.t_final - plan.t0,
                plan.steps,
                plan.picard_iters,
                plan.duhamel_tol,
            )?;
            let times: Vec<f64> = (0..plan.samples).map(sample_time).collect();
            let fields = (0..plan.samples).map(|k| full.fields[k * stride].clone().with_time(sample_time(k))).collect();
            Trajectory::new(times, fields)
        }
    }
}

/// Solves `u(t) = H(t) u0 + (a+ib) int_0^t H(t-s) V(s) u(s) ds` with
/// `H(t) = exp(t (a+ib)(lap + A))`, trapezoid rule in time.
///
/// Each sweep marches forward through the time lattice using the freshest
/// values; only the implicit endpoint term lags one sweep behind.
#[allow(clippy::too_many_arguments)]
pub fn duhamel_evolve(
    u0: &Field,
    a: &MatrixPotential,
    v: &TimePotential,
    coef: EvolutionCoefficients,
    t_final: f64,
    steps: usize,
    picard_iters: usize,
    tol: f64,
) -> Result<Trajectory> {
    coef.check_direction(t_final)?;
    if steps == 0 || picard_iters == 0 {
        return Err(Error::InvalidParameter("steps and picard_iters must be positive".into()));
    }
    let t0 = u0.time();
    let dt = t_final / steps as f64;
    let c = coef.complex();
    let free: Vec<Field> = (0..=steps).map(|k| free_propagate(u0, a, coef, k as f64 * dt)).collect::<Result<_>>()?;
    let mut u = free.clone();
    let g0 = v.apply(u0, t0)?;
    let mut gap = f64::INFINITY;
    for _ in 0..picard_iters {
        gap = 0.0;
        let mut acc = g0.scale(Complex64::new(0.5, 0.0));
        for k in 1..=steps {
            let tk = t0 + k as f64 * dt;
            let pre = free_propagate(&acc, a, coef, dt)?;
            let g_old = v.apply(&u[k], tk)?;
            let mut new = free[k].clone();
            new.axpy(c * dt, &pre)?;
            new.axpy(c * (0.5 * dt), &g_old)?;
            let scale = l2_norm(&new).max(1e-300);
            gap = f64::max(gap, l2_norm(&new.sub(&u[k])?) / scale);
            let g_new = v.apply(&new, tk)?;
            acc = pre.add(&g_new)?;
            u[k] = new.with_time(tk);
        }
        if gap <= tol {
            break;
        }
    }
    if gap > tol {
        return Err(Error::NonConvergence { gap, tol });
    }
    let times = (0..=steps).map(|k| t0 + k as f64 * dt).collect();
    Trajectory::new(times, u)
}

/// Constant complex potential helper, `c * I`.
pub fn scalar_potential(grid: &Grid, c: Complex64) -> Result<TimePotential> {
    let n = grid.components();
    TimePotential::zero(grid).with_static(move |_| CMatrix::identity(n, n) * c)
}
