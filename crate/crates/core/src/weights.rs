//! Gaussian weight schedules and the weighted-norm diagnostics built on
//! them: log-convexity traces, the interpolation bound, the dissipative
//! decay estimate and Gaussian envelope fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{forward_transform, gradient, weighted_log_norm, Field, Grid, WeightProfile, DEFAULT_TAIL_TOL};
use crate::linalg;
use crate::operators::{SkDecomposition, TimePotential};
use crate::propagator::{EvolutionCoefficients, Forcing, Trajectory};

/// Endpoint Gaussian widths `alpha`, `beta` and conjugation strength `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl WeightParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}, beta = {beta} must be positive")));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// `mu(t) = alpha t + beta (1 - t)`.
    pub fn mu(&self, t: f64) -> f64 {
        self.alpha * t + self.beta * (1.0 - t)
    }

    /// `rho(t) = alpha (1 - t) + beta t`.
    pub fn rho(&self, t: f64) -> f64 {
        self.alpha * (1.0 - t) + self.beta * t
    }

    /// `nu(s) = gamma alpha beta rho(s)^2 + (alpha - beta) a rho(s) / (4 (a^2 + b^2))`.
    pub fn nu(&self, s: f64, coef: EvolutionCoefficients) -> f64 {
        let r = self.rho(s);
        let k2 = coef.a * coef.a + coef.b * coef.b;
        self.gamma * self.alpha * self.beta * r * r + (self.alpha - self.beta) * coef.a * r / (4.0 * k2)
    }

    /// Inside the region `alpha beta < 2` where only the zero solution has
    /// both endpoint norms finite.
    pub fn product_flag(&self) -> bool {
        self.alpha * self.beta < 2.0
    }
}

/// One sample of the log-convexity trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityRow {
    pub t: f64,
    /// `Q = ||exp(gamma |x|^2) u||^2`.
    pub q: f64,
    /// `D = (S f, f)` with `f = exp(gamma |x|^2) u`.
    pub d: f64,
    /// `N = D / Q`.
    pub n: f64,
    /// Finite-difference estimate of `(log Q)''`; absent at the endpoints.
    pub d2_log_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityTrace {
    pub gamma: f64,
    pub rows: Vec<ConvexityRow>,
    /// Smallest interior `log Q_{k+1} - 2 log Q_k + log Q_{k-1}`.
    pub min_second_difference: f64,
    pub max_abs_log_q: f64,
    /// Smallest `e` with `Q(t) <= exp(e) Q(0)^(1-s) Q(1)^s`, `s` the
    /// normalised time.
    pub slack: f64,
}

impl ConvexityTrace {
    /// Second differences stay above `-tol * max |log Q|`.
    pub fn is_convex(&self, tol: f64) -> bool {
        self.min_second_difference >= -tol * self.max_abs_log_q
    }
}

/// `Q`, `D`, `N` and convexity diagnostics along a trajectory.
pub fn q_trace(traj: &Trajectory, dec: &SkDecomposition) -> Result<ConvexityTrace> {
    let gamma = dec.gamma();
    let w = WeightProfile::Gaussian { gamma };
    let mut log_q = Vec::with_capacity(traj.len());
    let mut rows = Vec::with_capacity(traj.len());
    for (&t, u) in traj.times.iter().zip(&traj.fields) {
        let l = weighted_log_norm(u, &w, Some(DEFAULT_TAIL_TOL))?;
        if !l.is_finite() {
            return Err(Error::InvalidParameter("zero field in convexity trace".into()));
        }
        let grid = u.grid().clone();
        let f = u.mul_pointwise(|p| Complex64::new((gamma * grid.radius_sq(p) - l).exp(), 0.0));
        let n = crate::field::inner_product(&dec.apply_s(&f)?, &f)?.re;
        let q = (2.0 * l).exp();
        log_q.push(2.0 * l);
        rows.push(ConvexityRow { t, q, d: n * q, n, d2_log_q: None });
    }
    let times = &traj.times;
    let mut min_second = f64::INFINITY;
    for k in 1..times.len().saturating_sub(1) {
        let (h0, h1) = (times[k] - times[k - 1], times[k + 1] - times[k]);
        let second = log_q[k + 1] - 2.0 * log_q[k] + log_q[k - 1];
        min_second = min_second.min(second);
        let d2 = 2.0 * (h0 * log_q[k + 1] - (h0 + h1) * log_q[k] + h1 * log_q[k - 1]) / (h0 * h1 * (h0 + h1));
        rows[k].d2_log_q = Some(d2);
    }
    let (t0, t1) = (traj.t_start(), traj.t_end());
    let (l0, l1) = (log_q[0], log_q[log_q.len() - 1]);
    let slack = times
        .iter()
        .zip(&log_q)
        .map(|(&t, &l)| {
            let s = (t - t0) / (t1 - t0);
            l - ((1.0 - s) * l0 + s * l1)
        })
        .fold(0.0, f64::max);
    let max_abs_log_q = log_q.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(ConvexityTrace { gamma, rows, min_second_difference: min_second, max_abs_log_q, slack })
}

/// Per-sample values of the interpolation bound, all in log form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: f64,
    /// `(1/mu) log ||exp(|x|^2/mu^2) u(t)||`.
    pub lhs: f64,
    /// `beta (1-t) mu log ||exp(|x|^2/beta^2) u(0)|| + alpha t mu log ||exp(|x|^2/alpha^2) u(1)||`.
    pub rhs: f64,
    pub margin: f64,
    /// `log ||exp(|x|^2/mu^2) u(t)||`.
    pub lhs_standard: f64,
    /// `(1-t) log ||exp(|x|^2/beta^2) u(0)|| + t log ||exp(|x|^2/alpha^2) u(1)||`.
    pub rhs_standard: f64,
    pub margin_standard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationBoundReport {
    pub rows: Vec<BoundRow>,
    pub m1: f64,
    pub m2: f64,
    pub b_v2: f64,
    /// `M1 + M2 + M1^2 + M2^2`.
    pub constant: f64,
    /// Smallest `N` making the exponent-weighted bound hold; `None` when the
    /// potential vanishes and the bound fails without it.
    pub n_hat: Option<f64>,
    /// Largest standard-form violation, clipped at zero.
    pub standard_slack: f64,
    /// `log` of the time-integrated weighted gradient norm.
    pub gradient_lhs: f64,
    /// `log(||exp(|x|^2/beta^2) u(0)|| + ||exp(|x|^2/alpha^2) u(1)||)`.
    pub gradient_rhs: f64,
    pub gradient_n_hat: Option<f64>,
    pub pass: bool,
}

/// Settings for [`interpolation_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub bound_tol: f64,
    /// Multiple of the potential constant tolerated in the standard form.
    pub n_allow: f64,
    pub tail_tol: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { bound_tol: 1e-6, n_allow: 1.0, tail_tol: DEFAULT_TAIL_TOL }
    }
}

/// Evaluates the weighted interpolation bound along a trajectory spanning
/// normalised time `[0, 1]`.
pub fn interpolation_bound_check(
    traj: &Trajectory,
    w: &WeightParams,
    v: &TimePotential,
    opts: BoundOptions,
) -> Result<InterpolationBoundReport> {
    if traj.len() < 2 {
        return Err(Error::Unresolved("interpolation bound needs at least two samples".into()));
    }
    let (t0, t1) = (traj.t_start(), traj.t_end());
    let s_of = |t: f64| (t - t0) / (t1 - t0);
    let tol = Some(opts.tail_tol);
    let grid = traj.grid().clone();
    let log_norm =
        |u: &Field, width: f64| weighted_log_norm(u, &WeightProfile::Gaussian { gamma: width.powi(-2) }, tol);
    let start = log_norm(traj.first(), w.beta)?;
    let end = log_norm(traj.last(), w.alpha)?;
    if !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidParameter("zero endpoint data".into()));
    }
    let mut rows = Vec::with_capacity(traj.len());
    let mut grad_acc = Vec::with_capacity(traj.len());
    for (&t, u) in traj.times.iter().zip(&traj.fields) {
        let s = s_of(t);
        let mu = w.mu(s);
        let l = log_norm(u, mu)?;
        let lhs = l / mu;
        let rhs = w.beta * (1.0 - s) * mu * start + w.alpha * s * mu * end;
        let rhs_standard = (1.0 - s) * start + s * end;
        rows.push(BoundRow {
            t,
            lhs,
            rhs,
            margin: rhs - lhs,
            lhs_standard: l,
            rhs_standard,
            margin_standard: rhs_standard - l,
        });
        let weight = s * (1.0 - s);
        if weight > 0.0 {
            let mut parts = Vec::new();
            for g in gradient(u) {
                let lg = weighted_log_norm(&g, &WeightProfile::Gaussian { gamma: mu.powi(-2) }, tol)?;
                parts.push(2.0 * lg);
            }
            grad_acc.push((s, weight.ln() + log_sum_exp(&parts)));
        } else {
            grad_acc.push((s, f64::NEG_INFINITY));
        }
    }
    let (m1, m2, b_v2) = potential_constants(&grid, v, w, &traj.times, t0, t1);
    let constant = m1 + m2 + m1 * m1 + m2 * m2;
    let worst = rows.iter().map(|r| -r.margin).fold(f64::NEG_INFINITY, f64::max);
    let fit = |excess: f64| {
        if excess <= 0.0 {
            Some(0.0)
        } else if constant > 0.0 {
            Some(excess / constant)
        } else {
            None
        }
    };
    let standard_slack = rows.iter().map(|r| -r.margin_standard).fold(0.0, f64::max);
    let gradient_lhs = 0.5 * trapezoid_log(&grad_acc);
    let gradient_rhs = log_sum_exp(&[start, end]);
    let pass = standard_slack <= opts.bound_tol + opts.n_allow * constant;
    Ok(InterpolationBoundReport {
        rows,
        m1,
        m2,
        b_v2,
        constant,
        n_hat: fit(worst),
        standard_slack,
        gradient_lhs,
        gradient_rhs,
        gradient_n_hat: fit(gradient_lhs - gradient_rhs),
        pass,
    })
}

/// `M1 = sup ||V1||`, `M2 = exp(2 B) sup_t sup_x exp(|x|^2/mu^2) ||V2||` and
/// `B = sup ||Re V2||`, sampled at the trajectory times.
fn potential_constants(
    grid: &Grid,
    v: &TimePotential,
    w: &WeightParams,
    times: &[f64],
    t0: f64,
    t1: f64,
) -> (f64, f64, f64) {
    let m1 = v.static_sup_norm();
    if !v.has_dynamic() {
        return (m1, 0.0, 0.0);
    }
    let mut b: f64 = 0.0;
    let mut log_sup = f64::NEG_INFINITY;
    for &t in times {
        let mu = w.mu((t - t0) / (t1 - t0));
        for p in 0..grid.total_points() {
            let m = v.dynamic_at(p, t);
            b = b.max(linalg::op_norm(&linalg::hermitian_part(&m)));
            let nm = linalg::op_norm(&m);
            if nm > 0.0 {
                log_sup = log_sup.max(grid.radius_sq(p) / (mu * mu) + nm.ln());
            }
        }
    }
    (m1, (2.0 * b + log_sup).exp(), b)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log int exp(g(s)) ds` by the trapezoid rule on `(s, g)` pairs.
fn trapezoid_log(pts: &[(f64, f64)]) -> f64 {
    let m = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * ((w[0].1 - m).exp() + (w[1].1 - m).exp())).sum();
    m + s.ln()
}

/// Decay estimate for dissipative evolutions, in two forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `||exp(phi(T)) u(T)||`.
    pub weighted_final: f64,
    /// `||exp(gamma |x|^2) u(0)||`.
    pub weighted_initial: f64,
    /// `kappa int_0^T ||exp(phi(t)) F(t)|| dt`.
    pub forcing_term: f64,
    /// `exp(M_T) ||..u(T)||` against `M_T ||..u(0)|| + forcing`.
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// `||..u(T)||` against `exp(M_T) (||..u(0)|| + forcing)`.
    pub lhs_standard: f64,
    pub rhs_standard: f64,
    pub margin_standard: f64,
}

/// Compares weighted norms at the ends of a dissipative trajectory with
/// `phi(x, t) = gamma a |x|^2 / (a + 4 gamma (a^2 + b^2) t)`.
pub fn decay_estimate_check(
    traj: &Trajectory,
    gamma: f64,
    coef: EvolutionCoefficients,
    m_t: f64,
    forcing: Option<(&Forcing, usize)>,
) -> Result<DecayReport> {
    if coef.a <= 0.0 {
        return Err(Error::DissipationRequired);
    }
    let k2 = coef.a * coef.a + coef.b * coef.b;
    let big_t = traj.t_end() - traj.t_start();
    let phi_coef = |t: f64| gamma * coef.a / (coef.a + 4.0 * gamma * k2 * t);
    let tol = Some(DEFAULT_TAIL_TOL);
    let weighted_final =
        weighted_log_norm(traj.last(), &WeightProfile::Gaussian { gamma: phi_coef(big_t) }, tol)?.exp();
    let weighted_initial = weighted_log_norm(traj.first(), &WeightProfile::Gaussian { gamma }, tol)?.exp();
    let forcing_term = match forcing {
        None => 0.0,
        Some((f, samples)) => {
            if samples < 2 {
                return Err(Error::Unresolved("forcing quadrature needs two samples".into()));
            }
            let h = big_t / (samples - 1) as f64;
            let mut acc = 0.0;
            for k in 0..samples {
                let t = k as f64 * h;
                let val =
                    weighted_log_norm(&f(traj.t_start() + t), &WeightProfile::Gaussian { gamma: phi_coef(t) }, tol)?
                        .exp();
                acc += if k == 0 || k == samples - 1 { 0.5 * val } else { val };
            }
            coef.kappa() * acc * h
        }
    };
    let lhs = m_t.exp() * weighted_final;
    let rhs = m_t * weighted_initial + forcing_term;
    let lhs_standard = weighted_final;
    let rhs_standard = m_t.exp() * (weighted_initial + forcing_term);
    Ok(DecayReport {
        weighted_final,
        weighted_initial,
        forcing_term,
        lhs,
        rhs,
        margin: rhs - lhs,
        lhs_standard,
        rhs_standard,
        margin_standard: rhs_standard - lhs_standard,
    })
}

/// Fitted Gaussian envelopes `|f(x)| <~ exp(-|x|^2/beta^2)` and
/// `|f^(xi)| <~ exp(-4 |xi|^2/alpha^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyEnvelope {
    pub beta_hat: f64,
    pub alpha_hat: f64,
    pub product: f64,
    pub space_points: usize,
    pub freq_points: usize,
}

/// Relative amplitude window used by the envelope fit.
pub const ENVELOPE_WINDOW: (f64, f64) = (1e-10, 1e-1);
/// Minimum number of samples inside the window.
pub const ENVELOPE_MIN_POINTS: usize = 8;

fn envelope_fit(amps: &[f64], r2: impl Fn(usize) -> f64, scale: f64) -> (f64, usize) {
    let max = amps.iter().cloned().fold(0.0, f64::max);
    let mut best: f64 = 0.0;
    let mut count = 0;
    for (p, &a) in amps.iter().enumerate() {
        let r = a / max;
        if r >= ENVELOPE_WINDOW.0 && r <= ENVELOPE_WINDOW.1 {
            count += 1;
            best = best.max(scale * r2(p) / (1.0 / r).ln());
        }
    }
    (best.sqrt(), count)
}

pub fn hardy_envelope(f: &Field) -> Result<HardyEnvelope> {
    let grid = f.grid().clone();
    let amps: Vec<f64> = f.pointwise_norm_sq().iter().map(|v| v.sqrt()).collect();
    if amps.iter().all(|&a| a == 0.0) {
        return Err(Error::Unresolved("zero field has no envelope".into()));
    }
    let (beta_hat, space_points) = envelope_fit(&amps, |p| grid.radius_sq(p), 1.0);
    let hat = forward_transform(f);
    let famps: Vec<f64> = hat.pointwise_norm_sq().iter().map(|v| v.sqrt()).collect();
    let (alpha_hat, freq_points) = envelope_fit(&famps, |p| grid.freq_sq(p), 4.0);
    if space_points < ENVELOPE_MIN_POINTS || freq_points < ENVELOPE_MIN_POINTS {
        return Err(Error::Unresolved(format!(
            "{space_points} spatial and {freq_points} spectral samples in the fit window"
        )));
    }
    Ok(HardyEnvelope { beta_hat, alpha_hat, product: alpha_hat * beta_hat, space_points, freq_points })
}

/// `exp(-(1/beta^2 + i/(4T)) |x|^2)` in every component; requires
/// `alpha beta = 4T`.
pub fn sharp_gaussian_initial(w: &WeightParams, big_t: f64, grid: &Grid) -> Result<Field> {
    let gap = w.alpha * w.beta - 4.0 * big_t;
    if gap.abs() > 1e-12 {
        return Err(Error::OffThreshold(gap));
    }
    let c = Complex64::new(w.beta.powi(-2), 0.25 / big_t);
    Field::from_fn(grid, |x, _| (-c * (x[0] * x[0] + x.get(1).map_or(0.0, |y| y * y))).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::l2_norm;
    use crate::operators::{build_sk, MatrixPotential, Phase};
    use crate::propagator::{evolve, free_propagate, EvolutionPlan, Method};
    use std::f64::consts::PI;

    #[test]
    fn schedule_identities() {
        let w = WeightParams::new(1.0, 2.0, 0.5).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!((w.mu(t) + w.rho(t) - 3.0).abs() < 1e-15);
        }
        assert_eq!(w.mu(0.0), 2.0);
        assert_eq!(w.rho(0.0), 1.0);
        assert!(!w.product_flag());
        assert!(WeightParams::new(1.0, 1.5, 0.0).unwrap().product_flag());
        // a = 0: nu reduces to gamma alpha beta rho^2.
        let s = 0.4;
        let nu = w.nu(s, EvolutionCoefficients::schroedinger());
        assert!((nu - 0.5 * 2.0 * w.rho(s).powi(2)).abs() < 1e-15);
    }

    fn free_q(t: f64, gamma: f64) -> f64 {
        let p = 1.0 + 16.0 * t * t;
        p.powf(-0.5) * (PI / (2.0 / p - 2.0 * gamma)).sqrt()
    }

    #[test]
    fn q_trace_matches_closed_form() {
        let grid = Grid::new(1, 512, 12.0, 1).unwrap();
        let a = MatrixPotential::zero(&grid);
        let v = TimePotential::zero(&grid);
        let coef = EvolutionCoefficients::schroedinger();
        let u0 = Field::from_fn(&grid, |x, _| Complex64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let plan = EvolutionPlan::new(coef, 0.5, 32, Method::Exact);
        let traj = evolve(&plan, &u0, &a, &v, None).unwrap();
        let dec = build_sk(coef, 0.1, &a, &v, Phase::Quadratic).unwrap();
        let tr = q_trace(&traj, &dec).unwrap();
        for r in &tr.rows {
            assert!((r.q / free_q(r.t, 0.1) - 1.0).abs() < 1e-10);
        }
        assert!(tr.is_convex(5e-4));
        assert!(tr.slack <= 1e-12);
    }

    #[test]
    fn standard_bound_for_free_gaussian() {
        let grid = Grid::new(1, 256, 8.0, 1).unwrap();
        let a = MatrixPotential::zero(&grid);
        let v = TimePotential::zero(&grid);
        let coef = EvolutionCoefficients::new(0.0, 0.25).unwrap();
        let u0 = Field::from_fn(&grid, |x, _| Complex64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let traj = evolve(&EvolutionPlan::new(coef, 1.0, 16, Method::Exact), &u0, &a, &v, None).unwrap();
        let w = WeightParams::new(2.0, 2.0, 0.0).unwrap();
        let rep = interpolation_bound_check(&traj, &w, &v, BoundOptions::default()).unwrap();
        assert!(rep.standard_slack <= 1e-6, "{}", rep.standard_slack);
        assert!(rep.pass);
        assert_eq!(rep.constant, 0.0);
    }

    #[test]
    fn heat_decay_estimate() {
        let grid = Grid::new(1, 256, 16.0, 1).unwrap();
        let a = MatrixPotential::zero(&grid);
        let u0 = Field::from_fn(&grid, |x, _| Complex64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let coef = EvolutionCoefficients::heat();
        let u_end = free_propagate(&u0, &a, coef, 0.25).unwrap();
        let traj = Trajectory::new(vec![0.0, 0.25], vec![u0.clone(), u_end]).unwrap();
        let rep = decay_estimate_check(&traj, 0.1, coef, 0.0, None).unwrap();
        assert!(rep.margin_standard >= 0.0);
        let contraction = decay_estimate_check(&traj, 0.0, coef, 0.0, None).unwrap();
        assert!(contraction.weighted_final <= l2_norm(&u0));
        assert_eq!(
            decay_estimate_check(&traj, 0.1, EvolutionCoefficients::schroedinger(), 0.0, None),
            Err(Error::DissipationRequired)
        );
    }

    #[test]
    fn envelope_of_gaussians() {
        let grid = Grid::new(1, 512, 16.0, 1).unwrap();
        for beta in [0.8, 1.0, 2.0] {
            let f = Field::from_fn(&grid, |x, _| Complex64::new((-x[0] * x[0] / (beta * beta)).exp(), 0.0)).unwrap();
            let e = hardy_envelope(&f).unwrap();
            assert!((e.beta_hat - beta).abs() < 1e-6 * beta);
            assert!((e.alpha_hat - 4.0 / beta).abs() < 1e-6 * 4.0 / beta);
            assert!((e.product - 4.0).abs() < 1e-5);
        }
    }

    #[test]
    fn envelope_needs_samples() {
        let grid = Grid::new(1, 16, 1.0, 1).unwrap();
        let f = Field::from_fn(&grid, |x, _| Complex64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        assert!(matches!(hardy_envelope(&f), Err(Error::Unresolved(_))));
    }

    #[test]
    fn sharp_datum_threshold() {
        let grid = Grid::new(1, 64, 8.0, 1).unwrap();
        assert!(sharp_gaussian_initial(&WeightParams::new(2.0, 2.0, 0.0).unwrap(), 1.0, &grid).is_ok());
        assert!(matches!(
            sharp_gaussian_initial(&WeightParams::new(2.0, 2.1, 0.0).unwrap(), 1.0, &grid),
            Err(Error::OffThreshold(_))
        ));
    }
}
