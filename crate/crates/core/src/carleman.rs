//! Carleman weights, the weighted space-time inequalities for the
//! Schroedinger and parabolic operators, and the quadratic-form lower bound
//! of the conjugated operators.
//!
//! With `z = x + r t (1 - t) e1` the weights are
//!
//! ```text
//! kappa(x, t) = mu |z|^2 - r^2 t (1 - t) / (8 mu)
//! sigma(t)    = (1 + eps) t (1 - t) / (16 mu)
//! chi(t)      = r^2 t (1 - t) (1 - 2 t) / 6
//! ```
//!
//! `WeightVariant::Centered` drops the `r^2` offset from `kappa` and uses
//! `sigma = (1 + eps) r^2 t (1 - t) / (16 mu)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gradient, inner_product, laplacian, partial, weighted_log_norm, Field, Grid, WeightProfile};
use crate::operators::{build_sk, MatrixPotential, Phase, TimePotential};
use crate::propagator::EvolutionCoefficients;

/// Default acceptance tolerance on `rhs / lhs`.
pub const CARLEMAN_TOL: f64 = 2e-2;
/// Largest stride-1 vs stride-2 gap of the time derivative.
const TIME_GAP_TOL: f64 = 0.1;
const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Schroedinger,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightVariant {
    /// `kappa` carries an `r^2 t (1 - t) / (8 mu)` offset.
    #[default]
    Shifted,
    /// `kappa = mu |z|^2`, `sigma = (1 + eps) r^2 t (1 - t) / (16 mu)`.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub mu: f64,
    pub r: f64,
    pub eps: f64,
    #[serde(default)]
    pub variant: WeightVariant,
}

impl CarlemanParams {
    pub fn new(mu: f64, r: f64, eps: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(r >= 0.0 && r.is_finite()) || !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu = {mu}, r = {r}, eps = {eps}")));
        }
        Ok(Self { mu, r, eps, variant: WeightVariant::Shifted })
    }

    pub fn with_variant(mut self, variant: WeightVariant) -> Self {
        self.variant = variant;
        self
    }

    /// Parameter ranges where `exp(kappa)` is known to stay representable at
    /// desk-scale boxes.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.25..=1.0).contains(&self.mu) {
            out.push(format!("mu = {} outside [0.25, 1]", self.mu));
        }
        if self.r > 8.0 {
            out.push(format!("r = {} exceeds 8", self.r));
        }
        out
    }

    /// Drift of the weight centre along `e1`.
    pub fn shift(&self, t: f64) -> f64 {
        self.r * t * (1.0 - t)
    }

    fn kappa_offset(&self, t: f64) -> f64 {
        match self.variant {
            WeightVariant::Shifted => self.r * self.r * t * (1.0 - t) / (8.0 * self.mu),
            WeightVariant::Centered => 0.0,
        }
    }

    fn sigma_scale(&self) -> f64 {
        match self.variant {
            WeightVariant::Shifted => 1.0,
            WeightVariant::Centered => self.r * self.r,
        }
    }

    pub fn kappa(&self, x: &[f64], t: f64) -> f64 {
        let s = self.shift(t);
        let z2: f64 = x.iter().enumerate().map(|(k, &v)| if k == 0 { (v + s).powi(2) } else { v * v }).sum();
        self.mu * z2 - self.kappa_offset(t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (1.0 + self.eps) * self.sigma_scale() * t * (1.0 - t) / (16.0 * self.mu)
    }

    pub fn chi(&self, t: f64) -> f64 {
        self.r * self.r * t * (1.0 - t) * (1.0 - 2.0 * t) / 6.0
    }

    /// Full log-weight `kappa - sigma (+ chi)`.
    pub fn log_weight(&self, regime: Regime, x: &[f64], t: f64) -> f64 {
        let base = self.kappa(x, t) - self.sigma(t);
        match regime {
            Regime::Schroedinger => base,
            Regime::Parabolic => base + self.chi(t),
        }
    }

    /// Second time derivative of `-kappa_offset - sigma`.
    fn g_tt(&self) -> f64 {
        let off = match self.variant {
            WeightVariant::Shifted => self.r * self.r / (4.0 * self.mu),
            WeightVariant::Centered => 0.0,
        };
        let sig = (1.0 + self.eps) * self.sigma_scale() / (8.0 * self.mu);
        off + sig
    }

    /// Constant left over after completing the squares, the same in both
    /// regimes since `chi'' = -r^2 (1 - 2t)` cancels the extra parabolic term.
    pub fn remainder(&self) -> f64 {
        self.g_tt() - self.r * self.r / (8.0 * self.mu)
    }

    /// `eps r^2 / (8 mu)`.
    pub fn lower_bound_coefficient(&self) -> f64 {
        self.eps * self.r * self.r / (8.0 * self.mu)
    }

    /// Grad, Laplacian and time derivative of the log-weight at `t`.
    fn sampled_phase(&self, regime: Regime, grid: &Grid, t: f64) -> Phase {
        let d = grid.dim();
        let np = grid.total_points();
        let (mu, r) = (self.mu, self.r);
        let s = self.shift(t);
        let ds = r * (1.0 - 2.0 * t);
        let g_t = {
            let off_t = match self.variant {
                WeightVariant::Shifted => r * r * (1.0 - 2.0 * t) / (8.0 * mu),
                WeightVariant::Centered => 0.0,
            };
            let sig_t = (1.0 + self.eps) * self.sigma_scale() * (1.0 - 2.0 * t) / (16.0 * mu);
            let chi_t = match regime {
                Regime::Schroedinger => 0.0,
                Regime::Parabolic => r * r * (1.0 - 6.0 * t + 6.0 * t * t) / 6.0,
            };
            -off_t - sig_t + chi_t
        };
        let mut grad = Vec::with_capacity(np);
        let mut dt = Vec::with_capacity(np);
        for p in 0..np {
            let x = grid.coords(p);
            let z0 = x[0] + s;
            let mut g = [2.0 * mu * z0, 0.0];
            if d == 2 {
                g[1] = 2.0 * mu * x[1];
            }
            grad.push(g);
            dt.push(2.0 * mu * z0 * ds + g_t);
        }
        Phase::Sampled { grad, lap: vec![2.0 * mu * d as f64; np], dt, dtt: vec![0.0; np] }
    }
}

/// Compactly supported space-time probe on a uniform lattice of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Spatial support is the cube `[-support, support]^n`.
    pub support: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpOptions {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Fraction of the half-width covered by the spatial support.
    pub support_fraction: f64,
    pub modes: usize,
    pub max_wavenumber: f64,
    pub max_frequency: f64,
}

impl Default for BumpOptions {
    fn default() -> Self {
        Self { t_lo: 0.1, t_hi: 0.9, support_fraction: 0.9, modes: 4, max_wavenumber: 2.0, max_frequency: 4.0 }
    }
}

/// `exp(1 - 1 / (1 - s^2))` on `|s| < 1`, zero elsewhere.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl TestFunction {
    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for f in &mut out.fields {
            *f = f.scale(c);
        }
        out
    }

    fn in_support(&self, p: usize) -> bool {
        let grid = self.grid();
        let x = grid.coords(p);
        x[..grid.dim()].iter().all(|v| v.abs() < self.support)
    }
}

/// Random band-limited field times smooth space and time cutoffs.
pub fn make_bump_test_function(grid: &Grid, time_samples: usize, seed: u64) -> Result<TestFunction> {
    make_bump_test_function_with(grid, time_samples, seed, BumpOptions::default())
}

pub fn make_bump_test_function_with(
    grid: &Grid,
    time_samples: usize,
    seed: u64,
    opts: BumpOptions,
) -> Result<TestFunction> {
    if !(0.0 < opts.t_lo && opts.t_lo < opts.t_hi && opts.t_hi < 1.0) {
        return Err(Error::InvalidParameter(format!("time margins ({}, {})", opts.t_lo, opts.t_hi)));
    }
    if !(opts.support_fraction > 0.0 && opts.support_fraction <= 0.9) {
        return Err(Error::InvalidParameter(format!("support fraction {}", opts.support_fraction)));
    }
    if time_samples < 16 {
        return Err(Error::InvalidParameter(format!("{time_samples} time samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let nc = grid.components();
    struct Mode {
        amp: Complex64,
        k: [f64; 2],
        omega: f64,
    }
    let modes: Vec<Vec<Mode>> = (0..nc)
        .map(|_| {
            (0..opts.modes)
                .map(|_| Mode {
                    amp: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    k: [
                        rng.gen_range(-opts.max_wavenumber..opts.max_wavenumber),
                        rng.gen_range(-opts.max_wavenumber..opts.max_wavenumber),
                    ],
                    omega: rng.gen_range(-opts.max_frequency..opts.max_frequency),
                })
                .collect()
        })
        .collect();
    let support = opts.support_fraction * grid.half_width();
    let mid = 0.5 * (opts.t_lo + opts.t_hi);
    let half = 0.5 * (opts.t_hi - opts.t_lo);
    let times: Vec<f64> = (0..time_samples).map(|k| k as f64 / (time_samples - 1) as f64).collect();
    let fields = times
        .iter()
        .map(|&t| {
            let eta = bump((t - mid) / half);
            Field::from_fn(grid, |x, c| {
                let space: f64 = x[..d].iter().map(|v| bump(v / support)).product();
                let amp = eta * space;
                if amp == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let wave: Complex64 = modes[c]
                    .iter()
                    .map(|m| {
                        let kx: f64 = (0..d).map(|i| m.k[i] * x[i]).sum();
                        m.amp * Complex64::from_polar(1.0, kx + m.omega * t)
                    })
                    .sum();
                wave * amp
            })
            .map(|f| f.with_time(t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestFunction { times, fields, t_lo: opts.t_lo, t_hi: opts.t_hi, support })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub regime: Regime,
    pub params: CarlemanParams,
    /// `ln` of `r sqrt(eps / (8 mu)) ||e^w v||`.
    pub ln_lhs: f64,
    /// `ln` of `||e^w L v||`.
    pub ln_rhs: f64,
    /// `rhs / lhs`; absent for the zero probe.
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub pass: bool,
    pub tol: f64,
    /// Relative gap between stride-1 and stride-2 time derivatives.
    pub time_gap: f64,
}

/// Fourth-order centred time derivative with the given stride; indices
/// whose stencil leaves the lattice must lie where the probe vanishes.
fn time_derivative(v: &TestFunction, k: usize, stride: usize) -> Result<Field> {
    let n = v.len();
    if k < 2 * stride || k + 2 * stride >= n {
        let lo = k.saturating_sub(2 * stride);
        let hi = (k + 2 * stride).min(n - 1);
        if (lo..=hi).any(|j| v.fields[j].max_abs() > 0.0) {
            return Err(Error::Unresolved("probe does not vanish near the lattice ends".into()));
        }
        return Ok(Field::zeros(v.grid()).with_time(v.times[k]));
    }
    let h = stride as f64 * v.dt();
    let f = &v.fields;
    let mut d = f[k - 2 * stride].sub(&f[k + 2 * stride])?;
    d.axpy(Complex64::new(8.0, 0.0), &f[k + stride])?;
    d.axpy(Complex64::new(-8.0, 0.0), &f[k - stride])?;
    Ok(d.scale(Complex64::new(1.0 / (12.0 * h), 0.0)))
}

fn spatial_part(regime: Regime, a: &MatrixPotential, f: &Field) -> Result<Field> {
    let h = laplacian(f).add(&a.apply(f)?)?;
    Ok(match regime {
        Regime::Schroedinger => h.scale(Complex64::new(0.0, 1.0)),
        Regime::Parabolic => h,
    })
}

/// Accumulates `ln sqrt(sum_k dt exp(2 l_k))`.
fn log_sum(logs: &[f64], dt: f64) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = logs.iter().map(|&l| (2.0 * (l - m)).exp()).sum();
    m + 0.5 * (s * dt).ln()
}

/// Weighted space-time check `r sqrt(eps/8mu) ||e^w v|| <= ||e^w L v||`
/// with `L = d_t - i(lap + A)` or `L = d_t - lap - A`.
pub fn carleman_check(
    v: &TestFunction,
    a: &MatrixPotential,
    params: &CarlemanParams,
    regime: Regime,
    tol: f64,
) -> Result<CarlemanReport> {
    let grid = v.grid().clone();
    a.grid().check_same(&grid)?;
    let np = grid.total_points();
    let support_mask: Vec<bool> = (0..np).map(|p| v.in_support(p)).collect();
    let mut ln_v = Vec::with_capacity(v.len());
    let mut ln_l = Vec::with_capacity(v.len());
    let mut ln_diff = Vec::with_capacity(v.len());
    for (k, &t) in v.times.iter().enumerate() {
        let w =
            WeightProfile::Log((0..np).map(|p| params.log_weight(regime, &grid.coords(p)[..grid.dim()], t)).collect());
        let d1 = time_derivative(v, k, 1)?;
        let d2 = time_derivative(v, k, 2)?;
        let lv = d1.sub(&spatial_part(regime, a, &v.fields[k])?)?.mul_pointwise(|p| {
            if support_mask[p] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        ln_v.push(weighted_log_norm(&v.fields[k], &w, Some(TAIL_TOL))?);
        ln_l.push(weighted_log_norm(&lv, &w, Some(TAIL_TOL))?);
        ln_diff.push(weighted_log_norm(&d1.sub(&d2)?, &w, Some(TAIL_TOL))?);
    }
    let dt = v.dt();
    let ln_norm_v = log_sum(&ln_v, dt);
    let ln_rhs = log_sum(&ln_l, dt);
    let time_gap = (log_sum(&ln_diff, dt) - ln_rhs).exp();
    if !ln_norm_v.is_finite() {
        return Ok(CarlemanReport {
            regime,
            params: *params,
            ln_lhs: f64::NEG_INFINITY,
            ln_rhs,
            ratio: None,
            degenerate: true,
            pass: true,
            tol,
            time_gap: 0.0,
        });
    }
    if time_gap > TIME_GAP_TOL {
        return Err(Error::Unresolved(format!("time derivative gap {time_gap:.3e} under lattice coarsening")));
    }
    let c = params.r * (params.eps / (8.0 * params.mu)).sqrt();
    let ln_lhs = c.ln() + ln_norm_v;
    let ratio = (ln_rhs - ln_lhs).exp();
    Ok(CarlemanReport {
        regime,
        params: *params,
        ln_lhs,
        ln_rhs,
        ratio: Some(ratio),
        degenerate: false,
        pass: ratio >= 1.0 - tol,
        tol,
        time_gap,
    })
}

pub fn carleman_schrodinger_check(
    v: &TestFunction,
    a: &MatrixPotential,
    params: &CarlemanParams,
) -> Result<CarlemanReport> {
    carleman_check(v, a, params, Regime::Schroedinger, CARLEMAN_TOL)
}

pub fn carleman_parabolic_check(
    v: &TestFunction,
    a: &MatrixPotential,
    params: &CarlemanParams,
) -> Result<CarlemanReport> {
    carleman_check(v, a, params, Regime::Parabolic, CARLEMAN_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormRow {
    pub t: f64,
    /// `Re (S_t f + [S, K] f, f)` from operator applications.
    pub nested: f64,
    /// Completed squares plus the exact leftover constant.
    pub derived: f64,
    /// Completed squares plus the `eps r^2 / (8 mu)` term.
    pub squares_sum: f64,
    /// `eps r^2 / (8 mu) ||f||^2`.
    pub bound: f64,
    /// `(nested - bound) / max(bound, ||f||^2)`.
    pub margin: f64,
    /// `(squares_sum - bound) / max(bound, ||f||^2)`.
    pub squares_margin: f64,
    pub terms: Vec<FormTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormReport {
    pub regime: Regime,
    pub rows: Vec<FormRow>,
    pub min_margin: f64,
    pub min_squares_margin: f64,
    /// Largest `|nested - derived| / |nested|`.
    pub max_derivation_gap: f64,
    pub squares_nonnegative: bool,
}

/// Evaluates the quadratic form of `S_t + [S, K]` on `f = e^w v` at every
/// time sample inside the support of `v`.
pub fn commutator_lower_bound(
    v: &TestFunction,
    a: &MatrixPotential,
    params: &CarlemanParams,
    regime: Regime,
) -> Result<FormReport> {
    let grid = v.grid().clone();
    a.grid().check_same(&grid)?;
    if !a.is_constant() {
        return Err(Error::NonConstantPotential);
    }
    let coef = match regime {
        Regime::Schroedinger => EvolutionCoefficients::schroedinger(),
        Regime::Parabolic => EvolutionCoefficients::heat(),
    };
    let zero_v = TimePotential::zero(&grid);
    let np = grid.total_points();
    let d = grid.dim();
    let (mu, r) = (params.mu, params.r);
    let mut rows = Vec::new();
    for (k, &t) in v.times.iter().enumerate() {
        if v.fields[k].max_abs() == 0.0 {
            continue;
        }
        let logs: Vec<f64> = (0..np).map(|p| params.log_weight(regime, &grid.coords(p)[..d], t)).collect();
        let shift = (0..np)
            .filter(|&p| v.fields[k].at(p).iter().any(|z| z.norm() > 0.0))
            .map(|p| logs[p])
            .fold(f64::NEG_INFINITY, f64::max);
        let f = v.fields[k].mul_pointwise(|p| Complex64::new((logs[p] - shift).exp(), 0.0));
        let sk = |tau: f64| build_sk(coef, 1.0, a, &zero_v, params.sampled_phase(regime, &grid, tau));
        let dec = sk(t)?;
        let sf = dec.apply_s(&f)?;
        let kf = dec.apply_k(&f)?;
        let h = 1e-2;
        let mut s_t = sk(t - 2.0 * h)?.apply_s(&f)?.sub(&sk(t + 2.0 * h)?.apply_s(&f)?)?;
        s_t.axpy(Complex64::new(8.0, 0.0), &sk(t + h)?.apply_s(&f)?)?;
        s_t.axpy(Complex64::new(-8.0, 0.0), &sk(t - h)?.apply_s(&f)?)?;
        let s_t = s_t.scale(Complex64::new(1.0 / (12.0 * h), 0.0));
        let comm = dec.apply_s(&kf)?.sub(&dec.apply_k(&sf)?)?.add(&s_t)?;
        let nested = inner_product(&comm, &f)?.re;

        let norm_sq = inner_product(&f, &f)?.re;
        let s = params.shift(t);
        let centre = match regime {
            Regime::Schroedinger => -r / (16.0 * mu * mu),
            Regime::Parabolic => r * (4.0 * mu * (1.0 - 2.0 * t) - 1.0) / (16.0 * mu * mu),
        };
        let moment = {
            let w = f.mul_pointwise(|p| {
                let x = grid.coords(p);
                let z0 = x[0] + s + centre;
                let rest: f64 = x[1..d].iter().map(|v| v * v).sum();
                Complex64::new(z0 * z0 + rest, 0.0)
            });
            inner_product(&w, &f)?.re
        };
        let grads = gradient(&f);
        let grad_sq = |range: std::ops::Range<usize>| -> Result<f64> {
            range.map(|i| inner_product(&grads[i], &grads[i]).map(|z| z.re)).sum()
        };
        let bound = params.lower_bound_coefficient() * norm_sq;
        let mut terms = vec![FormTerm { name: "weight_square".into(), value: 32.0 * mu.powi(3) * moment }];
        match regime {
            Regime::Schroedinger => {
                let d1 = partial(&f, 0);
                let tw = d1.scale(Complex64::new(0.0, 1.0)).sub(&f.scale(Complex64::new(r * (0.5 - t), 0.0)))?;
                terms.push(FormTerm { name: "transverse_gradient".into(), value: 8.0 * mu * grad_sq(1..d)? });
                terms.push(FormTerm {
                    name: "twisted_derivative".into(),
                    value: 8.0 * mu * inner_product(&tw, &tw)?.re,
                });
            }
            Regime::Parabolic => {
                terms.push(FormTerm { name: "gradient".into(), value: 8.0 * mu * grad_sq(0..d)? });
            }
        }
        let squares: f64 = terms.iter().map(|t| t.value).sum();
        let derived = squares + params.remainder() * norm_sq;
        let squares_sum = squares + bound;
        terms.push(FormTerm { name: "lower_bound".into(), value: bound });
        terms.push(FormTerm { name: "remainder".into(), value: params.remainder() * norm_sq });
        let scale = bound.max(norm_sq);
        rows.push(FormRow {
            t,
            nested,
            derived,
            squares_sum,
            bound,
            margin: (nested - bound) / scale,
            squares_margin: (squares_sum - bound) / scale,
            terms,
        });
    }
    if rows.is_empty() {
        return Err(Error::Unresolved("probe vanishes at every time sample".into()));
    }
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let min_squares_margin = rows.iter().map(|r| r.squares_margin).fold(f64::INFINITY, f64::min);
    let max_derivation_gap =
        rows.iter().map(|r| (r.nested - r.derived).abs() / r.nested.abs().max(1e-300)).fold(0.0, f64::max);
    let squares_nonnegative = rows.iter().all(|r| {
        r.terms
            .iter()
            .filter(|t| t.name != "remainder" && t.name != "lower_bound")
            .all(|t| t.value >= -1e-12 * r.nested.abs())
    });
    Ok(FormReport { regime, rows, min_margin, min_squares_margin, max_derivation_gap, squares_nonnegative })
}
