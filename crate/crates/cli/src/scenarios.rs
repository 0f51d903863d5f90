//! Report-oriented scenarios: the uniqueness frontier sweep, heat-type decay
//! ceilings and the nonlinear difference ledger.

use hardylab_core::appell::Resampler;
use hardylab_core::field::l2_norm;
use hardylab_core::propagator::evolve;
use hardylab_core::weights::{hardy_envelope, sharp_gaussian_initial, WeightParams};
use hardylab_core::{EvolutionPlan, Field, Grid, Trajectory};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Family, ScenarioConfig, Setup};
use crate::diagnostics::{free_gaussian, resolved_log_norm};
use crate::error::{CliError, CliResult};
use crate::initial::family_field;
use crate::output::{fmt_f64, fmt_opt, DiagnosticSummary, OutputTree, Status};

fn first_component(n: usize) -> Vec<f64> {
    (0..n).map(|c| if c == 0 { 1.0 } else { 0.0 }).collect()
}

fn run(setup: &Setup, plan: &EvolutionPlan, u0: &Field, stage: &str) -> CliResult<Trajectory> {
    evolve(plan, u0, &setup.a, &setup.v, None).map_err(CliError::stage(stage))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierRow {
    pub family: Family,
    pub width: f64,
    pub alpha: f64,
    pub beta: f64,
    pub product: f64,
    pub inside_region: bool,
    /// `log ||exp(|x|^2 / beta^2) u(0)||`; `None` when not resolved.
    pub start_log_norm: Option<f64>,
    /// `log ||exp(|x|^2 / alpha^2) u(T)||`; `None` when not resolved.
    pub end_log_norm: Option<f64>,
    pub solution_norm: f64,
    pub candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpSurvival {
    pub alpha: f64,
    pub beta: f64,
    pub t_final: f64,
    pub solution_norm: f64,
    /// `beta_hat(u(0)) beta_hat(u(T))` from the Gaussian envelope fits.
    pub endpoint_product: f64,
    pub product_gap: f64,
    pub relax: f64,
    pub window: f64,
    /// Endpoint norms with weights `relax` times the threshold pair.
    pub start_log_norm: Option<f64>,
    pub end_log_norm: Option<f64>,
    pub survives: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierReport {
    pub rows: Vec<FrontierRow>,
    pub candidates: usize,
    pub sharp: SharpSurvival,
    pub pass: bool,
}

/// Measures endpoint weighted norms of each data family over the `(alpha,
/// beta)` lattice and flags nonzero solutions with both norms finite inside
/// `alpha beta < 2`; also checks that the threshold Gaussian survives.
pub fn frontier_sweep(cfg: &ScenarioConfig, setup: &Setup) -> CliResult<FrontierReport> {
    let f = cfg.frontier.as_ref().ok_or_else(|| CliError::Config("missing [frontier]".into()))?;
    let grid = &setup.grid;
    let amps = first_component(grid.components());
    let mut rows = Vec::new();
    for fam in &f.families {
        let u0 = family_field(grid, fam.family, fam.width, 0.0, &[], &amps)?;
        let traj = run(setup, &setup.plan, &u0, "frontier evolution")?;
        let u_t = traj.last();
        let solution_norm = l2_norm(u_t);
        for &alpha in &f.alphas {
            for &beta in &f.betas {
                let start_log_norm = resolved_log_norm(&u0, beta.powi(-2), f.tail_tol)?;
                let end_log_norm = resolved_log_norm(u_t, alpha.powi(-2), f.tail_tol)?;
                let inside_region = alpha * beta < 2.0;
                let candidate = inside_region
                    && start_log_norm.is_some()
                    && end_log_norm.is_some()
                    && solution_norm > f.falsification_tol;
                rows.push(FrontierRow {
                    family: fam.family,
                    width: fam.width,
                    alpha,
                    beta,
                    product: alpha * beta,
                    inside_region,
                    start_log_norm,
                    end_log_norm,
                    solution_norm,
                    candidate,
                });
            }
        }
    }
    let candidates = rows.iter().filter(|r| r.candidate).count();

    let t_final = setup.plan.t_final;
    let w0 = WeightParams::new(f.sharp_alpha, f.sharp_beta, 0.0).map_err(CliError::stage("frontier"))?;
    let u0 = sharp_gaussian_initial(&w0, t_final, grid).map_err(CliError::stage("frontier"))?;
    let traj = run(setup, &setup.plan, &u0, "frontier evolution")?;
    let u_t = traj.last();
    let solution_norm = l2_norm(u_t);
    let envelope = |u: &Field| hardy_envelope(u).map_err(CliError::stage("frontier envelope"));
    let endpoint_product = envelope(&u0)?.beta_hat * envelope(u_t)?.beta_hat;
    let product_gap = (endpoint_product - 4.0 * t_final).abs() / (4.0 * t_final);
    let window =
        Grid::new(grid.dim(), grid.points(), f.sharp_window, grid.components()).map_err(CliError::stage("frontier"))?;
    let mut rs = Resampler::default();
    let mut on_window = |u: &Field| rs.resample_onto(u, 1.0, &window).map_err(CliError::stage("frontier window"));
    let (s0, s_t) = (on_window(&u0)?, on_window(u_t)?);
    let start_log_norm = resolved_log_norm(&s0, (f.sharp_relax * f.sharp_beta).powi(-2), f.tail_tol)?;
    let end_log_norm = resolved_log_norm(&s_t, (f.sharp_relax * f.sharp_alpha).powi(-2), f.tail_tol)?;
    let survives = solution_norm > f.falsification_tol
        && product_gap <= f.product_tol
        && start_log_norm.is_some()
        && end_log_norm.is_some();
    let sharp = SharpSurvival {
        alpha: f.sharp_alpha,
        beta: f.sharp_beta,
        t_final,
        solution_norm,
        endpoint_product,
        product_gap,
        relax: f.sharp_relax,
        window: f.sharp_window,
        start_log_norm,
        end_log_norm,
        survives,
    };
    Ok(FrontierReport { rows, candidates, pass: candidates == 0 && survives, sharp })
}

pub fn write_frontier(rep: &FrontierReport, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "frontier";
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                family_name(r.family),
                fmt_f64(r.width),
                fmt_f64(r.alpha),
                fmt_f64(r.beta),
                fmt_f64(r.product),
                r.inside_region.to_string(),
                fmt_opt(r.start_log_norm),
                fmt_opt(r.end_log_norm),
                fmt_f64(r.solution_norm),
                r.candidate.to_string(),
            ]
        })
        .collect();
    let header = [
        "family",
        "width",
        "alpha",
        "beta",
        "product",
        "inside_region",
        "start_log_norm",
        "end_log_norm",
        "solution_norm",
        "candidate",
    ];
    let files = vec![out.write_csv("frontier.csv", name, &header, &rows)?, out.write_json("frontier.json", name, rep)?];
    let msg = format!(
        "{} candidates; threshold Gaussian endpoint product {:.6} (gap {:.3e}), survives: {}",
        rep.candidates, rep.sharp.endpoint_product, rep.sharp.product_gap, rep.sharp.survives
    );
    Ok(DiagnosticSummary { name: name.into(), status: Status::from_pass(rep.pass), message: Some(msg), files })
}

pub fn family_name(f: Family) -> String {
    serde_json::to_value(f).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatDecayRow {
    pub delta: f64,
    /// `log ||exp(|x|^2 / delta^2) u(T)||`; `None` when not resolved.
    pub log_norm: Option<f64>,
    /// Prediction from the closed-form decay rate where the box can
    /// resolve it.
    pub expected_finite: Option<bool>,
    pub exact_log_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatDecayReport {
    pub family: Family,
    /// Gaussian decay width of `|u(T)|`: `2 kappa sqrt(T / a)` for compact
    /// data, the exact width for Gaussian data.
    pub decay_width: f64,
    pub fitted_beta_hat: Option<f64>,
    pub rows: Vec<HeatDecayRow>,
    pub oracle_sup_error: Option<f64>,
    pub max_norm_gap: Option<f64>,
    pub oracle_tol: f64,
    /// No weight with `delta < 1` gives a finite norm for nonzero data.
    pub consistent: bool,
    pub pass: bool,
}

/// `1/2 (erf((x + h)/s) - erf((x - h)/s))`, `s = 2 sqrt(a T)`: heat flow of
/// the indicator of `[-h, h]`.
pub fn box_heat(x: f64, h: f64, a: f64, t: f64) -> f64 {
    let s = 2.0 * (a * t).sqrt();
    0.5 * (libm::erf((x + h) / s) - libm::erf((x - h) / s))
}

/// Weighted norms of `u(T)` for each `delta`; `traj` is the evolved initial
/// data of `cfg`.
pub fn heat_decay(cfg: &ScenarioConfig, setup: &Setup, traj: &Trajectory) -> CliResult<HeatDecayReport> {
    let h = cfg.heat_decay.as_ref().ok_or_else(|| CliError::Config("missing [heat_decay]".into()))?;
    let grid = &setup.grid;
    let u0 = traj.first();
    let u_t = traj.last();
    let big_t = setup.plan.t_final;
    let coef = setup.coef;
    let c = coef.complex();
    let init = &cfg.initial;
    let free = setup.a.is_zero() && setup.v.is_zero();
    let amps = if init.amplitudes.is_empty() { first_component(grid.components()) } else { init.amplitudes.clone() };
    let center = |k: usize| init.center.get(k).copied().unwrap_or(0.0);
    let dim = grid.dim();

    let kernel_width = 2.0 * coef.kappa() * (big_t / coef.a).sqrt();
    let gaussian = free && init.family == Family::Gaussian;
    // Gaussian data: |u(T)|^2 ~ exp(-2 Re(A/D) r^2).
    let big_a = Complex64::new(init.width.powi(-2), init.chirp);
    let big_d = Complex64::new(1.0, 0.0) + 4.0 * c * big_t * big_a;
    let gauss_rate = (big_a / big_d).re;
    let (decay_width, shift) = match init.family {
        Family::Gaussian if gaussian => (gauss_rate.powf(-0.5), 0.0),
        Family::Box => (kernel_width, init.width),
        _ => (kernel_width, 0.0),
    };

    let mut oracle_sup_error = None;
    if gaussian || (free && init.family == Family::Box && coef.b == 0.0) {
        let mut err: f64 = 0.0;
        for p in 0..grid.total_points() {
            let x = grid.coords(p);
            let exact = if gaussian {
                let r2: f64 = (0..dim).map(|k| (x[k] - center(k)).powi(2)).sum();
                free_gaussian(c, dim, init.width, init.chirp, r2, big_t)
            } else {
                Complex64::new((0..dim).map(|k| box_heat(x[k] - center(k), init.width, coef.a, big_t)).product(), 0.0)
            };
            for (k, z) in u_t.at(p).iter().enumerate() {
                err = err.max((z - exact * amps[k]).norm());
            }
        }
        oracle_sup_error = Some(err);
    }

    let nonzero = u0.max_abs() > 0.0;
    let l = grid.half_width();
    let amp_sq: f64 = amps.iter().map(|a| a * a).sum();
    let mut rows = Vec::new();
    let mut max_norm_gap: Option<f64> = None;
    let mut consistent = true;
    let mut mismatch = false;
    for &delta in &h.deltas {
        let log_norm = resolved_log_norm(u_t, delta.powi(-2), h.tail_tol)?;
        let tail_exponent = 2.0 * l * l / (delta * delta) - 2.0 * (l - shift).powi(2) / (decay_width * decay_width);
        let expected_finite = if !nonzero {
            Some(true)
        } else if delta < 0.95 * decay_width {
            Some(false)
        } else if tail_exponent < h.tail_tol.ln() - 2.0 && 2.0 * l * l / (delta * delta) <= 40.0 {
            Some(true)
        } else {
            None
        };
        let mut exact_log_norm = None;
        if gaussian && nonzero {
            let k = gauss_rate - delta.powi(-2);
            if k > 0.0 {
                let norm_sq = big_d.norm().powi(-(dim as i32))
                    * (std::f64::consts::PI / (2.0 * k)).powf(dim as f64 / 2.0)
                    * amp_sq;
                let exact = 0.5 * norm_sq.ln();
                exact_log_norm = Some(exact);
                if let Some(l) = log_norm {
                    let gap = ((l - exact).exp() - 1.0).abs();
                    max_norm_gap = Some(max_norm_gap.map_or(gap, |g: f64| g.max(gap)));
                }
            }
        }
        if nonzero && delta < 1.0 && log_norm.is_some() {
            consistent = false;
        }
        if let Some(e) = expected_finite {
            mismatch |= e != log_norm.is_some();
        }
        rows.push(HeatDecayRow { delta, log_norm, expected_finite, exact_log_norm });
    }
    let fitted_beta_hat = if nonzero { hardy_envelope(u_t).ok().map(|e| e.beta_hat) } else { None };
    let oracle_ok =
        oracle_sup_error.is_none_or(|e| e <= h.oracle_tol) && max_norm_gap.is_none_or(|g| g <= h.oracle_tol);
    Ok(HeatDecayReport {
        family: init.family,
        decay_width,
        fitted_beta_hat,
        rows,
        oracle_sup_error,
        max_norm_gap,
        oracle_tol: h.oracle_tol,
        consistent,
        pass: consistent && !mismatch && oracle_ok,
    })
}

pub fn write_heat_decay(rep: &HeatDecayReport, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "heat_decay";
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.delta),
                fmt_opt(r.log_norm),
                r.expected_finite.map(|b| b.to_string()).unwrap_or_default(),
                fmt_opt(r.exact_log_norm),
            ]
        })
        .collect();
    let header = ["delta", "log_norm", "expected_finite", "exact_log_norm"];
    let files =
        vec![out.write_csv("heat_decay.csv", name, &header, &rows)?, out.write_json("heat_decay.json", name, rep)?];
    let msg = format!(
        "decay width {:.4}, fitted {}, oracle error {}",
        rep.decay_width,
        rep.fitted_beta_hat.map_or("-".into(), |b| format!("{b:.4}")),
        rep.oracle_sup_error.map_or("-".into(), |e| format!("{e:.3e}")),
    );
    Ok(DiagnosticSummary { name: name.into(), status: Status::from_pass(rep.pass), message: Some(msg), files })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceRow {
    pub t: f64,
    pub norm_w: f64,
    pub norm_u1: f64,
    pub norm_u2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearDifferenceReport {
    pub lambda: f64,
    pub sigma: u32,
    pub amplitude: f64,
    pub rows: Vec<DifferenceRow>,
    pub max_norm_w: f64,
    /// `max_t log(||w(t)|| / ||w(0)||) / t`.
    pub growth_rate: Option<f64>,
    /// `||w(T) - U(T) w(0)|| / ||w(0)||` for `lambda = 0`.
    pub linear_gap: Option<f64>,
    /// Endpoint weighted log norms of `w` with `gamma` from `[weights]`.
    pub start_log_norm: Option<f64>,
    pub end_log_norm: Option<f64>,
    pub pass: bool,
}

/// Evolves the perturbed datum and compares it with `t1`, the evolved
/// initial data of `cfg`.
pub fn nonlinear_difference(
    cfg: &ScenarioConfig,
    setup: &Setup,
    t1: &Trajectory,
) -> CliResult<NonlinearDifferenceReport> {
    let pert = cfg.perturbation.as_ref().ok_or_else(|| CliError::Config("missing [perturbation]".into()))?;
    let nl = setup.plan.nonlinearity.expect("validated nonlinearity");
    let grid = &setup.grid;
    let mut amps = vec![0.0; grid.components()];
    amps[0] = pert.amplitude;
    let bump = family_field(grid, Family::Gaussian, pert.width, 0.0, &pert.center, &amps)?;
    let u2 = t1.first().add(&bump).map_err(CliError::stage("perturbation"))?;
    let t2 = run(setup, &setup.plan, &u2, "nonlinear evolution")?;
    let mut rows = Vec::new();
    let mut ws = Vec::new();
    for k in 0..t1.len() {
        let w = t1.fields[k].sub(&t2.fields[k]).map_err(CliError::stage("difference"))?;
        rows.push(DifferenceRow {
            t: t1.times[k],
            norm_w: l2_norm(&w),
            norm_u1: l2_norm(&t1.fields[k]),
            norm_u2: l2_norm(&t2.fields[k]),
        });
        ws.push(w);
    }
    let w0 = rows[0].norm_w;
    let max_norm_w = rows.iter().map(|r| r.norm_w).fold(0.0, f64::max);
    let growth_rate = (w0 > 0.0).then(|| {
        rows.iter().skip(1).map(|r| (r.norm_w / w0).ln() / (r.t - rows[0].t)).fold(f64::NEG_INFINITY, f64::max)
    });
    let mut linear_gap = None;
    if nl.lambda == 0.0 && w0 > 0.0 {
        let mut plan = setup.plan.clone();
        plan.nonlinearity = None;
        let lin = run(setup, &plan, &ws[0], "linear evolution")?;
        let gap = l2_norm(&lin.last().sub(ws.last().expect("samples")).map_err(CliError::stage("difference"))?) / w0;
        linear_gap = Some(gap);
    }
    let (mut start_log_norm, mut end_log_norm) = (None, None);
    if let Some(w) = setup.weights {
        start_log_norm = resolved_log_norm(&ws[0], w.gamma, hardylab_core::field::DEFAULT_TAIL_TOL)?;
        end_log_norm = resolved_log_norm(ws.last().expect("samples"), w.gamma, hardylab_core::field::DEFAULT_TAIL_TOL)?;
    }
    let pass = if pert.amplitude == 0.0 {
        max_norm_w <= pert.identity_tol
    } else if let Some(g) = linear_gap {
        g <= pert.identity_tol
    } else {
        growth_rate.is_some_and(f64::is_finite)
    };
    Ok(NonlinearDifferenceReport {
        lambda: nl.lambda,
        sigma: nl.sigma,
        amplitude: pert.amplitude,
        rows,
        max_norm_w,
        growth_rate,
        linear_gap,
        start_log_norm,
        end_log_norm,
        pass,
    })
}

pub fn write_nonlinear_difference(
    rep: &NonlinearDifferenceReport,
    out: &mut OutputTree,
) -> CliResult<DiagnosticSummary> {
    let name = "nonlinear_difference";
    let rows: Vec<Vec<String>> =
        rep.rows.iter().map(|r| [r.t, r.norm_w, r.norm_u1, r.norm_u2].map(fmt_f64).to_vec()).collect();
    let files = vec![
        out.write_csv("nonlinear_difference.csv", name, &["t", "norm_w", "norm_u1", "norm_u2"], &rows)?,
        out.write_json("nonlinear_difference.json", name, rep)?,
    ];
    let msg = format!(
        "max |w| {:.3e}, growth rate {}, linear gap {}",
        rep.max_norm_w,
        rep.growth_rate.map_or("-".into(), |g| format!("{g:.4}")),
        rep.linear_gap.map_or("-".into(), |g| format!("{g:.3e}")),
    );
    Ok(DiagnosticSummary { name: name.into(), status: Status::from_pass(rep.pass), message: Some(msg), files })
}
