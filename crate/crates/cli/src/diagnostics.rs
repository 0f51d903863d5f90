//! Per-trajectory diagnostics; each writes its own artifacts and returns a
//! summary line for the manifest.

use hardylab_core::appell::{
    appell_forward, appell_pde_residual, appell_trajectory, unit_times, unweighted_identity, weighted_identity,
    AppellMap,
};
use hardylab_core::carleman::{
    carleman_check, commutator_lower_bound, make_bump_test_function, CarlemanParams, Regime as CarlemanRegime,
};
use hardylab_core::field::{l2_norm, weighted_log_norm, DEFAULT_TAIL_TOL};
use hardylab_core::linalg::{hermitian_defect, op_norm};
use hardylab_core::operators::{build_sk, commutator_form, Phase};
use hardylab_core::propagator::free_propagate;
use hardylab_core::weights::{decay_estimate_check, hardy_envelope, interpolation_bound_check, q_trace, BoundOptions};
use hardylab_core::{Error, Field, Grid, Trajectory, WeightProfile};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{Family, ScenarioConfig, Setup};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, fmt_opt, snapshot_bytes, DiagnosticSummary, OutputTree, Status};

/// Everything a diagnostic may read.
pub struct RunContext<'a> {
    pub cfg: &'a ScenarioConfig,
    pub setup: &'a Setup,
    pub traj: &'a Trajectory,
}

impl RunContext<'_> {
    /// Initial data vanish identically.
    pub fn is_zero(&self) -> bool {
        self.traj.first().max_abs() == 0.0
    }

    fn weights(&self) -> hardylab_core::weights::WeightParams {
        self.setup.weights.expect("validated weights")
    }
}

fn done(name: &str, status: Status, message: Option<String>, files: Vec<String>) -> DiagnosticSummary {
    DiagnosticSummary { name: name.to_string(), status, message, files }
}

fn degenerate(name: &str, why: &str) -> DiagnosticSummary {
    done(name, Status::Degenerate, Some(why.to_string()), Vec::new())
}

fn stage(name: &str) -> impl FnOnce(Error) -> CliError + '_ {
    CliError::stage(name)
}

/// `log ||exp(gamma |x|^2) f||`, or `None` when the weighted tail is not
/// resolved on the box.
pub fn resolved_log_norm(f: &Field, gamma: f64, tol: f64) -> CliResult<Option<f64>> {
    match weighted_log_norm(f, &WeightProfile::Gaussian { gamma }, Some(tol)) {
        Ok(l) => Ok(Some(l)),
        Err(Error::TailNotResolved { .. }) => Ok(None),
        Err(e) => Err(CliError::Stage { stage: "weighted norm".into(), source: e }),
    }
}

pub fn component_norms_sq(f: &Field) -> Vec<f64> {
    let g = f.grid();
    (0..g.components()).map(|c| f.component(c).iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell_volume()).collect()
}

fn relative(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        x
    }
}

/// Whether the flow should conserve the L2 norm: `a = 0` and a Hermitian
/// potential at the stored times.
fn conserves_mass(ctx: &RunContext) -> bool {
    if ctx.setup.coef.a != 0.0 {
        return false;
    }
    let v = &ctx.setup.v;
    if v.is_zero() {
        return true;
    }
    let g = &ctx.setup.grid;
    let stride = (ctx.traj.len() / 16).max(1);
    ctx.traj
        .times
        .iter()
        .step_by(stride)
        .all(|&t| (0..g.total_points()).all(|p| hermitian_defect(&v.at(p, t)) <= 1e-14))
}

pub fn mass(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let n = ctx.setup.grid.components();
    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend((0..n).map(|c| format!("norm_sq_{c}")));
    let mut rows = Vec::new();
    let n0 = l2_norm(ctx.traj.first());
    let mut drift: f64 = 0.0;
    for (&t, f) in ctx.traj.times.iter().zip(&ctx.traj.fields) {
        let norm = l2_norm(f);
        drift = drift.max((norm - n0).abs());
        let mut row = vec![fmt_f64(t), fmt_f64(norm)];
        row.extend(component_norms_sq(f).into_iter().map(fmt_f64));
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut files = vec![out.write_csv("mass.csv", "mass", &header, &rows)?];
    let conserved = conserves_mass(ctx);
    let rel = relative(drift, n0);
    #[derive(Serialize)]
    struct MassReport {
        initial_norm: f64,
        max_drift: f64,
        relative_drift: f64,
        conservation_expected: bool,
        tol: f64,
    }
    let tol = ctx.cfg.diagnostics.mass_tol;
    let rep =
        MassReport { initial_norm: n0, max_drift: drift, relative_drift: rel, conservation_expected: conserved, tol };
    files.push(out.write_json("mass.json", "mass", &rep)?);
    if ctx.is_zero() {
        let status = if drift == 0.0 { Status::Degenerate } else { Status::Fail };
        return Ok(done("mass", status, Some("zero initial data".into()), files));
    }
    let status = Status::from_pass(!conserved || rel <= tol);
    let msg = if conserved { format!("relative drift {rel:.3e}") } else { "norm not conserved by this flow".into() };
    Ok(done("mass", status, Some(msg), files))
}

/// `(1 + 4 c t A)^(-n/2) exp(-A |x - x0|^2 / (1 + 4 c t A))` for data
/// `exp(-A |x - x0|^2)`, `A = 1/w^2 + i chirp`, `c = a + ib`.
pub fn free_gaussian(a_coef: Complex64, dim: usize, width: f64, chirp: f64, r2: f64, t: f64) -> Complex64 {
    let big_a = Complex64::new(width.powi(-2), chirp);
    let d = Complex64::new(1.0, 0.0) + 4.0 * a_coef * t * big_a;
    d.powf(-(dim as f64) / 2.0) * (-big_a * r2 / d).exp()
}

pub fn oracle(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "oracle";
    let init = &ctx.cfg.initial;
    let free = ctx.setup.a.is_zero() && ctx.setup.v.is_zero() && ctx.setup.plan.nonlinearity.is_none();
    if !(free && init.family == Family::Gaussian) {
        return Ok(done(name, Status::Pass, Some("no closed form for this scenario".into()), Vec::new()));
    }
    let g = &ctx.setup.grid;
    let amps: Vec<f64> = if init.amplitudes.is_empty() {
        (0..g.components()).map(|c| if c == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        init.amplitudes.clone()
    };
    let c = ctx.setup.coef.complex();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (&t, f) in ctx.traj.times.iter().zip(&ctx.traj.fields) {
        let mut err: f64 = 0.0;
        for p in 0..g.total_points() {
            let x = g.coords(p);
            let r2: f64 = (0..g.dim()).map(|k| (x[k] - init.center.get(k).copied().unwrap_or(0.0)).powi(2)).sum();
            let exact = free_gaussian(c, g.dim(), init.width, init.chirp, r2, t);
            for (k, z) in f.at(p).iter().enumerate() {
                err = err.max((z - exact * amps[k]).norm());
            }
        }
        worst = worst.max(err);
        rows.push(vec![fmt_f64(t), fmt_f64(err)]);
    }
    let files = vec![out.write_csv("oracle.csv", name, &["t", "sup_error"], &rows)?];
    let tol = ctx.cfg.diagnostics.oracle_tol;
    Ok(done(name, Status::from_pass(worst <= tol), Some(format!("max sup error {worst:.3e}")), files))
}

pub fn group_law(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "group_law";
    let u0 = ctx.traj.first();
    let big_t = ctx.setup.plan.t_final;
    let n0 = l2_norm(u0);
    if n0 == 0.0 {
        return Ok(degenerate(name, "zero initial data"));
    }
    let (a, coef) = (&ctx.setup.a, ctx.setup.coef);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (t, s) in [(0.1 * big_t, 0.2 * big_t), (0.25 * big_t, 0.5 * big_t), (big_t / 3.0, big_t / 2.0)] {
        let ts =
            free_propagate(&free_propagate(u0, a, coef, t).map_err(stage(name))?, a, coef, s).map_err(stage(name))?;
        let direct = free_propagate(u0, a, coef, t + s).map_err(stage(name))?;
        let gap = l2_norm(&ts.sub(&direct).map_err(stage(name))?) / n0;
        worst = worst.max(gap);
        rows.push(vec![fmt_f64(t), fmt_f64(s), fmt_f64(gap)]);
    }
    let files = vec![out.write_csv("group_law.csv", name, &["t", "s", "relative_gap"], &rows)?];
    let tol = ctx.cfg.diagnostics.group_tol;
    Ok(done(name, Status::from_pass(worst <= tol), Some(format!("max gap {worst:.3e}")), files))
}

/// `exp(i b t A)` applied pointwise to `u0` gives the component norms of
/// the free flow when `A` is constant.
pub fn system_oracle_norms(a: &DMatrix<f64>, b: f64, u0: &Field, t: f64) -> Vec<f64> {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let q = eig.eigenvectors.map(|v| Complex64::new(v, 0.0));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, b * t * l).exp()));
    let u = &q * phases * q.transpose();
    let g = u0.grid();
    let mut norms = vec![0.0; n];
    for p in 0..g.total_points() {
        let v = u0.at(p);
        for (m, acc) in norms.iter_mut().enumerate() {
            let z: Complex64 = (0..n).map(|j| u[(m, j)] * v[j]).sum();
            *acc += z.norm_sqr();
        }
    }
    norms.iter().map(|s| s * g.cell_volume()).collect()
}

pub fn system(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "system";
    let n = ctx.setup.grid.components();
    let total0: f64 = component_norms_sq(ctx.traj.first()).iter().sum();
    if total0 == 0.0 {
        return Ok(degenerate(name, "zero initial data"));
    }
    let oracle_ok = ctx.setup.coef.a == 0.0 && ctx.setup.v.is_zero() && ctx.setup.plan.nonlinearity.is_none();
    let a_const = ctx.setup.a.constant_matrix().cloned();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|c| format!("norm_sq_{c}")));
    if oracle_ok && a_const.is_some() {
        header.extend((0..n).map(|c| format!("oracle_{c}")));
    }
    header.push("total".into());
    let mut rows = Vec::new();
    let (mut worst, mut total_drift, mut exchange): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let first = component_norms_sq(ctx.traj.first());
    for (&t, f) in ctx.traj.times.iter().zip(&ctx.traj.fields) {
        let norms = component_norms_sq(f);
        let total: f64 = norms.iter().sum();
        total_drift = total_drift.max((total - total0).abs() / total0);
        exchange = exchange.max((norms[0] - first[0]).abs() / total0);
        let mut row = vec![fmt_f64(t)];
        row.extend(norms.iter().map(|&v| fmt_f64(v)));
        if let (true, Some(a)) = (oracle_ok, &a_const) {
            let exact = system_oracle_norms(a, ctx.setup.coef.b, ctx.traj.first(), t);
            for (x, y) in norms.iter().zip(&exact) {
                worst = worst.max((x - y).abs() / total0);
            }
            row.extend(exact.into_iter().map(fmt_f64));
        }
        row.push(fmt_f64(total));
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let files = vec![out.write_csv("system.csv", name, &header, &rows)?];
    let tol = ctx.cfg.diagnostics.system_tol;
    let conserves = conserves_mass(ctx);
    let pass = worst <= tol && (!conserves || total_drift <= ctx.cfg.diagnostics.mass_tol);
    let msg = format!("oracle gap {worst:.3e}, total drift {total_drift:.3e}, exchanged fraction {exchange:.3e}");
    Ok(done(name, Status::from_pass(pass), Some(msg), files))
}

pub fn convexity(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "convexity";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let s = ctx.setup;
    let dec = build_sk(s.coef, ctx.weights().gamma, &s.a, &s.v, Phase::Quadratic).map_err(stage(name))?;
    let trace = q_trace(ctx.traj, &dec).map_err(stage(name))?;
    let rows: Vec<Vec<String>> = trace
        .rows
        .iter()
        .map(|r| vec![fmt_f64(r.t), fmt_f64(r.q), fmt_f64(r.q.ln()), fmt_f64(r.d), fmt_f64(r.n), fmt_opt(r.d2_log_q)])
        .collect();
    let mut files = vec![out.write_csv("convexity.csv", name, &["t", "q", "log_q", "d", "n", "d2_log_q"], &rows)?];
    let d = &ctx.cfg.diagnostics;
    let convex = trace.is_convex(d.convexity_tol);
    let slack_ok = trace.slack <= d.slack_tol;
    #[derive(Serialize)]
    struct ConvexitySummary {
        gamma: f64,
        min_second_difference: f64,
        max_abs_log_q: f64,
        slack: f64,
        convexity_tol: f64,
        slack_tol: f64,
        convex: bool,
        slack_ok: bool,
    }
    let summary = ConvexitySummary {
        gamma: trace.gamma,
        min_second_difference: trace.min_second_difference,
        max_abs_log_q: trace.max_abs_log_q,
        slack: trace.slack,
        convexity_tol: d.convexity_tol,
        slack_tol: d.slack_tol,
        convex,
        slack_ok,
    };
    files.push(out.write_json("convexity.json", name, &summary)?);
    let msg = format!("min second difference {:.3e}, slack {:.3e}", trace.min_second_difference, trace.slack);
    Ok(done(name, Status::from_pass(convex && slack_ok), Some(msg), files))
}

pub fn commutator(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "commutator";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let s = ctx.setup;
    let gamma = ctx.weights().gamma;
    let dec = build_sk(s.coef, gamma, &s.a, &s.v, Phase::Quadratic).map_err(stage(name))?;
    let len = ctx.traj.len();
    let picks: Vec<usize> =
        (0..9).map(|k| k * (len - 1) / 8).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut rows = Vec::new();
    let mut worst: Option<f64> = None;
    for k in picks {
        let u = &ctx.traj.fields[k];
        let l =
            weighted_log_norm(u, &WeightProfile::Gaussian { gamma }, Some(DEFAULT_TAIL_TOL)).map_err(stage(name))?;
        let g = u.grid().clone();
        let f = u.mul_pointwise(|p| Complex64::new((gamma * g.radius_sq(p) - l).exp(), 0.0));
        let rep = commutator_form(&dec, &f).map_err(stage(name))?;
        if let Some(gap) = rep.relative_gap() {
            worst = Some(worst.map_or(gap, |w: f64| w.max(gap)));
        }
        rows.push(vec![
            fmt_f64(ctx.traj.times[k]),
            fmt_f64(rep.nested),
            fmt_opt(rep.closed_form),
            fmt_opt(rep.closed_form_alt),
            fmt_opt(rep.relative_gap()),
        ]);
    }
    let header = ["t", "nested", "closed_form", "closed_form_alt", "relative_gap"];
    let files = vec![out.write_csv("commutator.csv", name, &header, &rows)?];
    let tol = ctx.cfg.diagnostics.commutator_tol;
    Ok(match worst {
        Some(w) => done(name, Status::from_pass(w <= tol), Some(format!("max relative gap {w:.3e}")), files),
        None => done(name, Status::Pass, Some("no closed form for this potential".into()), files),
    })
}

pub fn interpolation_bound(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "interpolation_bound";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let rep = interpolation_bound_check(ctx.traj, &ctx.weights(), &ctx.setup.v, BoundOptions::default())
        .map_err(stage(name))?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| [r.t, r.lhs, r.rhs, r.margin, r.lhs_standard, r.rhs_standard, r.margin_standard].map(fmt_f64).to_vec())
        .collect();
    let header = ["t", "lhs", "rhs", "margin", "lhs_standard", "rhs_standard", "margin_standard"];
    let files = vec![
        out.write_csv("interpolation_bound.csv", name, &header, &rows)?,
        out.write_json("interpolation_bound.json", name, &rep)?,
    ];
    let msg = format!("standard slack {:.3e}", rep.standard_slack.abs());
    Ok(done(name, Status::from_pass(rep.pass), Some(msg), files))
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyReport {
    pub start: hardylab_core::weights::HardyEnvelope,
    pub end: hardylab_core::weights::HardyEnvelope,
    /// `beta_hat(u(0)) beta_hat(u(T))`.
    pub endpoint_product: f64,
    /// `4T` when the scenario is the free sharp Gaussian.
    pub expected_product: Option<f64>,
    pub relative_gap: Option<f64>,
    pub static_floor: f64,
}

pub fn hardy(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "hardy";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let start = hardy_envelope(ctx.traj.first()).map_err(stage(name))?;
    let end = hardy_envelope(ctx.traj.last()).map_err(stage(name))?;
    let s = ctx.setup;
    let sharp_free = ctx.cfg.initial.family == Family::SharpGaussian
        && s.coef == hardylab_core::EvolutionCoefficients::schroedinger()
        && s.a.is_zero()
        && s.v.is_zero()
        && s.plan.nonlinearity.is_none();
    let big_t = ctx.traj.t_end() - ctx.traj.t_start();
    let expected_product = sharp_free.then_some(4.0 * big_t);
    let endpoint_product = start.beta_hat * end.beta_hat;
    let relative_gap = expected_product.map(|e| (endpoint_product - e).abs() / e);
    let tol = ctx.cfg.diagnostics.envelope_tol;
    let static_floor = 4.0 * (1.0 - 5e-2);
    let rep = HardyReport { start, end, endpoint_product, expected_product, relative_gap, static_floor };
    let files = vec![out.write_json("hardy.json", name, &rep)?];
    let pass = start.product >= static_floor && end.product >= static_floor && relative_gap.is_none_or(|g| g <= tol);
    let msg =
        format!("endpoint product {endpoint_product:.6}, static products {:.4} / {:.4}", start.product, end.product);
    Ok(done(name, Status::from_pass(pass), Some(msg), files))
}

#[derive(Debug, Clone, Serialize)]
pub struct AppellSummary {
    pub unweighted_gap: f64,
    pub unweighted_expected_exact: bool,
    /// Relative sup gap of the `alpha = beta` map to the source trajectory.
    pub equal_weights_gap: f64,
    pub weighted: Option<hardylab_core::appell::WeightedIdentityReport>,
    pub weighted_error: Option<String>,
    pub max_residual: f64,
}

/// The `alpha = beta` map is the identity up to interpolation roundoff.
pub const EQUAL_WEIGHTS_TOL: f64 = 1e-10;

pub fn appell(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "appell";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let w = ctx.weights();
    let s = ctx.setup;
    let map = AppellMap::new(w.alpha, w.beta, s.coef).map_err(stage(name))?;
    let unweighted = unweighted_identity(ctx.traj, &map, &unit_times(41)).map_err(stage(name))?;
    let same = AppellMap::new(w.alpha, w.alpha, s.coef).map_err(stage(name))?;
    let scale = ctx.traj.first().max_abs();
    let mut equal_weights_gap: f64 = 0.0;
    for t in [0.0, 0.1234, 0.5, 0.9, 1.0] {
        let ut = appell_forward(ctx.traj, &same, t).map_err(stage(name))?;
        let u = ctx.traj.field_at(t).map_err(stage(name))?;
        equal_weights_gap = equal_weights_gap.max(ut.sup_distance(&u).map_err(stage(name))? / scale);
    }
    let (weighted, weighted_error) =
        match weighted_identity(ctx.traj, &map, w.gamma, &unit_times(101), ctx.cfg.diagnostics.appell_window) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let residual = appell_pde_residual(ctx.traj, &map, &s.a, &s.v, ctx.traj.len() - 1).map_err(stage(name))?;
    let rows: Vec<Vec<String>> =
        residual.rows.iter().map(|r| vec![fmt_f64(r.t), fmt_f64(r.relative), fmt_f64(r.scaled)]).collect();
    let mut files = vec![out.write_csv("appell_residual.csv", name, &["t", "relative", "scaled"], &rows)?];
    let exact = s.coef.a == 0.0;
    let summary = AppellSummary {
        unweighted_gap: unweighted.max_gap,
        unweighted_expected_exact: exact,
        equal_weights_gap,
        weighted,
        weighted_error,
        max_residual: residual.max_relative,
    };
    files.push(out.write_json("appell.json", name, &summary)?);
    let d = &ctx.cfg.diagnostics;
    let pass = (!exact || unweighted.max_gap <= d.appell_identity_tol)
        && equal_weights_gap <= EQUAL_WEIGHTS_TOL
        && residual.max_relative <= d.appell_tol;
    let msg = format!(
        "norm transfer gap {:.3e}, equal weights gap {equal_weights_gap:.3e}, residual {:.3e}",
        unweighted.max_gap, residual.max_relative
    );
    Ok(done(name, Status::from_pass(pass), Some(msg), files))
}

pub fn appell_inverse(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "appell_inverse";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let w = ctx.weights();
    let map = AppellMap::new(w.alpha, w.beta, ctx.setup.coef).map_err(stage(name))?;
    let forward = appell_trajectory(ctx.traj, &map, &unit_times(ctx.traj.len())).map_err(stage(name))?;
    let scale = ctx.traj.first().max_abs();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.2, 0.5, 0.77, 1.0] {
        let back = appell_forward(&forward, &map.inverse(), t).map_err(stage(name))?;
        let u = ctx.traj.field_at(t).map_err(stage(name))?;
        let gap = back.sup_distance(&u).map_err(stage(name))? / scale;
        worst = worst.max(gap);
        rows.push(vec![fmt_f64(t), fmt_f64(gap)]);
    }
    let files = vec![out.write_csv("appell_inverse.csv", name, &["t", "relative_sup_gap"], &rows)?];
    let tol = ctx.cfg.diagnostics.appell_tol;
    Ok(done(name, Status::from_pass(worst <= tol), Some(format!("max gap {worst:.3e}")), files))
}

/// Seeds of the Carleman probes, derived from the scenario seed.
pub fn probe_seed(seed: u64, regime: CarlemanRegime, k: usize) -> u64 {
    let r = match regime {
        CarlemanRegime::Schroedinger => 0,
        CarlemanRegime::Parabolic => 1,
    };
    seed.wrapping_mul(1_000_003).wrapping_add(2 * k as u64 + r)
}

/// Time samples of the probes used for the quadratic-form check.
pub const FORM_TIME_SAMPLES: usize = 101;

pub fn carleman(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "carleman";
    let c = ctx.cfg.carleman.clone().unwrap_or_default();
    let g = &ctx.setup.grid;
    let cgrid = Grid::new(g.dim(), c.points, c.half_width, g.components()).map_err(stage(name))?;
    let a = ctx.cfg.build_a(&cgrid)?;
    let params = CarlemanParams::new(c.mu, c.r, c.eps).map_err(stage(name))?.with_variant(c.variant);
    let mut rows = Vec::new();
    let mut form_rows = Vec::new();
    let mut pass = true;
    let mut min_ratio = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut max_refine: f64 = 0.0;
    for &regime in &c.regimes {
        for k in 0..c.probes {
            let seed = probe_seed(ctx.cfg.seed, regime, k);
            let v = make_bump_test_function(&cgrid, c.time_samples, seed).map_err(stage(name))?;
            let rep = carleman_check(&v, &a, &params, regime, c.tol).map_err(stage(name))?;
            let ratio = rep.ratio.unwrap_or(f64::INFINITY);
            min_ratio = min_ratio.min(ratio);
            pass &= rep.pass;
            let mut refine = None;
            if k == 0 {
                let coarse =
                    make_bump_test_function(&cgrid, (c.time_samples - 1) / 2 + 1, seed).map_err(stage(name))?;
                let rc = carleman_check(&coarse, &a, &params, regime, c.tol).map_err(stage(name))?;
                if let (Some(x), Some(y)) = (rc.ratio, rep.ratio) {
                    let gap = (x - y).abs() / y;
                    max_refine = max_refine.max(gap);
                    pass &= gap < 0.02;
                    refine = Some(gap);
                }
            }
            rows.push(vec![
                format!("{regime:?}").to_lowercase(),
                k.to_string(),
                seed.to_string(),
                fmt_f64(rep.ln_lhs),
                fmt_f64(rep.ln_rhs),
                fmt_opt(rep.ratio),
                fmt_f64(rep.time_gap),
                fmt_opt(refine),
                rep.pass.to_string(),
            ]);
            if a.is_constant() {
                let probe = make_bump_test_function(&cgrid, FORM_TIME_SAMPLES, seed).map_err(stage(name))?;
                let form = commutator_lower_bound(&probe, &a, &params, regime).map_err(stage(name))?;
                min_margin = min_margin.min(form.min_margin);
                pass &= form.min_margin >= -1e-8 && form.squares_nonnegative;
                form_rows.push(vec![
                    format!("{regime:?}").to_lowercase(),
                    k.to_string(),
                    fmt_f64(form.min_margin),
                    fmt_f64(form.min_squares_margin),
                    fmt_f64(form.max_derivation_gap),
                    form.squares_nonnegative.to_string(),
                ]);
            }
        }
    }
    let header = ["regime", "probe", "seed", "ln_lhs", "ln_rhs", "ratio", "time_gap", "refinement_gap", "pass"];
    let mut files = vec![out.write_csv("carleman.csv", name, &header, &rows)?];
    if !form_rows.is_empty() {
        let header =
            ["regime", "probe", "min_margin", "min_squares_margin", "max_derivation_gap", "squares_nonnegative"];
        files.push(out.write_csv("carleman_forms.csv", name, &header, &form_rows)?);
    }
    let mut msg = format!("min ratio {min_ratio:.4}, refinement gap {max_refine:.3e}");
    if min_margin.is_finite() {
        msg.push_str(&format!(", min form margin {min_margin:.3e}"));
    }
    let warnings = params.warnings();
    if !warnings.is_empty() {
        msg.push_str(&format!(" ({})", warnings.join("; ")));
    }
    Ok(done(name, Status::from_pass(pass), Some(msg), files))
}

pub fn decay(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "decay";
    if ctx.is_zero() {
        return Ok(degenerate(name, "zero initial data"));
    }
    let s = ctx.setup;
    let g = &s.grid;
    let big_t = ctx.traj.t_end() - ctx.traj.t_start();
    let mut v_sup: f64 = 0.0;
    for &t in &ctx.traj.times {
        for p in 0..g.total_points() {
            v_sup = v_sup.max(op_norm(&s.v.at(p, t)));
        }
    }
    let m_t = big_t * s.coef.kappa() * v_sup;
    let rep = decay_estimate_check(ctx.traj, ctx.weights().gamma, s.coef, m_t, None).map_err(stage(name))?;
    let files = vec![out.write_json("decay.json", name, &rep)?];
    let pass = rep.margin_standard >= -1e-10 * rep.rhs_standard;
    let msg = format!("standard margin {:.3e}", rep.margin_standard);
    Ok(done(name, Status::from_pass(pass), Some(msg), files))
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub alpha: f64,
    pub beta: f64,
    pub product: f64,
    pub inside_region: bool,
    pub start_log_norm: Option<f64>,
    pub end_log_norm: Option<f64>,
    pub candidate: bool,
    pub note: String,
}

pub fn admissibility(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let name = "admissibility";
    let w = ctx.weights();
    let start = resolved_log_norm(ctx.traj.first(), w.beta.powi(-2), DEFAULT_TAIL_TOL)?;
    let end = resolved_log_norm(ctx.traj.last(), w.alpha.powi(-2), DEFAULT_TAIL_TOL)?;
    let inside = w.product_flag();
    let nonzero = !ctx.is_zero();
    let candidate = inside && nonzero && start.is_some() && end.is_some();
    let note = if inside {
        "inside the uniqueness region (alpha beta < 2)".to_string()
    } else {
        "outside the uniqueness region (alpha beta >= 2)".to_string()
    };
    let rep = AdmissibilityReport {
        alpha: w.alpha,
        beta: w.beta,
        product: w.alpha * w.beta,
        inside_region: inside,
        start_log_norm: start,
        end_log_norm: end,
        candidate,
        note: note.clone(),
    };
    let files = vec![out.write_json("admissibility.json", name, &rep)?];
    let status = if candidate { Status::Fail } else { Status::Pass };
    let note = if candidate { format!("{note}: counterexample candidate") } else { note };
    Ok(done(name, status, Some(note), files))
}

pub fn snapshots(ctx: &RunContext, out: &mut OutputTree) -> CliResult<DiagnosticSummary> {
    let every = ctx.cfg.diagnostics.snapshot_every;
    let last = ctx.traj.len() - 1;
    let mut files = Vec::new();
    for (k, f) in ctx.traj.fields.iter().enumerate() {
        if k % every == 0 || k == last {
            files.push(out.write_bytes(&format!("snapshots/u_{k:05}.bin"), "snapshots", &snapshot_bytes(f))?);
        }
    }
    Ok(done("snapshots", Status::Pass, None, files))
}
