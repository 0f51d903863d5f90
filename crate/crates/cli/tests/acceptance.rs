//! Acceptance battery: one line per criterion, each checked against oracles
//! computed here rather than by the diagnostics under test.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hardylab_cli::catalog::builtin;
use hardylab_cli::config::{Family, Setup};
use hardylab_cli::diagnostics::probe_seed;
use hardylab_cli::initial::initial_field;
use hardylab_cli::scenarios::frontier_sweep;
use hardylab_cli::verify::{hardy_random, HARDY_RANDOM_FIELDS, HARDY_RANDOM_SEED};
use hardylab_cli::{run_verify, ScenarioConfig};
use hardylab_core::appell::{
    appell_forward, appell_pde_residual, appell_trajectory, unit_times, unweighted_identity, AppellMap,
};
use hardylab_core::carleman::{
    carleman_check, commutator_lower_bound, make_bump_test_function, CarlemanParams, Regime,
};
use hardylab_core::field::{l2_norm, weighted_log_norm, DEFAULT_TAIL_TOL};
use hardylab_core::linalg::hermitian_defect;
use hardylab_core::operators::{build_sk, commutator_form, Phase};
use hardylab_core::propagator::{evolve, free_propagate};
use hardylab_core::weights::{hardy_envelope, q_trace};
use hardylab_core::{
    EvolutionCoefficients, EvolutionPlan, Field, Grid, MatrixPotential, Method, TimePotential, Trajectory,
    WeightProfile,
};
use num_complex::Complex64;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: Option<f64>,
}

fn criterion(id: u32, name: &'static str, budget: Option<f64>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = f();
    let secs = start.elapsed().as_secs_f64();
    let in_budget = budget.is_none_or(|b| secs <= b);
    Outcome { id, name, pass: pass && in_budget, detail, secs, budget }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scenario(name: &str) -> (ScenarioConfig, Setup, Trajectory) {
    let cfg = builtin(name).unwrap();
    let setup = cfg.build().unwrap();
    let u0 = initial_field(&cfg, &setup.grid, setup.weights.as_ref()).unwrap();
    let traj = evolve(&setup.plan, &u0, &setup.a, &setup.v, None).unwrap();
    (cfg, setup, traj)
}

fn sample_at(traj: &Trajectory, t: f64) -> &Field {
    let k = traj.times.iter().position(|&s| (s - t).abs() < 1e-12).unwrap_or_else(|| panic!("no sample at {t}"));
    &traj.fields[k]
}

/// `sum |u|^2 dx` over all components.
fn mass(f: &Field) -> f64 {
    f.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * f.grid().cell_volume()
}

fn component_mass(f: &Field, k: usize) -> f64 {
    f.component(k).iter().map(|z| z.norm_sqr()).sum::<f64>() * f.grid().cell_volume()
}

/// Free solution with data `exp(-A x^2)` in one dimension, `u_t = i u_xx`.
fn free_gaussian_1d(big_a: Complex64, x: f64, t: f64) -> Complex64 {
    let d = c(1.0, 0.0) + c(0.0, 4.0 * t) * big_a;
    (-big_a * x * x / d).exp() / d.sqrt()
}

fn free_gaussian_oracle() -> (bool, String) {
    let (cfg, setup, traj) = scenario("free-gaussian");
    let g = &setup.grid;
    let shape_ok =
        g.dim() == 1 && g.points() == 512 && g.half_width() == 16.0 && cfg.evolution.a == 0.0 && cfg.evolution.b == 1.0;
    let mut worst: f64 = 0.0;
    for t in [0.1, 0.25, 0.5] {
        let u = sample_at(&traj, t);
        for p in 0..g.total_points() {
            let x = g.coords(p)[0];
            worst = worst.max((u.at(p)[0] - free_gaussian_1d(c(1.0, 0.0), x, t)).norm());
        }
    }
    (shape_ok && worst <= 1e-8, format!("sup error {worst:.3e} (tol 1e-8)"))
}

fn unitarity_and_group_law() -> (bool, String) {
    let (cfg, setup, traj) = scenario("unitarity");
    let g = &setup.grid;
    let n = g.components();
    let a = setup.a.constant_matrix().expect("constant A");
    let symmetric = (0..n).all(|i| (0..n).all(|j| a[(i, j)] == a[(j, i)]));
    let real_v = (0..g.total_points()).all(|p| {
        let m = setup.v.at(p, 0.0);
        m.iter().all(|z| z.im == 0.0) && hermitian_defect(&m) == 0.0
    });
    let m0 = mass(traj.first());
    let drift = traj.fields.iter().map(|f| (mass(f).sqrt() - m0.sqrt()).abs() / m0.sqrt()).fold(0.0, f64::max);
    let u0 = traj.first();
    let big_t = cfg.evolution.t_final;
    let mut gap: f64 = 0.0;
    for (t, s) in [(0.1 * big_t, 0.2 * big_t), (0.25 * big_t, 0.5 * big_t), (big_t / 3.0, big_t / 2.0)] {
        let ts =
            free_propagate(&free_propagate(u0, &setup.a, setup.coef, t).unwrap(), &setup.a, setup.coef, s).unwrap();
        let direct = free_propagate(u0, &setup.a, setup.coef, t + s).unwrap();
        gap = gap.max(mass(&ts.sub(&direct).unwrap()).sqrt() / m0.sqrt());
    }
    let pass = n <= 4 && symmetric && real_v && cfg.evolution.steps == 1000 && drift <= 1e-8 && gap <= 1e-10;
    (pass, format!("N = {n}, norm drift {drift:.3e} (tol 1e-8), group gap {gap:.3e} (tol 1e-10)"))
}

fn hardy_sharpness() -> (bool, String) {
    let grid = Grid::new(1, 512, 16.0, 1).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (beta, big_t) in [(2.0, 1.0), (1.0, 0.5)] {
        let big_a = c(1.0 / (beta * beta), 1.0 / (4.0 * big_t));
        let u0 = Field::from_fn(&grid, |x, _| (-big_a * x[0] * x[0]).exp()).unwrap();
        let plan = EvolutionPlan::new(EvolutionCoefficients::schroedinger(), big_t, 1, Method::Exact);
        let traj = evolve(&plan, &u0, &MatrixPotential::zero(&grid), &TimePotential::zero(&grid), None).unwrap();
        let (e0, e1) = (hardy_envelope(&u0).unwrap(), hardy_envelope(traj.last()).unwrap());
        // |u(T)| = (beta / (2 sqrt T)) exp(-beta^2 x^2 / (16 T^2)).
        let widths_ok = (e0.beta_hat - beta).abs() <= 1e-6 * beta && (e1.beta_hat - 4.0 * big_t / beta).abs() <= 1e-6;
        let product = e0.beta_hat * e1.beta_hat;
        let gap = (product - 4.0 * big_t).abs() / (4.0 * big_t);
        pass &= widths_ok && gap <= 2e-2;
        parts.push(format!("(beta, T) = ({beta}, {big_t}): product {product:.6}, gap {gap:.2e}"));
    }
    let rows = hardy_random(HARDY_RANDOM_FIELDS, HARDY_RANDOM_SEED).unwrap();
    let min = rows.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    pass &= rows.len() == 50 && min >= 4.0 * (1.0 - 5e-2);
    parts.push(format!("min static product over 50 random fields {min:.4} (floor 3.8)"));
    (pass, parts.join("; "))
}

/// `Q(t) = ||exp(gamma x^2) u(t)||^2 = |D|^(-1) sqrt(pi / (2 (Re(1/D) - gamma)))`, `D = 1 + 4it`.
fn free_q(gamma: f64, t: f64) -> f64 {
    let d = c(1.0, 4.0 * t);
    (std::f64::consts::PI / (2.0 * ((1.0 / d).re - gamma))).sqrt() / d.norm()
}

fn log_convexity() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, gamma) in [("convexity-g005", 0.05), ("convexity-g01", 0.1)] {
        let (_, setup, traj) = scenario(name);
        assert_eq!(setup.weights.unwrap().gamma, gamma);
        let dec = build_sk(setup.coef, gamma, &setup.a, &setup.v, Phase::Quadratic).unwrap();
        let trace = q_trace(&traj, &dec).unwrap();
        let q_err =
            trace.rows.iter().map(|r| (r.q - free_q(gamma, r.t)).abs() / free_q(gamma, r.t)).fold(0.0, f64::max);
        let log_q: Vec<f64> = trace.rows.iter().map(|r| r.q.ln()).collect();
        let max_abs = log_q.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let min_second = log_q.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::INFINITY, f64::min);
        let (t0, t1) = (traj.t_start(), traj.t_end());
        let (l0, l1) = (log_q[0], log_q[log_q.len() - 1]);
        let slack = traj
            .times
            .iter()
            .zip(&log_q)
            .map(|(&t, &l)| {
                let s = (t - t0) / (t1 - t0);
                l - (1.0 - s) * l0 - s * l1
            })
            .fold(0.0, f64::max);
        pass &= traj.len() == 64 && q_err <= 1e-8 && min_second >= -5e-4 * max_abs && slack <= 1e-3;
        parts.push(format!(
            "gamma {gamma}: Q error {q_err:.1e}, min second difference {min_second:.3e}, slack {slack:.1e}"
        ));
    }
    (pass, parts.join("; "))
}

fn appell_identities() -> (bool, String) {
    let (_, setup, traj) = scenario("appell");
    let g = &setup.grid;
    let coef = setup.coef;
    let map = AppellMap::new(1.0, 2.0, coef).unwrap();
    let unweighted = unweighted_identity(&traj, &map, &unit_times(41)).unwrap().max_gap;

    let same = AppellMap::new(1.5, 1.5, coef).unwrap();
    let mut equal_gap: f64 = 0.0;
    for t in [0.0, 0.1234, 0.5, 0.9, 1.0] {
        let ut = appell_forward(&traj, &same, t).unwrap();
        equal_gap = equal_gap.max(ut.sup_distance(&traj.field_at(t).unwrap()).unwrap());
    }

    // The transform of exp(-x^2) under (1, 2) is the free solution with data
    // 2^(1/4) exp(-(2 - i/4) x^2).
    let mut closed_gap: f64 = 0.0;
    for t in [0.05, 0.3, 0.61, 0.97] {
        let ut = appell_forward(&traj, &map, t).unwrap();
        for p in 0..g.total_points() {
            let x = g.coords(p)[0];
            let exact = 2f64.powf(0.25) * free_gaussian_1d(c(2.0, -0.25), x, t);
            closed_gap = closed_gap.max((ut.at(p)[0] - exact).norm());
        }
    }

    let residual_times = traj.len() - 1;
    let residual = appell_pde_residual(&traj, &map, &setup.a, &setup.v, residual_times).unwrap().max_relative;

    let (_, inv_setup, inv_traj) = scenario("appell-inverse");
    let inv_map = AppellMap::new(1.0, 2.0, inv_setup.coef).unwrap();
    let forward = appell_trajectory(&inv_traj, &inv_map, &unit_times(inv_traj.len())).unwrap();
    let mut inverse_gap: f64 = 0.0;
    for t in [0.0, 0.2, 0.5, 0.77, 1.0] {
        let back = appell_forward(&forward, &inv_map.inverse(), t).unwrap();
        inverse_gap = inverse_gap.max(back.sup_distance(&inv_traj.field_at(t).unwrap()).unwrap());
    }

    let pass = g.points() == 512
        && residual_times == 1024
        && unweighted <= 1e-5
        && equal_gap <= 1e-10
        && closed_gap <= 1e-6
        && inverse_gap <= 1e-4
        && residual <= 1e-4;
    let detail = format!(
        "norm transfer {unweighted:.1e}, alpha = beta {equal_gap:.1e}, closed form {closed_gap:.1e}, \
         inverse pair {inverse_gap:.1e}, PDE residual {residual:.1e}"
    );
    (pass, detail)
}

fn commutator_forms() -> (bool, String) {
    let mut worst_gap: f64 = 0.0;
    for name in ["convexity-g005", "convexity-g01"] {
        let (_, setup, traj) = scenario(name);
        let gamma = setup.weights.unwrap().gamma;
        let dec = build_sk(setup.coef, gamma, &setup.a, &setup.v, Phase::Quadratic).unwrap();
        for k in (0..traj.len()).step_by(7) {
            let u = &traj.fields[k];
            let l = weighted_log_norm(u, &WeightProfile::Gaussian { gamma }, Some(DEFAULT_TAIL_TOL)).unwrap();
            let g = u.grid().clone();
            let f = u.mul_pointwise(|p| c((gamma * g.radius_sq(p) - l).exp(), 0.0));
            let rep = commutator_form(&dec, &f).unwrap();
            let closed = rep.closed_form.expect("closed form for free data");
            worst_gap = worst_gap.max((closed - rep.nested).abs() / closed.abs().max(rep.nested.abs()));
        }
    }

    let grid = Grid::new(1, 256, 4.0, 1).unwrap();
    let zero_a = MatrixPotential::zero(&grid);
    let (mu, r, eps) = (1.0, 2.0, 1.0);
    let params = CarlemanParams::new(mu, r, eps).unwrap();
    let coefficient_ok = (params.lower_bound_coefficient() - eps * r * r / (8.0 * mu)).abs() < 1e-15;
    let mut min_margin = f64::INFINITY;
    let mut probes = 0;
    for regime in [Regime::Schroedinger, Regime::Parabolic] {
        for k in 0..20 {
            let v = make_bump_test_function(&grid, 101, probe_seed(0, regime, k)).unwrap();
            let rep = commutator_lower_bound(&v, &zero_a, &params, regime).unwrap();
            for row in &rep.rows {
                min_margin = min_margin.min((row.nested - row.bound) / row.bound);
            }
            probes += 1;
        }
    }
    let pass = coefficient_ok && probes == 40 && worst_gap <= 1e-5 && min_margin >= -1e-8;
    (pass, format!("closed form gap {worst_gap:.1e} (tol 1e-5), min relative form margin {min_margin:.3e} over {probes} probes"))
}

fn carleman_inequalities() -> (bool, String) {
    let grid = Grid::new(1, 256, 4.0, 1).unwrap();
    let zero_a = MatrixPotential::zero(&grid);
    let params = CarlemanParams::new(1.0, 2.0, 1.0).unwrap();
    let tol = 2e-2;
    let mut min_ratio = f64::INFINITY;
    let mut max_refine: f64 = 0.0;
    let mut count = 0;
    for regime in [Regime::Schroedinger, Regime::Parabolic] {
        for k in 0..20 {
            let seed = probe_seed(1, regime, k);
            let fine = make_bump_test_function(&grid, 801, seed).unwrap();
            let coarse = make_bump_test_function(&grid, 401, seed).unwrap();
            let rf = carleman_check(&fine, &zero_a, &params, regime, tol).unwrap();
            let rc = carleman_check(&coarse, &zero_a, &params, regime, tol).unwrap();
            let ratio_f = (rf.ln_rhs - rf.ln_lhs).exp();
            let ratio_c = (rc.ln_rhs - rc.ln_lhs).exp();
            min_ratio = min_ratio.min(ratio_f);
            max_refine = max_refine.max((ratio_f - ratio_c).abs() / ratio_f);
            count += 1;
        }
    }
    let pass = count == 40 && min_ratio >= 1.0 - tol && max_refine < 2e-2;
    (pass, format!("min RHS/LHS {min_ratio:.4} (floor 0.98), max refinement change {max_refine:.2e} (< 2e-2), 20 probes per regime"))
}

fn frontier_consistency() -> (bool, String) {
    let cfg = builtin("frontier").unwrap();
    let setup = cfg.build().unwrap();
    let rep = frontier_sweep(&cfg, &setup).unwrap();
    let f = cfg.frontier.as_ref().unwrap();
    let lattice_ok = f.alphas.len() == 5 && f.betas.len() == 5 && f.families.len() == 3 && rep.rows.len() == 75;
    let inside: usize = rep.rows.iter().filter(|r| r.product < 2.0).count();
    // Measured finiteness must imply analytic finiteness. Gaussian-type data of
    // width w stay finite at the start iff beta > w; at T = 1 the modulus
    // decays like exp(-x^2 Re(A/D)), A = 1/w^2, D = 1 + 4iA.
    let mut spurious = 0;
    for r in &rep.rows {
        let (start_ok, end_ok) = match r.family {
            Family::Gaussian | Family::HermiteGaussian => {
                let big_a = c(1.0 / (r.width * r.width), 0.0);
                let rate = (big_a / (c(1.0, 0.0) + c(0.0, 4.0) * big_a)).re;
                (r.beta > r.width, 1.0 / (r.alpha * r.alpha) < rate)
            }
            _ => (false, false),
        };
        if (r.start_log_norm.is_some() && !start_ok) || (r.end_log_norm.is_some() && !end_ok) {
            spurious += 1;
        }
    }
    let product_ok = (rep.sharp.endpoint_product - 4.0).abs() <= 2e-2 * 4.0;
    let pass = lattice_ok && rep.candidates == 0 && spurious == 0 && rep.sharp.survives && product_ok;
    let detail = format!(
        "{} candidates among {inside} inside-region points, {spurious} norms finite against the analytic decay, \
         sharp Gaussian survives: {} (endpoint product {:.6})",
        rep.candidates, rep.sharp.survives, rep.sharp.endpoint_product
    );
    (pass, detail)
}

fn system_oscillation() -> (bool, String) {
    let (_, setup, traj) = scenario("system-n2");
    let a = setup.a.constant_matrix().expect("constant A");
    let coupling_ok = a[(0, 0)] == 0.0 && a[(1, 1)] == 0.0 && a[(0, 1)] == 1.0 && a[(1, 0)] == 1.0;
    // exp(i t [[0, 1], [1, 0]]) (g, 0) = (cos t g, i sin t g).
    let total0 = mass(traj.first());
    let mut oracle_gap: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for (&t, f) in traj.times.iter().zip(&traj.fields) {
        let total = mass(f);
        drift = drift.max((total - total0).abs() / total0);
        oracle_gap = oracle_gap.max((component_mass(f, 0) / total0 - t.cos().powi(2)).abs());
        oracle_gap = oracle_gap.max((component_mass(f, 1) / total0 - t.sin().powi(2)).abs());
    }
    let g_mass = (std::f64::consts::PI / 2.0).sqrt();
    let mass_ok = (total0 - g_mass).abs() <= 1e-12;
    let norm_ok = (l2_norm(traj.last()) - g_mass.sqrt()).abs() <= 1e-8;
    let pass = coupling_ok && mass_ok && norm_ok && oracle_gap <= 1e-6 && drift <= 1e-8;
    (pass, format!("cos^2/sin^2 gap {oracle_gap:.1e} (tol 1e-6), total norm drift {drift:.1e} (tol 1e-8)"))
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ma = run_verify(&a, Some(2)).unwrap();
    let mb = run_verify(&b, Some(1)).unwrap();
    let (ta, tb) = (tree(&a), tree(&b));
    let identical = ta == tb;
    let pass = identical && ma.passed() && mb.passed();
    let failed: Vec<&str> = ma.diagnostics.iter().filter(|d| !d.status.is_ok()).map(|d| d.name.as_str()).collect();
    (pass, format!("{} files, byte-identical: {identical}, battery status {:?} {failed:?}", ta.len(), ma.status))
}

#[test]
fn acceptance_criteria() {
    let outcomes = vec![
        criterion(1, "free Gaussian oracle", Some(5.0), free_gaussian_oracle),
        criterion(2, "unitarity and group law", Some(10.0), unitarity_and_group_law),
        criterion(3, "Hardy sharpness", Some(30.0), hardy_sharpness),
        criterion(4, "log-convexity", Some(20.0), log_convexity),
        criterion(5, "Appell identities", Some(60.0), appell_identities),
        criterion(6, "commutator forms", Some(30.0), commutator_forms),
        criterion(7, "Carleman inequalities", Some(60.0), carleman_inequalities),
        criterion(8, "frontier consistency", Some(90.0), frontier_consistency),
        criterion(9, "system oscillation", Some(10.0), system_oscillation),
        criterion(10, "determinism", None, determinism),
    ];
    let mut stdout = std::io::stdout().lock();
    for o in &outcomes {
        let budget = o.budget.map_or(String::new(), |b| format!(" / {b} s"));
        writeln!(
            stdout,
            "acceptance {:>2} {:<26} {} ({:.2} s{budget}) {}",
            o.id,
            o.name,
            if o.pass { "PASS" } else { "FAIL" },
            o.secs,
            o.detail
        )
        .unwrap();
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
