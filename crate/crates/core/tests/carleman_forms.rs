use hardylab_core::carleman::{
    carleman_check, carleman_parabolic_check, carleman_schrodinger_check, commutator_lower_bound,
    make_bump_test_function, CarlemanParams, Regime, WeightVariant,
};
use hardylab_core::field::{gradient, inner_product};
use hardylab_core::{Error, Grid, MatrixPotential};
use num_complex::Complex64;

fn grid() -> Grid {
    Grid::new(1, 256, 4.0, 1).unwrap()
}

fn constant_a(grid: &Grid, c: f64) -> MatrixPotential {
    MatrixPotential::constant(grid, nalgebra::DMatrix::from_element(1, 1, c)).unwrap()
}

#[test]
fn nested_form_matches_completed_squares() {
    let g = grid();
    let a = constant_a(&g, -0.4);
    let v = make_bump_test_function(&g, 101, 5).unwrap();
    for variant in [WeightVariant::Shifted, WeightVariant::Centered] {
        let p = CarlemanParams::new(0.8, 3.0, 0.5).unwrap().with_variant(variant);
        for regime in [Regime::Schroedinger, Regime::Parabolic] {
            let rep = commutator_lower_bound(&v, &a, &p, regime).unwrap();
            assert!(rep.max_derivation_gap < 1e-8, "{variant:?} {regime:?}: {}", rep.max_derivation_gap);
            assert!(rep.squares_nonnegative);
            assert!(rep.min_margin >= -1e-8);
        }
    }
}

#[test]
fn centered_weights_reproduce_the_squares_sum() {
    let g = grid();
    let v = make_bump_test_function(&g, 101, 9).unwrap();
    let p = CarlemanParams::new(1.0, 2.0, 1.0).unwrap().with_variant(WeightVariant::Centered);
    for regime in [Regime::Schroedinger, Regime::Parabolic] {
        let rep = commutator_lower_bound(&v, &MatrixPotential::zero(&g), &p, regime).unwrap();
        for row in &rep.rows {
            assert!((row.nested - row.squares_sum).abs() <= 1e-8 * row.nested.abs(), "{regime:?} t = {}", row.t);
        }
    }
}

#[test]
fn shifted_weights_exceed_the_squares_sum() {
    let g = grid();
    let v = make_bump_test_function(&g, 101, 9).unwrap();
    let p = CarlemanParams::new(1.0, 2.0, 1.0).unwrap();
    let rep = commutator_lower_bound(&v, &MatrixPotential::zero(&g), &p, Regime::Schroedinger).unwrap();
    // Leftover constant (r^2 + 1 + eps) / (8 mu) against eps r^2 / (8 mu).
    assert!((p.remainder() - 6.0 / 8.0).abs() < 1e-15);
    for row in &rep.rows {
        assert!(row.nested > row.squares_sum);
    }
}

#[test]
fn zero_drift_collapse() {
    let g = grid();
    let v = make_bump_test_function(&g, 101, 2).unwrap();
    let p = CarlemanParams::new(1.0, 0.0, 1.0).unwrap().with_variant(WeightVariant::Centered);
    let rep = commutator_lower_bound(&v, &MatrixPotential::zero(&g), &p, Regime::Schroedinger).unwrap();
    for row in &rep.rows {
        assert_eq!(row.bound, 0.0);
        let f = v.fields[v.times.iter().position(|&t| t == row.t).unwrap()].clone();
        let logs: Vec<f64> = (0..g.total_points()).map(|q| p.kappa(&[g.coords(q)[0]], row.t)).collect();
        let shift = logs
            .iter()
            .zip(0..)
            .filter(|&(_, q)| f.at(q)[0].norm() > 0.0)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let f = f.mul_pointwise(|q| Complex64::new((logs[q] - shift).exp(), 0.0));
        let x2 = f.mul_pointwise(|q| Complex64::new(g.radius_sq(q), 0.0));
        let d = &gradient(&f)[0];
        let expected = 32.0 * inner_product(&x2, &f).unwrap().re + 8.0 * inner_product(d, d).unwrap().re;
        assert!((row.nested - expected).abs() <= 1e-8 * expected, "{} vs {expected}", row.nested);
    }
}

#[test]
fn schrodinger_inequality_on_probes() {
    let g = grid();
    let a = constant_a(&g, 0.3);
    let p = CarlemanParams::new(1.0, 2.0, 1.0).unwrap();
    for seed in 0..5 {
        let v = make_bump_test_function(&g, 801, seed).unwrap();
        let rep = carleman_schrodinger_check(&v, &a, &p).unwrap();
        assert!(rep.pass && rep.ratio.unwrap() >= 1.0 - 1e-2, "{rep:?}");
    }
}

#[test]
fn parabolic_inequality_on_probe_suite() {
    let g = grid();
    let a = MatrixPotential::zero(&g);
    let p = CarlemanParams::new(1.0, 4.0, 0.5).unwrap();
    for seed in 0..20 {
        let v = make_bump_test_function(&g, 801, 100 + seed).unwrap();
        let rep = carleman_parabolic_check(&v, &a, &p).unwrap();
        assert!(rep.ratio.unwrap() >= 1.0 - 1e-2, "seed {seed}: {rep:?}");
    }
}

#[test]
fn ratio_is_homogeneous() {
    let g = grid();
    let a = MatrixPotential::zero(&g);
    let p = CarlemanParams::new(0.5, 3.0, 0.5).unwrap();
    let v = make_bump_test_function(&g, 801, 4).unwrap();
    for regime in [Regime::Schroedinger, Regime::Parabolic] {
        let r1 = carleman_check(&v, &a, &p, regime, 2e-2).unwrap().ratio.unwrap();
        let r2 = carleman_check(&v.scaled(Complex64::new(2.0, 0.0)), &a, &p, regime, 2e-2).unwrap().ratio.unwrap();
        let r3 = carleman_check(&v.scaled(Complex64::new(0.0, -7.5)), &a, &p, regime, 2e-2).unwrap().ratio.unwrap();
        assert!((r1 - r2).abs() <= 1e-10 * r1);
        assert!((r1 - r3).abs() <= 1e-10 * r1);
    }
}

#[test]
fn ratio_is_stable_under_time_refinement() {
    let g = grid();
    let a = MatrixPotential::zero(&g);
    let p = CarlemanParams::new(1.0, 2.0, 1.0).unwrap();
    for regime in [Regime::Schroedinger, Regime::Parabolic] {
        let coarse = make_bump_test_function(&g, 401, 8).unwrap();
        let fine = make_bump_test_function(&g, 801, 8).unwrap();
        let rc = carleman_check(&coarse, &a, &p, regime, 2e-2).unwrap().ratio.unwrap();
        let rf = carleman_check(&fine, &a, &p, regime, 2e-2).unwrap().ratio.unwrap();
        assert!((rc - rf).abs() < 0.02 * rf, "{regime:?}: {rc} vs {rf}");
    }
}

#[test]
fn coarse_lattice_is_unresolved() {
    let g = grid();
    let v = make_bump_test_function(&g, 21, 1).unwrap();
    let p = CarlemanParams::new(1.0, 2.0, 1.0).unwrap();
    let err = carleman_schrodinger_check(&v, &MatrixPotential::zero(&g), &p).unwrap_err();
    assert!(matches!(err, Error::Unresolved(_)), "{err:?}");
}

#[test]
fn two_dimensional_system_probe() {
    let g = Grid::new(2, 256, 4.0, 2).unwrap();
    let a = MatrixPotential::constant(&g, nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, -0.1])).unwrap();
    let v = make_bump_test_function(&g, 21, 12).unwrap();
    let p = CarlemanParams::new(0.5, 2.0, 1.0).unwrap();
    let rep = commutator_lower_bound(&v, &a, &p, Regime::Parabolic).unwrap();
    assert!(rep.max_derivation_gap < 1e-8, "{}", rep.max_derivation_gap);
    assert!(rep.min_margin >= -1e-8);
}
