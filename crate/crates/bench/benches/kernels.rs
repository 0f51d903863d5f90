use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hardylab_bench::{bump_potential, coupling, gaussian};
use hardylab_core::appell::Resampler;
use hardylab_core::carleman::{carleman_schrodinger_check, make_bump_test_function, CarlemanParams};
use hardylab_core::field::{forward_transform, inverse_transform};
use hardylab_core::propagator::StrangStepper;
use hardylab_core::{EvolutionCoefficients, Grid, MatrixPotential};

fn transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform_round_trip");
    for (dim, points) in [(1, 1024), (1, 4096), (2, 128)] {
        let grid = Grid::new(dim, points, 16.0, 2).unwrap();
        let u = gaussian(&grid).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{dim}d-{points}")), &u, |b, u| {
            b.iter(|| inverse_transform(&forward_transform(black_box(u))))
        });
    }
    group.finish();
}

fn strang(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    for components in [1, 3] {
        let grid = Grid::new(1, 1024, 16.0, components).unwrap();
        let u = gaussian(&grid).unwrap();
        let stepper = StrangStepper::new(
            &coupling(&grid).unwrap(),
            &bump_potential(&grid).unwrap(),
            EvolutionCoefficients::schroedinger(),
            1e-3,
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(components), &u, |b, u| {
            b.iter(|| stepper.step(black_box(u), 0.0).unwrap())
        });
    }
    group.finish();
}

fn resample(c: &mut Criterion) {
    let grid = Grid::new(1, 1024, 32.0, 1).unwrap();
    let u = gaussian(&grid).unwrap();
    let mut r = Resampler::default();
    c.bench_function("resample_1024", |b| b.iter(|| r.resample(black_box(&u), 0.7).unwrap()));
}

fn carleman(c: &mut Criterion) {
    let grid = Grid::new(1, 256, 4.0, 1).unwrap();
    let v = make_bump_test_function(&grid, 801, 1).unwrap();
    let a = MatrixPotential::zero(&grid);
    let params = CarlemanParams::new(1.0, 2.0, 1.0).unwrap();
    c.bench_function("carleman_check_256x801", |b| {
        b.iter(|| carleman_schrodinger_check(black_box(&v), &a, &params).unwrap())
    });
}

criterion_group!(benches, transform, strang, resample, carleman);
criterion_main!(benches);
