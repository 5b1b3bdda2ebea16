use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hypodecay_core::functionals::QuadratureGrid;
use hypodecay_core::matrix::{normalize_system, FPSystem};
use hypodecay_core::propagator::{standard_normal_density, DensityState, GaussianMixture};
use hypodecay_core::verifier::{default_time_grid, run_trajectory, TrajectoryOptions};
use nalgebra::DMatrix;

fn quadrature(c: &mut Criterion) {
    let grid = QuadratureGrid::new(3, 40).unwrap();
    let f = DensityState::Mixture(GaussianMixture::shifted(&[0.5, -0.2, 0.1]));
    let integrand = |x: &[f64]| {
        let r = f.density(x) / standard_normal_density(x);
        r * r.ln()
    };
    let mut g = c.benchmark_group("quadrature_3d");
    g.bench_function("parallel", |b| b.iter(|| black_box(grid.integrate(integrand))));
    g.bench_function("sequential", |b| b.iter(|| black_box(grid.integrate_sequential(integrand))));
    g.finish();
}

fn trajectory(c: &mut Criterion) {
    let d = DMatrix::identity(2, 2);
    let drift = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let ns = normalize_system(&FPSystem::new(d, drift, 1e-9).unwrap()).unwrap();
    let f0 = DensityState::Mixture(GaussianMixture::shifted(&[0.0, 0.5]));
    let times = default_time_grid(10.0, 40).unwrap();
    let mut g = c.benchmark_group("trajectory_2d");
    g.sample_size(10);
    for parallel in [true, false] {
        let mut opts = TrajectoryOptions::new(1.5, DMatrix::identity(2, 2), times.clone());
        opts.parallel = parallel;
        let name = if parallel { "parallel" } else { "sequential" };
        g.bench_function(name, |b| b.iter(|| black_box(run_trajectory(&ns, &f0, &f0, &opts).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, quadrature, trajectory);
criterion_main!(benches);
