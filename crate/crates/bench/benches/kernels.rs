use std::hint::black_box;

use bdlp_core::config_space::QuasiObservable;
use bdlp_core::vlasov::Convolver;
use bdlp_core::{
    picard_solve, rk4_solve, run_trajectory, DiscreteKernel, Field, HierarchyOps, ModelParams,
    OperatorId, PicardSettings, VlasovSystem,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn convolution(c: &mut Criterion) {
    let p = ModelParams::canonical();
    let mut group = c.benchmark_group("convolution");
    for sites in [256usize, 1024, 4096] {
        let kernel = DiscreteKernel::discretize(&p.a_minus, p.domain_length, sites).unwrap();
        let conv = Convolver::new(&kernel);
        let f = Field::sinusoid(1.0, 0.5, 3, p.domain_length, sites).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(sites), &sites, |b, _| {
            b.iter(|| conv.apply(black_box(f.values())))
        });
    }
    group.finish();
}

fn vlasov(c: &mut Criterion) {
    let p = ModelParams::canonical();
    let sys = VlasovSystem::new(&p).unwrap();
    let rho0 = Field::sinusoid(1.0, 0.5, 2, p.domain_length, p.grid_size).unwrap();
    let mut group = c.benchmark_group("vlasov");
    group.sample_size(10);
    group.bench_function("rk4", |b| b.iter(|| rk4_solve(&sys, black_box(&rho0), 0.2, 1e-3).unwrap()));
    let settings = PicardSettings::new(0.2, 1e-3);
    group.bench_function("picard", |b| b.iter(|| picard_solve(&sys, black_box(&rho0), &settings).unwrap()));
    group.finish();
}

fn gillespie(c: &mut Criterion) {
    let mut group = c.benchmark_group("gillespie");
    group.sample_size(10);
    for eps in [0.2, 0.05] {
        let p = ModelParams { eps, ..ModelParams::canonical() };
        let rho0 = Field::constant(1.0, p.domain_length, p.grid_size).unwrap();
        group.bench_with_input(BenchmarkId::new("trajectory", eps), &eps, |b, _| {
            b.iter(|| run_trajectory(&p, &rho0, 0.05, &[0.05], black_box(11)).unwrap())
        });
    }
    group.finish();
}

fn operators(c: &mut Criterion) {
    let p = ModelParams::canonical();
    let ops = HierarchyOps::new(&p, 16, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = QuasiObservable::random(ops.space(), 0, 2, &mut rng);
    let mut group = c.benchmark_group("operators");
    for id in [OperatorId::A1, OperatorId::A2, OperatorId::B1, OperatorId::B2, OperatorId::LRen] {
        group.bench_function(id.name(), |b| b.iter(|| ops.apply_component(id, black_box(&g)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, convolution, vlasov, gillespie, operators);
criterion_main!(benches);
