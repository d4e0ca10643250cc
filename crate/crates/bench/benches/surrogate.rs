use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surrogate_core::latent::{LatentSpec, SeedSet};
use surrogate_core::optim::{cmaes_u, CmaesParams};
use surrogate_core::special::betaincinv;
use surrogate_core::structure::{kabsch_rmsd, tm_score};
use surrogate_core::{
    dominance_experiment, synthetic_cone, ChartKind, DominanceConfig, SpaceObjective, Structure, SurrogateSpace, UPoint,
    WeightVector,
};

fn lol_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("lol");
    for d in [4_096, 65_536] {
        let seeds = SeedSet::sample(LatentSpec::gaussian(d).unwrap(), 10, 1).unwrap();
        let w = WeightVector::from_clamped((1..=10).map(|i| i as f64).collect());
        let z = seeds.lol_combine(&w).unwrap();
        group.bench_with_input(BenchmarkId::new("combine", d), &d, |b, _| b.iter(|| seeds.lol_combine(black_box(&w)).unwrap()));
        group.bench_with_input(BenchmarkId::new("invert", d), &d, |b, _| b.iter(|| seeds.lol_invert(black_box(&z)).unwrap()));
    }
    let sphere = SeedSet::sample(LatentSpec::sphere(4_096).unwrap(), 10, 2).unwrap();
    let w = WeightVector::from_clamped(vec![1.0; 10]);
    group.bench_function("combine_sphere/4096", |b| b.iter(|| sphere.lol_combine(black_box(&w)).unwrap()));
    group.finish();
}

fn charts(c: &mut Criterion) {
    let mut group = c.benchmark_group("chart_forward");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in [10, 91] {
        let u = UPoint::new((0..k - 1).map(|_| rng.random_range(0.01..0.99)).collect()).unwrap();
        for chart in [ChartKind::Angular, ChartKind::KnotheRosenblatt] {
            group.bench_with_input(BenchmarkId::new(chart.to_string(), k), &u, |b, u| b.iter(|| chart.forward(black_box(u)).unwrap()));
        }
    }
    group.finish();
    c.bench_function("betaincinv(0.5, 45, p)", |b| b.iter(|| betaincinv(0.5, 45.0, black_box(0.731)).unwrap()));
}

fn grid(c: &mut Criterion) {
    let space =
        SurrogateSpace::new(SeedSet::sample(LatentSpec::gaussian(4_096).unwrap(), 3, 4).unwrap(), ChartKind::KnotheRosenblatt).unwrap();
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    group.bench_function("64x64/D4096", |b| b.iter(|| space.grid(black_box(&[64]), &[]).unwrap()));
    group.finish();
}

fn optimise(c: &mut Criterion) {
    let spec = LatentSpec::gaussian(512).unwrap();
    let (seeds, mut cone) = synthetic_cone(&spec, 10, 5).unwrap();
    let space = SurrogateSpace::new(seeds, ChartKind::KnotheRosenblatt).unwrap();
    let mut group = c.benchmark_group("optimise");
    group.sample_size(10);
    group.bench_function("cmaes_u/cone/B200", |b| {
        b.iter(|| {
            let mut objective = SpaceObjective::new(&space, &mut cone);
            cmaes_u(&mut objective, space.dim(), 200, 0, CmaesParams::default()).unwrap()
        })
    });
    group.bench_function("dominance/K10/D100/20x100", |b| {
        let cfg = DominanceConfig { n_seed_realisations: 20, ..DominanceConfig::new(10, 100, 0) };
        b.iter(|| dominance_experiment(black_box(&cfg), false).unwrap())
    });
    group.finish();
}

fn structure(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut random = || {
        Structure::new("r", (0..126).map(|_| [rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)]).collect())
            .unwrap()
    };
    let (a, b) = (random(), random());
    c.bench_function("kabsch_rmsd/126", |bench| bench.iter(|| kabsch_rmsd(black_box(&a), black_box(&b)).unwrap()));
    c.bench_function("tm_score/126", |bench| bench.iter(|| tm_score(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, lol_map, charts, grid, optimise, structure);
criterion_main!(benches);
