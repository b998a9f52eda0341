use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use simplexdyn::aitchison::{clr, sfm};
use simplexdyn::jko::{jko_step, QuantileDensity};
use simplexdyn::replicator::integrate_replicator;
use simplexdyn::sde::{run_ensemble, InitialLaw};
use simplexdyn::stats::energy_distance_with_se;
use simplexdyn::{ContrastMatrix, DriftKind, OdeConfig, SdeConfig};
use simplexdyn_bench::{decomposable_game, spread_composition};

fn chart(c: &mut Criterion) {
    let mut group = c.benchmark_group("chart");
    for n in [3usize, 8, 32] {
        let psi = ContrastMatrix::new(n).unwrap();
        let p = spread_composition(n);
        let x = psi.ilr(&p).unwrap();
        group.bench_with_input(BenchmarkId::new("ilr", n), &n, |b, _| b.iter(|| psi.ilr(black_box(&p)).unwrap()));
        group.bench_with_input(BenchmarkId::new("ilr_inv", n), &n, |b, _| b.iter(|| psi.ilr_inv(black_box(&x)).unwrap()));
        let v = clr(&p).unwrap();
        group.bench_with_input(BenchmarkId::new("sfm", n), &n, |b, _| b.iter(|| sfm(black_box(v.as_slice()))));
    }
    group.finish();
}

fn replicator(c: &mut Criterion) {
    let a = decomposable_game(3, 2.0);
    let p0 = spread_composition(3);
    let cfg = OdeConfig::new(10.0, 1e-2, 10).unwrap();
    c.bench_function("replicator rk4 1000 steps n=3", |b| b.iter(|| integrate_replicator(&a, black_box(&p0), &cfg).unwrap()));
}

fn ensemble(c: &mut Criterion) {
    let drift = DriftKind::replicator(&decomposable_game(3, 3.0));
    let init = InitialLaw::Dirichlet(vec![1.0; 3]);
    let cfg = SdeConfig::new(2f64.sqrt(), 1.0, 1e-3, 7).unwrap();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    group.bench_function("euler-maruyama 1000 paths x 1000 steps", |b| b.iter(|| run_ensemble(&drift, &init, &cfg, 1000).unwrap()));
    group.finish();
}

fn jko(c: &mut Criterion) {
    let q = QuantileDensity::gaussian(0.0, 1.0, 1000).unwrap();
    c.bench_function("jko step m=1000", |b| b.iter(|| jko_step(black_box(&q), 0.01).unwrap()));
}

fn energy(c: &mut Criterion) {
    let xs: Vec<Vec<f64>> = (0..1000).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
    let ys: Vec<Vec<f64>> = (0..1000).map(|i| vec![(i as f64 * 0.23).cos(), (i as f64 * 0.53).sin()]).collect();
    c.bench_function("energy distance 1000x1000 d=2", |b| b.iter(|| energy_distance_with_se(black_box(&xs), black_box(&ys), 20).unwrap()));
}

criterion_group!(benches, chart, replicator, ensemble, jko, energy);
criterion_main!(benches);
