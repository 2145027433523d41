use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rkld_core::extremal::sup_over_ball;
use rkld_core::{levy_distance, refine_until, robust_kld, Cdf, LevyBall, StepCdf};

fn spread(n: usize) -> StepCdf {
    let pairs = (0..n).map(|k| (-3.0 + 6.0 * k as f64 / n as f64, 1.0 / n as f64)).collect();
    StepCdf::from_pairs(pairs).unwrap()
}

fn solver(c: &mut Criterion) {
    let ball = LevyBall::new(Cdf::standard_normal(), 0.05).unwrap();
    let mut group = c.benchmark_group("robust_kld");
    for n in [1, 10, 100, 1000] {
        let mu = spread(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &mu, |b, mu| b.iter(|| robust_kld(black_box(mu), &ball)));
    }
    group.finish();

    let mixture = Cdf::mixture(vec![0.5, 0.5], vec![Cdf::normal(-1.0, 0.5).unwrap(), Cdf::normal(1.0, 0.5).unwrap()]).unwrap();
    c.bench_function("refine_until/mixture", |b| b.iter(|| refine_until(black_box(&mixture), &ball, 1e-6).unwrap()));
    c.bench_function("sup_over_ball/5 atoms", |b| b.iter(|| sup_over_ball(black_box(&spread(5)), 0.05, &ball, &[]).unwrap()));
}

fn levy(c: &mut Criterion) {
    let normal = Cdf::standard_normal();
    let shifted = Cdf::normal(0.3, 1.2).unwrap();
    let step = Cdf::from(spread(100));
    c.bench_function("levy_distance/normal-normal", |b| b.iter(|| levy_distance(black_box(&normal), &shifted)));
    c.bench_function("levy_distance/step-normal", |b| b.iter(|| levy_distance(black_box(&step), &normal)));
}

criterion_group!(benches, solver, levy);
criterion_main!(benches);
