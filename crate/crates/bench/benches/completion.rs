use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use completability::completion::{ihtsvd, truncate_svd_rank_r};
use completability::model::{gaussian_matrix, observe, random_factorization};
use completability::patterns::gen_uniform_random;
use completability::polysys::{build_system, search_solutions};
use completability::seeding::rng_from_seed;

fn truncation(c: &mut Criterion) {
    let mut group = c.benchmark_group("truncate_svd");
    for &d in &[50usize, 100, 200] {
        let x = gaussian_matrix(d, d, &mut rng_from_seed(1));
        group.bench_with_input(BenchmarkId::from_parameter(d), &x, |b, x| b.iter(|| truncate_svd_rank_r(x, 5).unwrap()));
    }
    group.finish();
}

fn iterative(c: &mut Criterion) {
    let mut rng = rng_from_seed(2);
    let (d, r) = (100, 5);
    let x = random_factorization(d, d, r, &mut rng).unwrap().matrix();
    let pm = observe(&x, &gen_uniform_random(d, d, d / 2, &mut rng).unwrap()).unwrap();
    let mut group = c.benchmark_group("ihtsvd");
    group.sample_size(10);
    group.bench_function("d100_r5_p0.5_20iters", |b| b.iter(|| ihtsvd(&pm, r, Some(20), Some(0.0)).unwrap()));
    group.finish();
}

fn multistart(c: &mut Criterion) {
    let mut rng = rng_from_seed(3);
    let (d, r) = (8, 2);
    let mask = gen_uniform_random(d, r * (d - r), r + 1, &mut rng).unwrap();
    let x = random_factorization(d, mask.cols(), r, &mut rng).unwrap().matrix();
    let cs = build_system(&observe(&x, &mask).unwrap(), r).unwrap();
    let mut group = c.benchmark_group("search_solutions");
    group.sample_size(10);
    group.bench_function("d8_r2_50restarts", |b| {
        b.iter(|| search_solutions(&cs, 50, &mut rng_from_seed(4), 1e-8).unwrap())
    });
    group.finish();
}

criterion_group!(benches, truncation, iterative, multistart);
criterion_main!(benches);
