use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use completability::combinatorics::{check_cond_ii_exact, min_surplus};
use completability::patterns::{gen_example5_staircase, gen_uniform_random};
use completability::seeding::rng_from_seed;

fn exhaustive(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_cond_ii_exact");
    for &(d, r) in &[(12usize, 2usize), (16, 2), (20, 2)] {
        let mask = gen_uniform_random(d, d - r, r + 1, &mut rng_from_seed(1)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_r{r}")), &mask, |b, m| {
            b.iter(|| check_cond_ii_exact(m, r).unwrap())
        });
    }
    group.finish();
}

fn surplus(c: &mut Criterion) {
    let mask = gen_example5_staircase(14, 2).unwrap().select(&(0..12).collect::<Vec<_>>()).unwrap();
    c.bench_function("min_surplus_staircase_12cols", |b| b.iter(|| min_surplus(&mask).unwrap()));
}

criterion_group!(benches, exhaustive, surplus);
criterion_main!(benches);
