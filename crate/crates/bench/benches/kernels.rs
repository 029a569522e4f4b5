use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rapsa_bench::{full_memory, linear_problem, random_vector, zeros};
use rapsa_core::engine::{rapsa_iteration, IterationDraws};
use rapsa_core::problems::block_minibatch_gradient;
use rapsa_core::{BatchMode, SelectionState};

fn two_loop(c: &mut Criterion) {
    let mut g = c.benchmark_group("two_loop_step");
    for &(dim, tau) in &[(16, 10), (64, 10), (256, 10), (64, 50)] {
        let mem = full_memory(dim, tau);
        let grad = random_vector(dim, 7);
        g.bench_with_input(BenchmarkId::new(format!("tau{tau}"), dim), &dim, |b, _| {
            b.iter(|| mem.two_loop_step(black_box(&grad)).unwrap())
        });
    }
    g.finish();
}

fn block_gradient(c: &mut Criterion) {
    let problem = linear_problem(1024, 10_240);
    let mut g = c.benchmark_group("block_gradient");
    for &blocks in &[16usize, 64, 256] {
        let x = zeros(1024, blocks);
        let batch: Vec<usize> = (0..10).map(|k| k * 997 % 10_240).collect();
        g.bench_with_input(BenchmarkId::new("L10", blocks), &blocks, |b, _| {
            b.iter(|| block_minibatch_gradient(&problem, black_box(&x), 3, &batch).unwrap())
        });
    }
    g.finish();
}

fn iteration(c: &mut Criterion) {
    let problem = linear_problem(1024, 10_240);
    let mut g = c.benchmark_group("rapsa_iteration");
    for &(processors, blocks) in &[(16usize, 64usize), (16, 16)] {
        let mut x = zeros(1024, blocks);
        let mut sel = SelectionState::from_seed(0, 0, processors, 10).unwrap();
        g.bench_with_input(
            BenchmarkId::new(format!("I{processors}"), blocks),
            &blocks,
            |b, _| {
                b.iter(|| {
                    let draws =
                        IterationDraws::draw(&mut sel, blocks, 10_240, BatchMode::PerProcessor)
                            .unwrap();
                    rapsa_iteration(&problem, &mut x, 1e-3, &draws, None).unwrap();
                })
            },
        );
    }
    g.finish();
}

criterion_group!(benches, two_loop, block_gradient, iteration);
criterion_main!(benches);
