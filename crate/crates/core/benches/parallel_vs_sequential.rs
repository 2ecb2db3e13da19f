use chns::exec;
use chns::presets;
use chns::scheme::Scheme;
use chns::state::solve_forward_with;
use chns::verify::smooth_direction;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

/// Independent forward solves along perturbed controls, the inner loop of
/// gradient checks and Taylor tests.
fn forward_batch(c: &mut Criterion) {
    let (n, dt, steps) = (32, 2.5e-3, 20);
    let pb = presets::lid(n, dt, steps).unwrap();
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let controls: Vec<_> = (0..8)
        .map(|_| {
            let mut h = pb.control.clone();
            h.axpy(1e-2, &smooth_direction(pb.cfg.grid, dt, steps, &mut rng));
            h
        })
        .collect();
    let solve = |h: &chns::control::BoundaryControl| {
        solve_forward_with(&scheme, &pb.u0, &pb.phi0, h)
            .unwrap()
            .final_state()
            .phi
            .sum()
    };
    let mut group = c.benchmark_group("forward_batch_8x32x32");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(exec::map(&controls, solve)))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(exec::map_seq(&controls, solve)))
    });
    group.finish();
}

/// One forward solve on a fine grid, where the row-parallel stencil loops
/// engage.
fn single_solve(c: &mut Criterion) {
    let pb = presets::lid(128, 1e-3, 5).unwrap();
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let mut group = c.benchmark_group("forward_128x128");
    group.sample_size(10);
    group.bench_function(
        if exec::is_parallel() {
            "parallel"
        } else {
            "sequential"
        },
        |b| {
            b.iter(|| {
                black_box(solve_forward_with(&scheme, &pb.u0, &pb.phi0, &pb.control).unwrap())
            })
        },
    );
    group.finish();
}

criterion_group!(benches, forward_batch, single_solve);
criterion_main!(benches);
