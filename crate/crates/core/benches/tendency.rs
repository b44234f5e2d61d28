//! Right-hand-side evaluation and RK4 steps, parallel core against the
//! sequential fallback. Build with `--no-default-features` to compile the
//! rayon path out entirely; the `Auto` rows then match `Sequential`.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sqg_core::lattice::RandomState;
use sqg_core::{step_rk4, DirectEvaluator, FastEvaluator, Parallelism, RhsEvaluator};

const MODES: [(&str, Parallelism); 2] = [
    ("parallel", Parallelism::Auto),
    ("sequential", Parallelism::Sequential),
];

fn even_state(n: usize) -> sqg_core::SpectralState {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    RandomState::new(n, n).even_k2_only().with_theta_e(1.0).sample(&mut rng)
}

fn direct(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs_direct");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    for n in [8, 16, 32] {
        let state = even_state(n);
        for (label, par) in MODES {
            let eval = DirectEvaluator::with_parallelism(n, par);
            group.bench_with_input(BenchmarkId::new(label, n), &state, |b, s| {
                b.iter(|| black_box(eval.evaluate(black_box(s))))
            });
        }
    }
    group.finish();
}

fn fast(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs_fast");
    for n in [32, 64, 128] {
        let state = even_state(n);
        for (label, par) in MODES {
            let eval = FastEvaluator::with_parallelism(n, par).unwrap();
            group.bench_with_input(BenchmarkId::new(label, n), &state, |b, s| {
                b.iter(|| black_box(eval.evaluate(black_box(s))))
            });
        }
    }
    group.finish();
}

fn rk4(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step_fast");
    let n = 64;
    let state = even_state(n);
    for (label, par) in MODES {
        let eval = FastEvaluator::with_parallelism(n, par).unwrap();
        group.bench_function(BenchmarkId::new(label, n), |b| {
            b.iter(|| black_box(step_rk4(&eval, black_box(&state), 1e-3).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, direct, fast, rk4);
criterion_main!(benches);
