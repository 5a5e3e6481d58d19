//! Seeded Monte Carlo plumbing: one ChaCha stream per sample index, fixed
//! chunking, and an in-order reduction so results do not depend on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::flow::CoverPoint;

/// Samples per work unit.
pub const CHUNK: u64 = 2048;

/// Stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point on the base surface with `n_squares` squares, at index zero.
pub fn uniform_point<R: Rng>(rng: &mut R, n_squares: usize) -> CoverPoint {
    let sq = rng.random_range(0..n_squares);
    CoverPoint::new(sq, rng.random::<f64>(), rng.random::<f64>())
}

/// Resolve the worker count: explicit value, else `ZDCOVER_WORKERS`, else
/// the available parallelism.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| {
            std::env::var("ZDCOVER_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run `step(acc, sample_index, rng)` for every sample in `0..n`. Each chunk
/// of [`CHUNK`] samples starts from `init()`; chunk results are folded into
/// the first in chunk order with `merge`.
pub fn ensemble<A, I, S, M>(n: u64, seed: u64, workers: usize, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64, &mut ChaCha8Rng) + Sync,
    M: Fn(&mut A, A),
{
    let n_chunks = n.div_ceil(CHUNK);
    let run_chunk = |c: u64| {
        let mut acc = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let mut rng = sample_rng(seed, i);
            step(&mut acc, i, &mut rng);
        }
        acc
    };
    let parts: Vec<A> = if workers <= 1 {
        (0..n_chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect())
    };
    let mut it = parts.into_iter();
    let mut total = it.next().unwrap_or_else(&init);
    for p in it {
        merge(&mut total, p);
    }
    total
}

/// Collect one value per sample, in sample order.
pub fn collect<T, S>(n: u64, seed: u64, workers: usize, f: S) -> Vec<T>
where
    T: Send,
    S: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    ensemble(
        n,
        seed,
        workers,
        Vec::new,
        |acc: &mut Vec<T>, i, rng| acc.push(f(i, rng)),
        |acc, mut part| acc.append(&mut part),
    )
}
