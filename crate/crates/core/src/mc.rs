//! Replication driver shared by the Monte Carlo checks.
//!
//! Replications are processed in fixed-size chunks. Each chunk folds its
//! replications sequentially and chunks are merged in index order, so results
//! are bit-identical regardless of the number of worker threads.

use rayon::prelude::*;

use crate::rng::replication_seed;
use crate::Result;

const CHUNK: usize = 32;

/// Fold `count` replications into an accumulator.
///
/// `step` receives the replication index and its derived seed.
pub fn fold_replications<A, I, S, M>(
    count: usize,
    base_seed: u64,
    init: I,
    step: S,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, usize, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = count.div_ceil(CHUNK);
    let partial: Vec<Result<A>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for r in (c * CHUNK)..((c + 1) * CHUNK).min(count) {
                step(&mut acc, r, replication_seed(base_seed, r as u64))?;
            }
            Ok(acc)
        })
        .collect();
    let mut out = init();
    for p in partial {
        merge(&mut out, p?);
    }
    Ok(out)
}

/// Run `count` replications and collect their outputs in index order.
pub fn collect_replications<T, F>(count: usize, base_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|r| f(r, replication_seed(base_seed, r as u64)))
        .collect()
}
