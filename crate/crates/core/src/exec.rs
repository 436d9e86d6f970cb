//! Worker pools and order-independent parallel fills.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Fixed partition size. Work is split on these boundaries regardless of
/// the worker count, so results never depend on scheduling.
pub(crate) const CHUNK: usize = 1024;

fn pool(n_workers: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let n = n_workers.max(1);
    let mut pools = POOLS
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    pools
        .entry(n)
        .or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .expect("thread pool"),
            )
        })
        .clone()
}

pub(crate) fn try_alloc(len: usize) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    v.try_reserve_exact(len)
        .map_err(|_| Error::Allocation { requested: len })?;
    v.resize(len, 0.0);
    Ok(v)
}

/// Fills `out[i] = f(i)` in parallel; `f` also reports a per-index flag
/// whose total count is returned.
pub(crate) fn fill_indexed<F>(n_workers: usize, out: &mut [f64], f: F) -> usize
where
    F: Fn(usize) -> (f64, bool) + Sync,
{
    pool(n_workers).install(|| fill_chunks(out, &f))
}

fn fill_chunks<F>(out: &mut [f64], f: &F) -> usize
where
    F: Fn(usize) -> (f64, bool) + Sync,
{
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(chunk, slots)| {
            let base = chunk * CHUNK;
            let mut flagged = 0;
            for (offset, slot) in slots.iter_mut().enumerate() {
                let (value, flag) = f(base + offset);
                *slot = value;
                flagged += usize::from(flag);
            }
            flagged
        })
        .sum()
}

/// Runs `f` inside the worker pool for `n_workers`.
pub(crate) fn install<R: Send>(n_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    pool(n_workers).install(f)
}

/// Sample mean and standard error, summed sequentially in index order.
pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std = (ss / (n - 1) as f64).sqrt();
    (mean, std / (n as f64).sqrt())
}
