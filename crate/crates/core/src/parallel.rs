//! Order-preserving parallel maps over path indices.

use rayon::prelude::*;

/// Evaluate `f(0), ..., f(n - 1)` in parallel, returning results in index order.
pub fn map_indexed<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(n: u64, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync + Send,
{
    let results: Vec<Result<T, E>> = (0..n).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Run `f` on a dedicated pool of `workers` threads (0 = machine default).
pub fn with_workers<T, F>(workers: usize, f: F) -> crate::Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::Usage(format!("cannot start {workers} worker threads: {e}")))?;
    Ok(pool.install(f))
}
