//! Data-parallel execution over independent work items.
//!
//! With the `parallel` feature (default) work items are spread over the rayon
//! pool; without it everything runs on the calling thread. Results are always
//! returned in index order, so reductions are independent of scheduling.

/// How a batch of independent work items is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when `Parallel` actually fans out (the `parallel` feature is enabled).
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Sizes the global worker pool; `0` keeps one worker per core. Must run
/// before the first parallel call.
#[cfg(feature = "parallel")]
pub fn configure_workers(workers: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().map_err(|e| e.to_string())
}

/// Without the `parallel` feature there is no pool to size.
#[cfg(not(feature = "parallel"))]
pub fn configure_workers(_workers: usize) -> Result<(), String> {
    Ok(())
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indices<T, F>(exec: Execution, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `total` work units into fixed-size batches. Batch boundaries depend
/// only on `total` and `batch`, never on the number of workers.
pub fn batches(total: u64, batch: u64) -> impl Iterator<Item = (u64, u64)> {
    let batch = batch.max(1);
    (0..total.div_ceil(batch)).map(move |b| (b * batch, ((b + 1) * batch).min(total)))
}

pub fn map_batches<T, F>(exec: Execution, total: u64, batch: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64, u64) -> T + Sync + Send,
{
    let bounds: Vec<(u64, u64)> = batches(total, batch).collect();
    map_indices(exec, bounds.len() as u64, |b| {
        let (lo, hi) = bounds[b as usize];
        f(b, lo, hi)
    })
}
