//! Data-parallel execution with an order-preserving map and a sequential mode.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Parallel,
    Sequential,
}

static MODE: AtomicU8 = AtomicU8::new(0);

pub fn set_mode(mode: ExecMode) {
    MODE.store(
        match mode {
            ExecMode::Parallel => 0,
            ExecMode::Sequential => 1,
        },
        Ordering::SeqCst,
    );
}

/// Current mode; always `Sequential` without the `parallel` feature.
pub fn mode() -> ExecMode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::SeqCst) == 0 {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

/// `items.iter().map(f)` with results in input order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode() == ExecMode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// `(0..n).map(f)` with results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode() == ExecMode::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Runs `f` on a pool of `jobs` workers (or the global pool for `None`).
pub fn with_jobs<R, F>(jobs: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(j) = jobs {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
        {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}
