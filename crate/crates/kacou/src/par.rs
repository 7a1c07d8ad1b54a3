//! Worker pool bounded by `KACOU_THREADS`.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var("KACOU_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("failed to build worker pool")
    })
}

pub fn num_threads() -> usize {
    pool().current_num_threads()
}

/// Evaluates `f(0..n)` in parallel; output order is the index order.
pub fn par_map<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    pool().install(|| (0..n).into_par_iter().map(&f).collect())
}
