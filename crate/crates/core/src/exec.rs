//! Execution helpers. With the `parallel` feature the loops run on the rayon
//! pool, otherwise sequentially. Results never depend on the thread count.

use std::sync::OnceLock;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "WAVESYNC_THREADS";

static CONFIGURED: OnceLock<usize> = OnceLock::new();

/// Sizes the global pool from `WAVESYNC_THREADS` (if set). Safe to call more
/// than once; only the first call has an effect. Returns the thread count.
pub fn init_from_env() -> usize {
    *CONFIGURED.get_or_init(|| {
        let requested = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        init_pool(requested)
    })
}

#[cfg(feature = "parallel")]
fn init_pool(requested: Option<usize>) -> usize {
    if let Some(n) = requested {
        // Fails only if a global pool already exists; keep whatever is there.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn init_pool(_requested: Option<usize>) -> usize {
    1
}

/// Runs `f` on a dedicated pool of `threads` workers. Without the `parallel`
/// feature this just calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// `(0..n).map(f).collect()`, in parallel when available. Output order is
/// always index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Folds `0..n` into accumulators and merges them. `merge` must be
/// associative and commutative for the result to be schedule independent
/// (integer counts are; floating-point sums are not).
pub fn fold_range<A, I, F, M>(n: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, usize) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().fold(&init, &fold).reduce(&init, &merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &merge;
        (0..n).fold(init(), fold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn fold_range_counts() {
        let total = fold_range(1000, || 0u64, |acc, i| acc + i as u64, |a, b| a + b);
        assert_eq!(total, 999 * 1000 / 2);
    }
}
