//! Index-parallel map used by the data-parallel stages.
//!
//! With the `parallel` feature (default) work is spread over the rayon pool;
//! without it the same closure runs sequentially. Output order is the index
//! order in both cases, so results never depend on the thread count.

#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference; always available so benches can compare both paths.
pub fn map_indices_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Cap the global worker pool. `0` keeps the library default.
#[cfg(feature = "parallel")]
pub fn init_threads(threads: usize) {
    if threads > 0 {
        // Fails only if the pool was already built; the existing pool is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads(_threads: usize) {}
