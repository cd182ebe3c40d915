//! Index-ordered map used for every trial ensemble.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! otherwise it runs sequentially. Results always come back in index order,
//! so downstream reductions are bitwise identical in both builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential reference used by benchmarks and equivalence tests.
pub fn map_indexed_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Like [`map_indexed`] for fallible work; the first error by index wins.
pub fn try_map_indexed<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(count, f).into_iter().collect()
}

pub fn backend() -> &'static str {
    if cfg!(feature = "parallel") {
        "rayon"
    } else {
        "sequential"
    }
}
