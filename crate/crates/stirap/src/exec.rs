//! Data-parallel execution helpers.
//!
//! All parallel work in this crate goes through [`map_indexed`], which maps a
//! function over `0..n` and collects the results in index order. With the
//! `parallel` feature the map runs on the current rayon pool; without it the
//! loop is sequential. Either way the output vector is identical, and any
//! reduction over it uses [`pairwise_sum`], whose association order depends
//! only on the slice length — so numeric results do not depend on thread
//! count or feature selection.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}

/// Sum with a fixed pairwise association order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
