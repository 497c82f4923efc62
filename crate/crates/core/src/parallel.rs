//! Thin data-parallel helpers.
//!
//! With the default `parallel` feature these dispatch to rayon; without it
//! they fall back to plain sequential iteration. Every helper is restricted
//! to element-wise maps and order-independent reductions so results are
//! bitwise identical for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n` and collect the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Apply `f` to every element of a mutable slice, passing its index.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Fold `f(i)` over `0..n` with a selection function that must be
/// associative, commutative, and total (use explicit index tie-breaks).
pub fn reduce_indexed<T, F, R>(n: usize, f: F, reduce: R) -> Option<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
    R: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce_with(reduce)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).reduce(reduce)
    }
}
