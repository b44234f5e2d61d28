//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the loops below are distributed by rayon.
//! Every helper partitions work by output element (or fixed-size chunk), so
//! results are bitwise identical for any worker count, including the
//! sequential path.

/// How the inner loops of an evaluator are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// rayon when the `parallel` feature is on, otherwise sequential.
    #[default]
    Auto,
    Sequential,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Auto
    }
}

/// Applies `f` to consecutive `chunk`-sized pieces of `data`, passing the chunk index.
pub fn for_each_chunk<T, F>(par: Parallelism, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = par;
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Like [`for_each_chunk`], with one scratch value per worker built by `init`.
pub fn for_each_chunk_with<T, S, I, F>(par: Parallelism, data: &mut [T], chunk: usize, init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each_init(&init, |s, (i, c)| f(s, i, c));
        return;
    }
    let _ = par;
    let mut scratch = init();
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(&mut scratch, i, c));
}

/// Maps `f` over `0..len`, collecting in index order.
pub fn map_indices<R, F>(par: Parallelism, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..len).map(f).collect()
}
