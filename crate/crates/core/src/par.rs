//! Row-parallel execution helpers.
//!
//! With the `parallel` feature the closures fan out over rayon; without it the
//! same closures run in order on the calling thread. Reductions always collect
//! one partial sum per row and combine them in a fixed pairwise order, so the
//! result is bitwise identical whatever the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f(row_index, row)` to every `row_len`-sized chunk of `data`.
pub(crate) fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Apply `f` to consecutive blocks of `rows_per_block` rows (the last block may be shorter).
pub(crate) fn for_each_block_mut<T, F>(data: &mut [T], row_len: usize, rows_per_block: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    let chunk = row_len * rows_per_block.max(1);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).for_each(f);
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).for_each(|block| f(block));
}

pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

/// Deterministic sum of `f(row)` over `n` rows.
pub(crate) fn sum_rows<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    pairwise_sum(&map_range(n, f))
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Number of worker threads the library will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Size the global worker pool. Has no effect without the `parallel` feature,
/// and only the first call in a process can take effect.
pub fn init_thread_pool(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
