//! Data-parallel helpers with a sequential fallback.
//!
//! Building the `parallel` feature (default) dispatches to rayon; without it
//! everything runs sequentially. Both paths produce bit-identical results:
//! work is split per index, each index is computed independently, and
//! reductions always fold in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f)` collected in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sequential reference for [`map_indexed`]; used by benches and the
/// parallel-equals-sequential tests.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Apply `f` to equal-length mutable row chunks of `out` in parallel.
/// Each row is owned by exactly one call, so the write pattern is
/// deterministic.
#[cfg(feature = "parallel")]
pub fn for_each_row<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    out.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    for (i, row) in out.chunks_mut(row_len).enumerate() {
        f(i, row);
    }
}

/// Sequential reference for [`for_each_row`].
pub fn for_each_row_seq<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    for (i, row) in out.chunks_mut(row_len).enumerate() {
        f(i, row);
    }
}
