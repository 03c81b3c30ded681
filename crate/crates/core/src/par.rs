//! Data-parallel loop helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run sequentially. Reductions always use a fixed chunking and combine
//! partial results in chunk order, so results are bit-identical between the
//! two builds and independent of the rayon thread count.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by the reductions.
pub const REDUCE_CHUNK: usize = 4096;

/// Name of the active execution mode, used in bench ids and logs.
pub const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

/// Calls `f(row_index, row)` for each consecutive `row_len` chunk of `data`.
pub fn for_each_row<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
}

/// Like [`for_each_row`] but walks two equally-chunked buffers in lockstep.
pub fn for_each_row_zip<T, U, F>(a: &mut [T], a_len: usize, b: &mut [U], b_len: usize, f: F)
where
    T: Send,
    U: Send,
    F: Fn(usize, &mut [T], &mut [U]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(a_len)
        .zip(b.par_chunks_mut(b_len))
        .enumerate()
        .for_each(|(j, (ra, rb))| f(j, ra, rb));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(a_len)
        .zip(b.chunks_mut(b_len))
        .enumerate()
        .for_each(|(j, (ra, rb))| f(j, ra, rb));
}

/// Maps `f` over `0..n` and collects the results in index order.
pub fn map_collect<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

fn chunk_ranges(len: usize, chunk: usize) -> impl Iterator<Item = Range<usize>> + Clone {
    let chunk = chunk.max(1);
    (0..len.div_ceil(chunk)).map(move |c| c * chunk..((c + 1) * chunk).min(len))
}

/// Deterministic sum of `f(range)` over fixed-size chunks of `0..len`.
pub fn sum_chunked<F>(len: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    let ranges: Vec<Range<usize>> = chunk_ranges(len, REDUCE_CHUNK).collect();
    let partial = map_collect(ranges.len(), |c| f(ranges[c].clone()));
    partial.into_iter().sum()
}

/// Deterministic dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_chunked(a.len(), |r| {
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum()
    })
}

/// Maximum of `f(range)` over chunks; `f64::NEG_INFINITY` for empty input.
pub fn max_chunked<F>(len: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    let ranges: Vec<Range<usize>> = chunk_ranges(len, REDUCE_CHUNK).collect();
    map_collect(ranges.len(), |c| f(ranges[c].clone()))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential_chunk_order() {
        let v: Vec<f64> = (0..10_000).map(|i| (i as f64).sin() * 1e3).collect();
        let expected: f64 = v
            .chunks(REDUCE_CHUNK)
            .map(|c| c.iter().sum::<f64>())
            .sum();
        let got = sum_chunked(v.len(), |r| v[r].iter().sum());
        assert_eq!(got.to_bits(), expected.to_bits());
    }

    #[test]
    fn rows_visit_every_chunk_once() {
        let mut v = vec![0usize; 12];
        for_each_row(&mut v, 4, |j, row| row.iter_mut().for_each(|x| *x += j + 1));
        assert_eq!(v, [1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]);
    }

    #[test]
    fn empty_reductions() {
        assert_eq!(sum_chunked(0, |_| 1.0), 0.0);
        assert_eq!(max_chunked(0, |_| 1.0), f64::NEG_INFINITY);
    }
}
