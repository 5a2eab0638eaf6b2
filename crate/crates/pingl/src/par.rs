//! Deterministic data-parallel helpers.
//!
//! Work is always split into the same fixed blocks whether or not the
//! `parallel` feature is enabled, and partial results are combined in block
//! order. Parallel and sequential builds therefore agree bitwise.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Grid rows per work block.
pub const ROW_BLOCK: usize = 16;

/// Elements per block for flat vector reductions.
pub const VEC_BLOCK: usize = 4096;

fn blocks(len: usize, size: usize) -> Vec<Range<usize>> {
    (0..len.div_ceil(size))
        .map(|b| b * size..((b + 1) * size).min(len))
        .collect()
}

/// Evaluates `f` on fixed blocks of `0..len` and returns results in block order.
pub fn map_blocks<T, F>(len: usize, size: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let bs = blocks(len, size);
    #[cfg(feature = "parallel")]
    {
        bs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        bs.into_iter().map(f).collect()
    }
}

/// Sum of `f` over fixed blocks of `0..len`, combined in block order.
pub fn sum_blocks<F>(len: usize, size: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync + Send,
{
    map_blocks(len, size, f).into_iter().sum()
}

/// Component-wise sum of fixed-width partial vectors.
pub fn sum_blocks_n<const N: usize, F>(len: usize, size: usize, f: F) -> [f64; N]
where
    F: Fn(Range<usize>) -> [f64; N] + Sync + Send,
{
    let mut acc = [0.0; N];
    for part in map_blocks(len, size, f) {
        for (a, p) in acc.iter_mut().zip(part) {
            *a += p;
        }
    }
    acc
}

/// Fills `out` block-by-block; `f` receives the global offset of the chunk.
pub fn fill_chunks<T, F>(out: &mut [T], size: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(size)
            .enumerate()
            .for_each(|(b, chunk)| f(b * size, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(size)
            .enumerate()
            .for_each(|(b, chunk)| f(b * size, chunk));
    }
}

/// Like [`fill_chunks`] but each chunk also returns a partial result;
/// partials come back in chunk order.
pub fn map_chunks_mut<T, R, F>(out: &mut [T], size: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(size).enumerate().map(|(b, chunk)| f(b * size, chunk)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(size).enumerate().map(|(b, chunk)| f(b * size, chunk)).collect()
    }
}

/// Ordered map over independent work items (ladder rungs, subsets, seeds).
pub fn map_items<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Dot product with a fixed reduction tree.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_blocks(a.len(), VEC_BLOCK, |r| {
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum()
    })
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    fill_chunks(y, VEC_BLOCK, |off, chunk| {
        for (k, yk) in chunk.iter_mut().enumerate() {
            *yk += alpha * x[off + k];
        }
    });
}

/// Configures the global rayon pool size. No-op in sequential builds.
pub fn set_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_sums_are_ordered() {
        let v: Vec<f64> = (0..10_000).map(|k| (k as f64).sin()).collect();
        let a = dot(&v, &v);
        let b = dot(&v, &v);
        assert_eq!(a.to_bits(), b.to_bits());
        let direct: f64 = v.iter().map(|x| x * x).sum();
        assert!((a - direct).abs() < 1e-9);
    }

    #[test]
    fn blocks_cover_range() {
        let bs = blocks(35, 16);
        assert_eq!(bs, vec![0..16, 16..32, 32..35]);
    }
}
