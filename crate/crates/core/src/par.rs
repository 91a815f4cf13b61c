//! Deterministic data-parallel helpers.
//!
//! Element loops are split into a fixed number of chunks that does not depend
//! on the thread count; chunk results are combined sequentially in chunk
//! order. The parallel build therefore produces bit-identical sums to the
//! sequential fallback, and reruns are reproducible at any `--threads`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed chunk count for deterministic reductions.
pub const CHUNKS: usize = 64;

/// Execution strategy selector. `Parallel` falls back to sequential when the
/// crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl ExecMode {
    /// Default mode: parallel when compiled in.
    pub fn auto() -> ExecMode {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    let chunks = CHUNKS.min(n.max(1));
    let base = n / chunks;
    let rem = n % chunks;
    let mut out = Vec::with_capacity(chunks);
    let mut start = 0;
    for c in 0..chunks {
        let len = base + usize::from(c < rem);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// Sum of `f(i)` for `i in 0..n`, chunk-wise. Within a chunk the sum is a
/// plain left fold; chunk subtotals are added in chunk order.
pub fn indexed_sum<F>(n: usize, mode: ExecMode, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let ranges = chunk_ranges(n);
    let fold = |&(lo, hi): &(usize, usize)| -> f64 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    let partials: Vec<f64> = match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => ranges.par_iter().map(fold).collect(),
        _ => ranges.iter().map(fold).collect(),
    };
    partials.iter().sum()
}

/// Per-chunk accumulation of vector-valued contributions, combined in chunk
/// order: `emit(i, buf)` adds element i's contribution into `buf`.
pub fn indexed_accumulate<F>(n: usize, len: usize, mode: ExecMode, emit: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let ranges = chunk_ranges(n);
    let fold = |&(lo, hi): &(usize, usize)| -> Vec<f64> {
        let mut buf = vec![0.0; len];
        for i in lo..hi {
            emit(i, &mut buf);
        }
        buf
    };
    let partials: Vec<Vec<f64>> = match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => ranges.par_iter().map(fold).collect(),
        _ => ranges.iter().map(fold).collect(),
    };
    let mut out = vec![0.0; len];
    for part in &partials {
        for (o, p) in out.iter_mut().zip(part) {
            *o += p;
        }
    }
    out
}

/// Elementwise map producing a Vec in index order.
pub fn indexed_map<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}
