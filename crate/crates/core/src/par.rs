//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these run on rayon; without it they
//! are plain iterator loops. Every helper returns results in input order, and
//! reductions go through fixed-size chunks combined sequentially, so output
//! never depends on the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for order-stable reductions.
pub const REDUCE_CHUNK: usize = 4096;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
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

/// Folds each `REDUCE_CHUNK`-sized block of `0..n` with `fold`, then combines
/// the block results left to right with `combine`.
pub fn chunked_reduce<A, F, C>(n: usize, init: A, fold: F, combine: C) -> A
where
    A: Clone + Send + Sync,
    F: Fn(A, usize) -> A + Sync + Send,
    C: Fn(A, A) -> A,
{
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partials = map_range(chunks, |c| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(n);
        (start..end).fold(init.clone(), &fold)
    });
    partials.into_iter().fold(init, combine)
}

/// Runs `f` with at most `workers` threads. `None` or `0` uses the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match workers {
            Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(f),
                Err(e) => {
                    log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                    f()
                }
            },
            _ => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential() {
        let n = 3 * REDUCE_CHUNK + 17;
        let got = chunked_reduce(n, 0u64, |acc, i| acc + i as u64, |a, b| a + b);
        assert_eq!(got, (0..n as u64).sum::<u64>());
    }

    #[test]
    fn worker_count_does_not_change_float_sums() {
        let n = 50_000;
        let sum = |w| {
            with_workers(Some(w), || {
                chunked_reduce(n, 0.0f64, |acc, i| acc + (i as f64).sqrt().sin(), |a, b| a + b)
            })
        };
        assert_eq!(sum(1).to_bits(), sum(3).to_bits());
    }
}
