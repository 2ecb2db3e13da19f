//! Data-parallel helpers. With the `parallel` feature (default) these run on
//! the rayon pool; without it they fall back to plain loops. Results are
//! identical either way: every item is computed independently and collected
//! in input order, and no floating-point reduction crosses item boundaries.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
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
        map_seq(items, f)
    }
}

/// Sequential map, always available (used by benches for comparison).
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Apply `f(row_index, row)` to each consecutive `width`-sized row of `data`.
pub fn rows_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        // small grids are faster sequentially
        if data.len() >= 1 << 14 {
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(j, r)| f(j, r));
            return;
        }
    }
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(j, r)| f(j, r));
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
