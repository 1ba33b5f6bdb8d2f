//! Data-parallel helpers with a sequential fallback. Results always come back
//! in input order, so callers stay deterministic either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

pub(crate) fn flat_map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Vec<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().flat_map_iter(f).collect();
    }
    let _ = parallel;
    items.iter().flat_map(f).collect()
}

pub(crate) fn sort_by<T, F>(items: &mut [T], parallel: bool, cmp: F)
where
    T: Send,
    F: Fn(&T, &T) -> std::cmp::Ordering + Sync,
{
    #[cfg(feature = "parallel")]
    if parallel {
        items.par_sort_by(cmp);
        return;
    }
    let _ = parallel;
    items.sort_by(cmp);
}

/// Whether this build can run anything in parallel.
pub fn available() -> bool {
    cfg!(feature = "parallel")
}
