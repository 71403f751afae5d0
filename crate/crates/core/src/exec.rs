//! Ordered data-parallel map with a sequential fallback.

use crate::error::{Error, Result};

/// Applies `f` to every item and returns the results in input order.
///
/// `workers = None` uses the global rayon pool, `Some(1)` runs inline and
/// any other count gets a dedicated pool of that size. Without the
/// `parallel` feature everything runs inline.
#[cfg(feature = "parallel")]
pub fn map_ordered<I, T, F>(items: Vec<I>, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    use rayon::prelude::*;

    match workers {
        Some(0) => Err(Error::InvalidParameter("workers must be >= 1".into())),
        Some(1) => Ok(items.into_iter().map(f).collect()),
        None => Ok(items.into_par_iter().map(f).collect()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numeric(format!("could not start worker pool: {e}")))?;
            Ok(pool.install(|| items.into_par_iter().map(&f).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<I, T, F>(items: Vec<I>, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    if workers == Some(0) {
        return Err(Error::InvalidParameter("workers must be >= 1".into()));
    }
    Ok(items.into_iter().map(f).collect())
}

/// True when this build evaluates work items on several threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
