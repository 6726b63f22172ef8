//! Order-preserving data-parallel map. Uses rayon with the `parallel` feature and
//! falls back to a plain loop without it.

use crate::error::{Error, Result};

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Maps `f` over `items`, keeping input order in the output.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_seq(items, f)
}

pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Runs `op` with at most `workers` threads available to [`map`].
/// `None` keeps the global default.
#[cfg(feature = "parallel")]
pub fn with_workers<R, F>(workers: Option<usize>, op: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(op()),
        Some(0) => Err(Error::Config("worker count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(op))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R, F>(workers: Option<usize>, op: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if workers == Some(0) {
        return Err(Error::Config("worker count must be positive".into()));
    }
    Ok(op())
}
