//! Worker-count control for the parallel entry points.

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `workers` threads, or on the global rayon
/// pool when `workers` is `None`.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("workers", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
