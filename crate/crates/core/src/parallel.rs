//! Thread-pool helpers. All parallel work in the crate collects results by
//! index, so outputs do not depend on the number of threads.

use rayon::ThreadPoolBuilder;

use crate::error::{invalid, Result};

/// Run `f` on a dedicated pool with `threads` workers (0 = rayon default).
pub fn with_threads<T, F>(threads: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool =
        ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
