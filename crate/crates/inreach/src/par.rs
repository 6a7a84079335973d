//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers use rayon unless parallelism was
//! switched off at runtime with [`set_parallel`]. Results are always returned
//! in input order, so callers see identical output either way.

use std::sync::atomic::{AtomicBool, Ordering};

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Enables or disables parallel execution for the whole process.
pub fn set_parallel(on: bool) {
    ENABLED.store(on, Ordering::SeqCst);
}

/// True when the helpers currently fan out over threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::SeqCst)
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() && items.len() > 1 {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}
