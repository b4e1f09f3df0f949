//! Index-parallel map with a sequential fallback.
//!
//! Output order always follows the index, so switching the `parallel` feature
//! or the pool size never changes results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many units of work a sweep stays on the calling thread.
#[cfg(feature = "parallel")]
pub(crate) const PAR_THRESHOLD: usize = 512;

pub(crate) fn map_indexed<T, F>(n: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if work >= PAR_THRESHOLD && n > 1 {
        return (0..n).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = work;
    (0..n).map(f).collect()
}
