//! Serial / data-parallel execution switch.
//!
//! Every batch loop in the crate goes through [`ExecMode::map_indexed`], which
//! always returns results in index order. Without the `parallel` feature the
//! parallel mode silently runs serially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Serial,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Applies `f` to `0..n` and collects results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            ExecMode::Serial => (0..n).map(f).collect(),
            ExecMode::Parallel => par_map(n, f),
        }
    }

    /// True when this mode actually fans out work across threads.
    pub fn is_parallel(self) -> bool {
        self == ExecMode::Parallel && cfg!(feature = "parallel")
    }
}

/// Sizes the global worker pool. Returns false when the pool was already
/// initialized or the crate was built without the `parallel` feature.
pub fn init_thread_pool(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_on_order() {
        let serial = ExecMode::Serial.map_indexed(100, |i| i * i);
        let parallel = ExecMode::Parallel.map_indexed(100, |i| i * i);
        assert_eq!(serial, parallel);
        assert_eq!(serial[7], 49);
    }
}
