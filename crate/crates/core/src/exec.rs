//! Executor abstraction so the std companion can run per-frame work on a
//! thread pool while the kernels stay `no_std`.

use alloc::vec::Vec;

/// Maps a function over a slice, returning results in input order.
///
/// Implementations may evaluate items concurrently but must return results
/// positionally, so any reduction performed by the caller is order-stable.
pub trait Executor: Sync {
    fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}
