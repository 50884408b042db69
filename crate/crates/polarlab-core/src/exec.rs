//! Order-preserving map over independent work units.
//!
//! Long-running computations take an executor so a caller with threads can
//! spread the units out. Results always come back in input order and every
//! reduction happens on the calling side, so the output never depends on the
//! executor.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

/// Splits `0..n` into consecutive chunks of at most `size`.
pub fn chunks(n: u64, size: u64) -> Vec<(u64, u64)> {
    let size = size.max(1);
    let mut out = Vec::new();
    let mut a = 0;
    while a < n {
        let b = (a + size).min(n);
        out.push((a, b));
        a = b;
    }
    out
}
