//! Thread-pool executor for the core runners.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use polarlab_core::exec::Executor;
use rayon::prelude::*;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "POLARLAB_THREADS";

/// Worker count: the flag, then the environment, then the machine.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, String> {
    if let Some(n) = flag {
        return if n == 0 { Err("--threads must be at least 1".into()) } else { Ok(n) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Order-preserving parallel map on a dedicated rayon pool, with optional
/// progress lines on standard error.
pub struct Pool {
    pool: rayon::ThreadPool,
    label: Option<String>,
}

impl Pool {
    pub fn new(threads: usize) -> Result<Pool, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| format!("cannot start worker pool: {e}"))?;
        Ok(Pool { pool, label: None })
    }

    /// Reports completed work units under `label` on standard error.
    pub fn with_progress(mut self, label: impl Into<String>) -> Pool {
        self.label = Some(label.into());
        self
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        let total = items.len();
        let done = AtomicUsize::new(0);
        let label = self.label.as_deref();
        self.pool.install(|| {
            items
                .into_par_iter()
                .map(|x| {
                    let r = f(x);
                    if let Some(label) = label {
                        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if total >= 64 && (k == total || k % (total / 4).max(1) == 0) {
                            let _ = writeln!(std::io::stderr(), "{label}: {k}/{total} units");
                        }
                    }
                    r
                })
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order_for_any_thread_count() {
        for t in [1, 2, 4] {
            let p = Pool::new(t).unwrap();
            let out = p.map((0..1000u64).collect(), |x| x * x);
            assert_eq!(out, (0..1000u64).map(|x| x * x).collect::<Vec<_>>());
        }
    }

    #[test]
    fn explicit_flag_wins() {
        assert_eq!(resolve_threads(Some(3)).unwrap(), 3);
        assert!(resolve_threads(Some(0)).is_err());
    }
}
