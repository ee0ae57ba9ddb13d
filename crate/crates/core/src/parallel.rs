//! Declared worker count and deterministic work splitting.
//!
//! Work is split into `workers` contiguous shares, each with a seed derived
//! from `(seed, worker index)`, so a fixed worker count always reproduces
//! the same result regardless of how the OS schedules the threads.

use std::env;

pub const THREADS_ENV: &str = "SANN_THREADS";

/// Worker count from `SANN_THREADS`; 1 when unset or unparsable.
pub fn declared_workers() -> usize {
    env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or(1)
}

/// Splits `total` into `workers` shares differing by at most one.
pub fn shares(total: usize, workers: usize) -> Vec<usize> {
    let workers = workers.max(1);
    let base = total / workers;
    let extra = total % workers;
    (0..workers).map(|k| base + usize::from(k < extra)).collect()
}

/// Stack size for deeply recursive jobs such as tree builds.
pub const DEEP_STACK: usize = 256 << 20;

/// Runs `job(worker_index)` on `workers` scoped threads and returns the
/// results in worker order.
pub fn run_workers<R, F>(workers: usize, job: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    let workers = workers.max(1);
    if workers == 1 {
        return vec![job(0)];
    }
    spawn_all(workers, None, &job)
}

fn spawn_all<R, F>(workers: usize, stack: Option<usize>, job: &F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|k| {
                let mut b = std::thread::Builder::new();
                if let Some(size) = stack {
                    b = b.stack_size(size);
                }
                b.spawn_scoped(s, move || job(k)).expect("failed to spawn worker")
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn chunked<I, R, F>(items: &[I], workers: usize, stack: Option<usize>, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    let sizes = shares(items.len(), workers);
    let mut starts = Vec::with_capacity(workers);
    let mut acc = 0;
    for s in &sizes {
        starts.push(acc);
        acc += s;
    }
    let job = |k: usize| {
        let lo = starts[k];
        (lo..lo + sizes[k]).map(|i| f(i, &items[i])).collect::<Vec<_>>()
    };
    if workers == 1 && stack.is_none() {
        return job(0);
    }
    spawn_all(workers, stack, &job).into_iter().flatten().collect()
}

/// Maps `f` over `items` using `workers` threads, preserving input order.
pub fn map_ordered<I, R, F>(items: &[I], workers: usize, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Sync,
{
    chunked(items, workers, None, f)
}

/// [`map_ordered`] on threads with [`DEEP_STACK`] bytes of stack, even for a
/// single worker.
pub fn map_ordered_deep<I, R, F>(items: &[I], workers: usize, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Sync,
{
    chunked(items, workers, Some(DEEP_STACK), f)
}

/// Splits `trials` across workers with seeds derived from `(seed, worker)`
/// and sums the `(hits, trials)` pairs the job reports.
pub(crate) fn split_trials<F>(trials: u64, seed: u64, workers: usize, job: F) -> (u64, u64)
where
    F: Fn(u64, &mut crate::rng::Rng) -> (u64, u64) + Sync,
{
    let workers = workers.max(1);
    let base = trials / workers as u64;
    let extra = trials % workers as u64;
    run_workers(workers, |k| {
        let n = base + u64::from((k as u64) < extra);
        let mut g = crate::rng::rng(crate::rng::derive(seed, k as u64));
        job(n, &mut g)
    })
    .into_iter()
    .fold((0, 0), |(a, b), (h, n)| (a + h, b + n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_cover_total() {
        assert_eq!(shares(10, 3), vec![4, 3, 3]);
        assert_eq!(shares(2, 4), vec![1, 1, 0, 0]);
        assert_eq!(shares(5, 0), vec![5]);
    }

    #[test]
    fn map_ordered_preserves_order() {
        let items: Vec<usize> = (0..17).collect();
        let out = map_ordered(&items, 4, |i, x| i * 100 + x);
        assert_eq!(out, (0..17).map(|i| i * 101).collect::<Vec<_>>());
        assert_eq!(map_ordered_deep(&items, 1, |i, x| i * 100 + x), out);
        assert_eq!(map_ordered_deep(&items, 3, |i, x| i * 100 + x), out);
    }
}
