//! Batch-axis parallelism with a hard determinism guarantee.
//!
//! The `RCNET_THREADS` environment variable caps how many worker threads the
//! convolution kernels may use (default 1; read once per process). Results
//! are bitwise independent of the thread count: work is only ever split along
//! the batch axis into disjoint output regions, and any cross-sample
//! reduction happens sequentially in sample order afterwards.

use std::sync::OnceLock;

/// Worker thread cap from `RCNET_THREADS`, clamped to `>= 1`. Unset, empty or
/// unparsable values mean 1.
pub fn thread_count() -> usize {
    static COUNT: OnceLock<usize> = OnceLock::new();
    *COUNT.get_or_init(|| {
        std::env::var("RCNET_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map(|n| n.max(1))
            .unwrap_or(1)
    })
}

/// `jobs` split into at most `workers` contiguous runs of near-equal length:
/// `(start, len)` pairs covering `0..jobs` in order.
fn ranges(jobs: usize, workers: usize) -> Vec<(usize, usize)> {
    let workers = workers.min(jobs).max(1);
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let take = jobs / workers + usize::from(w < jobs % workers);
        out.push((start, take));
        start += take;
    }
    debug_assert_eq!(start, jobs);
    out
}

/// Split `data` into `data.len() / chunk_len` equal chunks (one per job) and
/// run `f(first_job_index, span)` on contiguous spans of chunks, using up to
/// `threads` workers. Each call owns its span exclusively, so output cannot
/// depend on scheduling; `f` typically loops over `span.chunks_mut(chunk_len)`
/// reusing a scratch buffer it allocates once.
pub fn for_each_span<S, F>(threads: usize, data: &mut [S], chunk_len: usize, f: F)
where
    S: Send,
    F: Fn(usize, &mut [S]) + Sync,
{
    assert!(chunk_len > 0 && data.len() % chunk_len == 0, "data must split into whole chunks");
    let jobs = data.len() / chunk_len;
    if threads <= 1 || jobs <= 1 {
        f(0, data);
        return;
    }
    std::thread::scope(|scope| {
        let f = &f;
        let mut rest = data;
        for (start, take) in ranges(jobs, threads) {
            let (mine, tail) = rest.split_at_mut(take * chunk_len);
            rest = tail;
            scope.spawn(move || f(start, mine));
        }
    });
}

/// Like [`for_each_span`], but hands each worker matching spans of two
/// structures that share the same job axis (e.g. per-sample output tensor and
/// per-sample accumulator slots).
pub fn for_each_span2<A, B, F>(
    threads: usize,
    a: &mut [A], chunk_a: usize,
    b: &mut [B], chunk_b: usize,
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync,
{
    assert!(chunk_a > 0 && a.len() % chunk_a == 0, "a must split into whole chunks");
    assert!(chunk_b > 0 && b.len() % chunk_b == 0, "b must split into whole chunks");
    let jobs = a.len() / chunk_a;
    assert_eq!(jobs, b.len() / chunk_b, "a and b must have the same job count");
    if threads <= 1 || jobs <= 1 {
        f(0, a, b);
        return;
    }
    std::thread::scope(|scope| {
        let f = &f;
        let mut rest_a = a;
        let mut rest_b = b;
        for (start, take) in ranges(jobs, threads) {
            let (mine_a, tail_a) = rest_a.split_at_mut(take * chunk_a);
            let (mine_b, tail_b) = rest_b.split_at_mut(take * chunk_b);
            rest_a = tail_a;
            rest_b = tail_b;
            scope.spawn(move || f(start, mine_a, mine_b));
        }
    });
}
