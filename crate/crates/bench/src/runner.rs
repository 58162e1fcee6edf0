//! Parallel benchmark execution.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use peoc_core::bench::{assemble_report, run_process_repeat_observed, BenchConfig, BenchmarkReport, RepeatReport, Stage};

use crate::error::Result;

/// Runs every repeat on up to `jobs` threads. The report does not depend on `jobs`.
pub fn run_benchmark_parallel(
    config: &BenchConfig,
    jobs: usize,
    progress: &(dyn Fn(usize, Stage) + Sync),
) -> Result<BenchmarkReport> {
    config.validate()?;
    let n = config.n_repeats;
    let jobs = jobs.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<peoc_core::Result<RepeatReport>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = run_process_repeat_observed(config, i, &mut |r, s| progress(r, s));
                slots.lock().expect("worker panicked")[i] = Some(result);
            });
        }
    });
    let repeats = slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every repeat index is claimed"))
        .collect::<peoc_core::Result<Vec<_>>>()?;
    Ok(assemble_report(config, repeats)?)
}
