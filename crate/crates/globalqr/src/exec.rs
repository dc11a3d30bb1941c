//! Worker-pool helper shared by the test driver and the study runner.

use rayon::prelude::*;

/// Map `f` over `0..count`, honoring the workers hint: 1 runs serially,
/// 0 uses the global pool, any other value gets a dedicated pool. Results
/// are collected in index order, so the output never depends on scheduling.
pub(crate) fn indexed_try_map<T, E, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match workers {
        1 => (0..count).map(f).collect(),
        0 => (0..count).into_par_iter().map(f).collect(),
        k => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .expect("worker pool construction cannot fail for positive sizes");
            pool.install(|| (0..count).into_par_iter().map(f).collect())
        }
    }
}
