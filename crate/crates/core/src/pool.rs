use std::sync::OnceLock;

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// Worker pool for grid pipelines. `CARLEMAN_THREADS` caps the worker
/// count; results never depend on the partitioning because every per-point
/// reduction runs in a fixed order.
pub fn worker_pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let threads = std::env::var("CARLEMAN_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0); // 0 = rayon default
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("worker pool")
    })
}
