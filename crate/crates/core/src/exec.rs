use alloc::vec::Vec;

/// Runs independent jobs and returns their results in index order.
///
/// The core only ships [`Serial`]; the `dda` crate provides a thread-pool
/// executor. Results must come back in index order so that reductions over
/// them stay deterministic.
pub trait Executor: Sync {
    fn map<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every job on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(job).collect()
    }
}
