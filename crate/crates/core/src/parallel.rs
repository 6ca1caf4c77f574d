//! Deterministic block-parallel execution.
//!
//! Work is cut into a fixed number of blocks that depends only on the
//! problem size, never on the worker count. Each block gets its own RNG
//! stream, and block results are combined in block order, so the output is
//! a pure function of `(inputs, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "GENBOUND_WORKERS";

/// Number of worker threads used by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers(usize);

impl Workers {
    pub fn new(count: usize) -> Self {
        Workers(count.max(1))
    }

    pub fn single() -> Self {
        Workers(1)
    }

    /// Reads [`WORKERS_ENV`], falling back to the number of available cores.
    pub fn from_env() -> Self {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map(Workers::new)
            .unwrap_or_else(|| {
                Workers::new(
                    std::thread::available_parallelism()
                        .map(|n| n.get())
                        .unwrap_or(1),
                )
            })
    }

    pub fn count(self) -> usize {
        self.0
    }

    /// Evaluates `f` on every block index in `0..blocks` and returns the
    /// results in index order.
    pub fn map_blocks<T, F>(self, blocks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.0 == 1 || blocks <= 1 {
            return (0..blocks).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.0).build() {
            Ok(pool) => pool.install(|| (0..blocks).into_par_iter().map(&f).collect()),
            Err(err) => {
                log::warn!("falling back to sequential execution: {err}");
                (0..blocks).map(f).collect()
            }
        }
    }
}

impl Default for Workers {
    fn default() -> Self {
        Workers::from_env()
    }
}

/// RNG for block `stream` of a computation seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
