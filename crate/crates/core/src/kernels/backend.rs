use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Execution mode recorded in run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Serial,
    Parallel { threads: usize },
}

/// Worker pool handle passed to every kernel.
///
/// Kernels split work into disjoint output partitions and never let the
/// partitioning influence the order of floating-point operations, so a
/// parallel backend produces bitwise the same results as the serial one.
#[derive(Clone)]
pub struct Backend {
    pool: Option<Arc<ThreadPool>>,
    threads: usize,
}

impl Backend {
    pub fn serial() -> Self {
        Backend {
            pool: None,
            threads: 1,
        }
    }

    pub fn parallel(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::invalid("parallel backend needs at least one thread"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("mmpar-worker-{i}"))
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?;
        Ok(Backend {
            pool: Some(Arc::new(pool)),
            threads,
        })
    }

    pub fn from_mode(mode: BackendMode) -> Result<Self> {
        match mode {
            BackendMode::Serial => Ok(Self::serial()),
            BackendMode::Parallel { threads } => Self::parallel(threads),
        }
    }

    pub fn mode(&self) -> BackendMode {
        match self.pool {
            None => BackendMode::Serial,
            Some(_) => BackendMode::Parallel {
                threads: self.threads,
            },
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn is_parallel(&self) -> bool {
        self.pool.is_some()
    }

    /// Calls `f(chunk_index, chunk)` for every `chunk_len`-sized piece of
    /// `out`. Chunks are disjoint, so `f` may run on any worker.
    pub(crate) fn for_each_chunk<F>(&self, out: &mut [f64], chunk_len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if out.is_empty() {
            return;
        }
        let chunk_len = chunk_len.max(1);
        match &self.pool {
            None => out
                .chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
            Some(pool) => pool.install(|| {
                out.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c))
            }),
        }
    }

    /// Runs `f` inside the pool (or inline for the serial backend).
    pub(crate) fn install<R, F>(&self, f: F) -> R
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        match &self.pool {
            None => f(),
            Some(pool) => pool.install(f),
        }
    }
}

impl Default for Backend {
    fn default() -> Self {
        Self::serial()
    }
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Backend({:?})", self.mode())
    }
}
