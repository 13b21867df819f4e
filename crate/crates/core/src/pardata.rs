//! Immutable partitioned collections with data-parallel combinators.
//!
//! A [`PartitionedDataset`] holds its elements as contiguous, near-equal
//! blocks. Every combinator is evaluated eagerly: partitions are handed to an
//! [`Executor`] (a fixed pool of `workers` lanes, or the calling thread) and
//! the per-partition outputs are reassembled by partition index, so results
//! never depend on scheduling.

use std::num::NonZeroUsize;
#[cfg(feature = "parallel")]
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PardataError {
    #[error("partition count must be >= 1, got {0}")]
    InvalidPartitionCount(usize),
    #[error("worker count must be >= 1, got {0}")]
    InvalidWorkerCount(usize),
    #[error("cannot zip datasets of length {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

/// How many lanes evaluate partitions, and how many partitions to cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionConfig {
    workers: NonZeroUsize,
    partitions: Option<NonZeroUsize>,
}

impl ExecutionConfig {
    pub fn new(workers: usize) -> Result<Self, PardataError> {
        let workers =
            NonZeroUsize::new(workers).ok_or(PardataError::InvalidWorkerCount(workers))?;
        Ok(ExecutionConfig {
            workers,
            partitions: None,
        })
    }

    /// Single lane on the calling thread.
    pub fn serial() -> Self {
        ExecutionConfig {
            workers: NonZeroUsize::MIN,
            partitions: None,
        }
    }

    /// Overrides the partition count (defaults to the worker count).
    pub fn with_partitions(self, partitions: usize) -> Result<Self, PardataError> {
        let partitions =
            NonZeroUsize::new(partitions).ok_or(PardataError::InvalidPartitionCount(partitions))?;
        Ok(ExecutionConfig {
            partitions: Some(partitions),
            ..self
        })
    }

    pub fn workers(&self) -> usize {
        self.workers.get()
    }

    pub fn partitions(&self) -> usize {
        self.partitions.unwrap_or(self.workers).get()
    }
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            workers: std::thread::available_parallelism().unwrap_or(NonZeroUsize::MIN),
            partitions: None,
        }
    }
}

/// Runs per-partition work, either inline or on a dedicated thread pool.
#[derive(Clone)]
pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .field("parallel", &self.is_parallel())
            .finish()
    }
}

impl Executor {
    /// Evaluates everything on the calling thread.
    pub fn sequential() -> Self {
        Executor {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// Starts a pool of `cfg.workers()` threads. A single worker, or a build
    /// without the `parallel` feature, yields a sequential executor.
    pub fn new(cfg: &ExecutionConfig) -> Result<Self, PardataError> {
        let workers = cfg.workers();
        #[cfg(feature = "parallel")]
        {
            if workers > 1 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(|i| format!("pardata-{i}"))
                    .build()
                    .map_err(|e| PardataError::Pool(e.to_string()))?;
                return Ok(Executor {
                    workers,
                    pool: Some(Arc::new(pool)),
                });
            }
        }
        Ok(Executor {
            workers,
            ..Self::sequential()
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Applies `f` to every partition, returning outputs in partition order.
    pub fn run<T, U, F>(&self, partitions: &[Vec<T>], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&[T]) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| partitions.par_iter().map(|p| f(p)).collect());
        }
        partitions.iter().map(|p| f(p)).collect()
    }

    /// Shorthand for [`PartitionedDataset::from_items`] bound to this executor.
    pub fn parallelize<T>(
        &self,
        items: Vec<T>,
        partition_count: usize,
    ) -> Result<PartitionedDataset<T>, PardataError> {
        Ok(PartitionedDataset::from_items(items, partition_count)?.with_executor(self.clone()))
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

/// Sizes of `k` contiguous blocks covering `n` elements; earlier blocks take
/// the remainder so sizes differ by at most one.
pub fn block_sizes(n: usize, k: usize) -> impl Iterator<Item = usize> {
    let (base, extra) = (n / k, n % k);
    (0..k).map(move |i| base + usize::from(i < extra))
}

fn split_blocks<T>(items: Vec<T>, k: usize) -> Vec<Vec<T>> {
    let mut rest = items.into_iter();
    block_sizes(rest.len(), k)
        .map(|size| rest.by_ref().take(size).collect())
        .collect()
}

/// An immutable, ordered, partitioned collection.
#[derive(Debug, Clone)]
pub struct PartitionedDataset<T> {
    partitions: Vec<Vec<T>>,
    len: usize,
    executor: Executor,
}

impl<T> PartitionedDataset<T> {
    /// Cuts `items` into `partition_count` contiguous blocks. Extra partitions
    /// beyond the element count are empty.
    pub fn from_items(items: Vec<T>, partition_count: usize) -> Result<Self, PardataError> {
        if partition_count == 0 {
            return Err(PardataError::InvalidPartitionCount(0));
        }
        let len = items.len();
        Ok(PartitionedDataset {
            partitions: split_blocks(items, partition_count),
            len,
            executor: Executor::sequential(),
        })
    }

    /// Rebinds the dataset to another executor; elements are untouched.
    pub fn with_executor(self, executor: Executor) -> Self {
        PartitionedDataset { executor, ..self }
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Vec<T>] {
        &self.partitions
    }

    /// Consumes the dataset, yielding elements in logical order.
    pub fn into_vec(self) -> Vec<T> {
        self.partitions.into_iter().flatten().collect()
    }

    fn derived<U>(&self, partitions: Vec<Vec<U>>) -> PartitionedDataset<U> {
        let len = partitions.iter().map(Vec::len).sum();
        PartitionedDataset {
            partitions,
            len,
            executor: self.executor.clone(),
        }
    }
}

impl<T: Send + Sync> PartitionedDataset<T> {
    /// Element `i` of the result is `f(element i)`; partitioning is kept.
    pub fn map<U, F>(&self, f: F) -> PartitionedDataset<U>
    where
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        let parts = self
            .executor
            .run(&self.partitions, |p| p.iter().map(&f).collect());
        self.derived(parts)
    }

    /// Fallible [`map`](Self::map). On failure returns the error of the
    /// element with the smallest logical index.
    pub fn try_map<U, E, F>(&self, f: F) -> Result<PartitionedDataset<U>, E>
    where
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        // each partition stops at its own first failure; partitions are
        // contiguous, so the first failing partition holds the global minimum
        let parts = self.executor.run(&self.partitions, |p| {
            p.iter().map(&f).collect::<Result<Vec<U>, E>>()
        });
        let parts = parts.into_iter().collect::<Result<Vec<_>, E>>()?;
        Ok(self.derived(parts))
    }

    /// In-order concatenation of `f(e)`, re-cut to the source partition count.
    pub fn flat_map<U, I, F>(&self, f: F) -> PartitionedDataset<U>
    where
        U: Send,
        I: IntoIterator<Item = U>,
        F: Fn(&T) -> I + Sync + Send,
    {
        let parts = self.executor.run(&self.partitions, |p| {
            p.iter().flat_map(&f).collect::<Vec<U>>()
        });
        let flat: Vec<U> = parts.into_iter().flatten().collect();
        self.derived(split_blocks(flat, self.partition_count()))
    }

    /// Fallible [`flat_map`](Self::flat_map), with the same error rule as
    /// [`try_map`](Self::try_map).
    pub fn try_flat_map<U, I, E, F>(&self, f: F) -> Result<PartitionedDataset<U>, E>
    where
        U: Send,
        E: Send,
        I: IntoIterator<Item = U>,
        F: Fn(&T) -> Result<I, E> + Sync + Send,
    {
        let parts = self.executor.run(&self.partitions, |p| {
            let mut out = Vec::new();
            for e in p {
                out.extend(f(e)?);
            }
            Ok(out)
        });
        let parts = parts.into_iter().collect::<Result<Vec<Vec<U>>, E>>()?;
        let flat: Vec<U> = parts.into_iter().flatten().collect();
        Ok(self.derived(split_blocks(flat, self.partition_count())))
    }

    /// Folds each partition left to right from `identity`, then folds the
    /// partition results in partition order.
    ///
    /// `op` must be associative and commutative with `identity` as its
    /// neutral element. For floating point the result is bit-stable for a
    /// fixed partition count but may differ across partition counts.
    pub fn reduce<F>(&self, identity: T, op: F) -> T
    where
        T: Clone,
        F: Fn(T, T) -> T + Sync + Send,
    {
        let partials = self.executor.run(&self.partitions, |p| {
            p.iter().cloned().fold(identity.clone(), &op)
        });
        partials.into_iter().fold(identity, op)
    }
}

impl<T: Clone + Send + Sync> PartitionedDataset<T> {
    /// Elements in logical order.
    pub fn collect(&self) -> Vec<T> {
        self.partitions.iter().flatten().cloned().collect()
    }

    /// Same logical sequence cut into `k` contiguous partitions.
    pub fn repartition(&self, k: usize) -> Result<Self, PardataError> {
        Ok(PartitionedDataset::from_items(self.collect(), k)?.with_executor(self.executor.clone()))
    }

    /// Pairs element `i` of `self` with element `i` of `other`. The result
    /// follows `self`'s partitioning.
    pub fn zip<U>(
        &self,
        other: &PartitionedDataset<U>,
    ) -> Result<PartitionedDataset<(T, U)>, PardataError>
    where
        U: Clone,
    {
        if self.len != other.len {
            return Err(PardataError::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        let mut right = other.partitions.iter().flatten().cloned();
        let parts = self
            .partitions
            .iter()
            .map(|p| p.iter().cloned().zip(right.by_ref()).collect())
            .collect();
        Ok(self.derived(parts))
    }
}
