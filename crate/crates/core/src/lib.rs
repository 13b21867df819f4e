//! Data-parallel template matching of brain component maps.
//!
//! Components and a network template are loaded from NIfTI-1 files
//! ([`nifti`]), wrapped in an immutable partitioned dataset ([`pardata`]),
//! scored with SSD, NCC or Dice ([`metrics`]) and ranked ([`matcher`]).
//! [`synth`] generates reproducible stand-in data and [`bench`] times the
//! scoring phase serially and in parallel.
//!
//! Parallel evaluation uses rayon behind the default `parallel` feature;
//! without it every combinator runs on the calling thread.

pub mod bench;
pub mod cli;
pub mod matcher;
pub mod metrics;
pub mod nifti;
pub mod pardata;
pub mod report;
pub mod synth;
pub mod volume;

pub use matcher::{extract_network, rank_scores, score_components, MatchReport, SimilarityScore};
pub use metrics::{Metric, MetricKind, Offset, Template};
pub use pardata::{ExecutionConfig, Executor, PartitionedDataset};
pub use volume::Volume;
