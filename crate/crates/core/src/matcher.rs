//! Scores candidate components against a template and picks the best match.
//!
//! The scoring pipeline is: dataset of components, zipped with a dataset
//! that repeats a shared reference to the template, mapped through the
//! metric, then collected and ranked. Each component is one task.

use std::cmp::Ordering;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::{Direction, Metric, MetricError, MetricKind, Template};
use crate::pardata::{ExecutionConfig, Executor, PardataError};
use crate::volume::Volume;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("no components to score")]
    EmptyInput,
    #[error("component {index} has dims {found:?}, template has {expected:?}")]
    DimMismatch {
        index: usize,
        found: [usize; 3],
        expected: [usize; 3],
    },
    #[error("component {index}: {source}")]
    Metric {
        index: usize,
        #[source]
        source: MetricError,
    },
    #[error("cannot rank scores computed with different metrics")]
    MixedMetrics,
    #[error(transparent)]
    Pardata(#[from] PardataError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityScore {
    pub component_index: usize,
    pub component_label: String,
    pub metric: MetricKind,
    pub value: f64,
    /// 1 is best; 0 until [`rank_scores`] assigns it.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    /// Best first.
    pub scores: Vec<SimilarityScore>,
    pub selected: usize,
    pub metric: MetricKind,
    pub workers: usize,
    pub partitions: usize,
    pub component_count: usize,
    pub elapsed_seconds: f64,
}

impl MatchReport {
    pub fn best(&self) -> &SimilarityScore {
        &self.scores[0]
    }
}

/// Computes one unranked score per component, in input order.
pub fn score_components(
    components: &[Volume],
    template: &Template,
    metric: Metric,
    cfg: &ExecutionConfig,
) -> Result<Vec<SimilarityScore>, MatchError> {
    let executor = Executor::new(cfg)?;
    score_with(components, template, metric, &executor, cfg.partitions())
}

/// [`score_components`] on an existing executor, so repeated runs reuse one
/// worker pool.
pub fn score_with(
    components: &[Volume],
    template: &Template,
    metric: Metric,
    executor: &Executor,
    partitions: usize,
) -> Result<Vec<SimilarityScore>, MatchError> {
    if components.is_empty() {
        return Err(MatchError::EmptyInput);
    }
    let n = components.len();
    let candidates = executor.parallelize(components.iter().enumerate().collect(), partitions)?;
    let shared = executor.parallelize(vec![template; n], partitions)?;
    let values = candidates
        .zip(&shared)?
        .try_map(|&((index, volume), template)| {
            if volume.dims() != template.dims() {
                return Err(MatchError::DimMismatch {
                    index,
                    found: volume.dims(),
                    expected: template.dims(),
                });
            }
            metric
                .evaluate(volume, template)
                .map_err(|source| MatchError::Metric { index, source })
        })?;
    Ok(values
        .into_vec()
        .into_iter()
        .zip(components)
        .enumerate()
        .map(|(component_index, (value, volume))| SimilarityScore {
            component_index,
            component_label: volume.label().to_owned(),
            metric: metric.kind(),
            value,
            rank: 0,
        })
        .collect())
}

/// Orders `a` before `b` when it is the better score; ties go to the lower
/// component index.
pub fn compare_scores(direction: Direction, a: &SimilarityScore, b: &SimilarityScore) -> Ordering {
    let by_value = match direction {
        Direction::LowerIsBetter => a.value.total_cmp(&b.value),
        Direction::HigherIsBetter => b.value.total_cmp(&a.value),
    };
    by_value.then(a.component_index.cmp(&b.component_index))
}

/// Sorts best-first and assigns ranks `1..=N`.
pub fn rank_scores(mut scores: Vec<SimilarityScore>) -> Result<Vec<SimilarityScore>, MatchError> {
    let Some(first) = scores.first() else {
        return Ok(scores);
    };
    let kind = first.metric;
    if scores.iter().any(|s| s.metric != kind) {
        return Err(MatchError::MixedMetrics);
    }
    scores.sort_by(|a, b| compare_scores(kind.direction(), a, b));
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    Ok(scores)
}

/// Scores, ranks, and returns the report with the rank-1 component.
pub fn extract_network<'a>(
    components: &'a [Volume],
    template: &Template,
    metric: Metric,
    cfg: &ExecutionConfig,
) -> Result<(MatchReport, &'a Volume), MatchError> {
    let executor = Executor::new(cfg)?;
    let start = Instant::now();
    let scores = score_with(components, template, metric, &executor, cfg.partitions())?;
    let scores = rank_scores(scores)?;
    let elapsed_seconds = start.elapsed().as_secs_f64();
    let selected = scores[0].component_index;
    let report = MatchReport {
        selected,
        metric: metric.kind(),
        workers: cfg.workers(),
        partitions: cfg.partitions(),
        component_count: scores.len(),
        elapsed_seconds,
        scores,
    };
    Ok((report, &components[selected]))
}
