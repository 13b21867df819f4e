//! Serial-versus-parallel timing of the scoring phase.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::matcher::{rank_scores, score_with, MatchError};
use crate::metrics::{Metric, MetricKind, Template};
use crate::pardata::{ExecutionConfig, Executor};
use crate::volume::Volume;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("timings must be positive and finite (serial {serial}, parallel {parallel})")]
    NonPositiveTime { serial: f64, parallel: f64 },
    #[error("repetitions must be >= 1")]
    NoRepetitions,
    #[error(transparent)]
    Match(#[from] MatchError),
}

/// Min/median/max of a set of wall-clock samples, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let mid = s.len() / 2;
        let median = if s.len() % 2 == 1 {
            s[mid]
        } else {
            (s[mid - 1] + s[mid]) / 2.0
        };
        Some(TimingStats {
            median,
            min: s[0],
            max: s[s.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub serial_seconds: f64,
    pub parallel_seconds: f64,
    pub workers: usize,
    pub speedup: f64,
    pub component_count: usize,
    pub dims: [usize; 3],
    pub repetitions: usize,
    pub metric: MetricKind,
    pub serial: Option<TimingStats>,
    pub parallel: Option<TimingStats>,
    /// What the timings cover.
    pub timing_basis: String,
}

impl BenchmarkResult {
    /// Builds a result from two representative times; `speedup` is
    /// `serial_seconds / parallel_seconds`.
    pub fn from_times(
        serial_seconds: f64,
        parallel_seconds: f64,
        workers: usize,
        component_count: usize,
        dims: [usize; 3],
        repetitions: usize,
        metric: MetricKind,
    ) -> Result<Self, BenchError> {
        let valid = |t: f64| t.is_finite() && t > 0.0;
        if !valid(serial_seconds) || !valid(parallel_seconds) {
            return Err(BenchError::NonPositiveTime {
                serial: serial_seconds,
                parallel: parallel_seconds,
            });
        }
        Ok(BenchmarkResult {
            serial_seconds,
            parallel_seconds,
            workers,
            speedup: serial_seconds / parallel_seconds,
            component_count,
            dims,
            repetitions,
            metric,
            serial: None,
            parallel: None,
            timing_basis: "wall clock, scoring only (I/O excluded)".into(),
        })
    }

    /// Human-readable comparison table.
    pub fn table(&self) -> String {
        let row = |name: &str, t: f64, stats: Option<TimingStats>| {
            let (lo, hi) = stats.map_or((t, t), |s| (s.min, s.max));
            format!(
                "{name:<10} {:>8} {t:>14.9} {:>10.5} {lo:>12.6} {hi:>12.6}\n",
                if name == "serial" { 1 } else { self.workers },
                1.0 / t
            )
        };
        let mut out = format!(
            "{} components of {}x{}x{}, metric {}, {} repetitions\n",
            self.component_count,
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.metric,
            self.repetitions
        );
        out.push_str(&format!(
            "{:<10} {:>8} {:>14} {:>10} {:>12} {:>12}\n",
            "mode", "workers", "median (s)", "1/time", "min (s)", "max (s)"
        ));
        out.push_str(&row("serial", self.serial_seconds, self.serial));
        out.push_str(&row("parallel", self.parallel_seconds, self.parallel));
        out.push_str(&format!("speedup {:.3}x\n", self.speedup));
        out
    }
}

fn time_scoring(
    components: &[Volume],
    template: &Template,
    metric: Metric,
    cfg: &ExecutionConfig,
    repetitions: usize,
) -> Result<Vec<f64>, BenchError> {
    let executor = Executor::new(cfg).map_err(MatchError::from)?;
    // warm-up pass, untimed
    score_with(components, template, metric, &executor, cfg.partitions())?;
    (0..repetitions)
        .map(|_| {
            let start = Instant::now();
            let scores = score_with(components, template, metric, &executor, cfg.partitions())?;
            let ranked = rank_scores(scores)?;
            std::hint::black_box(&ranked);
            Ok(start.elapsed().as_secs_f64())
        })
        .collect()
}

/// Times scoring with one worker and with `parallel.workers()` workers,
/// `repetitions` times each, and reports medians.
pub fn run_benchmark(
    components: &[Volume],
    template: &Template,
    metric: Metric,
    parallel: &ExecutionConfig,
    repetitions: usize,
) -> Result<BenchmarkResult, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    if components.is_empty() {
        return Err(MatchError::EmptyInput.into());
    }
    let serial_samples = time_scoring(
        components,
        template,
        metric,
        &ExecutionConfig::serial(),
        repetitions,
    )?;
    let parallel_samples = time_scoring(components, template, metric, parallel, repetitions)?;
    let serial = TimingStats::from_samples(&serial_samples).expect("repetitions >= 1");
    let par = TimingStats::from_samples(&parallel_samples).expect("repetitions >= 1");
    let mut result = BenchmarkResult::from_times(
        serial.median,
        par.median,
        parallel.workers(),
        components.len(),
        template.dims(),
        repetitions,
        metric.kind(),
    )?;
    result.serial = Some(serial);
    result.parallel = Some(par);
    Ok(result)
}
