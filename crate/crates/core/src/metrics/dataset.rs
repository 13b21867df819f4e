//! Voxel-level evaluation of the metrics over a [`PartitionedDataset`].
//!
//! Each volume is flat-mapped into a dataset of voxels, the candidate and
//! template voxel datasets are zipped, and the per-voxel terms are mapped and
//! reduced. This splits a single large pair across lanes, and serves as an
//! independent route for cross-checking the direct implementations.

use super::{check_dims, dice_from_counts, pearson, Metric, MetricError, MetricKind, Template};
use crate::pardata::{Executor, PartitionedDataset};
use crate::volume::Volume;

fn voxels(
    v: &Volume,
    exec: &Executor,
    partitions: usize,
) -> Result<PartitionedDataset<f64>, MetricError> {
    Ok(exec
        .parallelize(vec![v], partitions)?
        .flat_map(|v| v.data().iter().copied()))
}

fn voxel_pairs(
    f: &Volume,
    t: &Template,
    exec: &Executor,
    partitions: usize,
) -> Result<PartitionedDataset<(f64, f64)>, MetricError> {
    check_dims(f, t)?;
    let a = voxels(f, exec, partitions)?;
    let b = voxels(t.volume(), exec, partitions)?;
    Ok(a.zip(&b)?)
}

pub fn ssd(
    f: &Volume,
    t: &Template,
    exec: &Executor,
    partitions: usize,
) -> Result<f64, MetricError> {
    let pairs = voxel_pairs(f, t, exec, partitions)?;
    Ok(pairs
        .map(|(a, b)| (a - b) * (a - b))
        .reduce(0.0, |x, y| x + y))
}

pub fn ncc(
    f: &Volume,
    t: &Template,
    exec: &Executor,
    partitions: usize,
) -> Result<f64, MetricError> {
    let pairs = voxel_pairs(f, t, exec, partitions)?;
    let n = pairs.len() as f64;
    let (sa, sb) = pairs.reduce((0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let (ma, mb) = (sa / n, sb / n);
    let (sab, saa, sbb) = pairs
        .map(|&(a, b)| {
            let (da, db) = (a - ma, b - mb);
            (da * db, da * da, db * db)
        })
        .reduce((0.0, 0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    pearson(sab, saa, sbb)
}

pub fn dice(
    f: &Volume,
    t: &Template,
    f_threshold: f64,
    exec: &Executor,
    partitions: usize,
) -> Result<f64, MetricError> {
    if !f_threshold.is_finite() {
        return Err(MetricError::InvalidThreshold(f_threshold));
    }
    let tt = t.mask_threshold();
    let (both, na, nb) = voxel_pairs(f, t, exec, partitions)?
        .map(|&(a, b)| {
            let (ia, ib) = (a > f_threshold, b > tt);
            (u64::from(ia && ib), u64::from(ia), u64::from(ib))
        })
        .reduce((0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    Ok(dice_from_counts(both, na, nb))
}

/// Voxel-parallel counterpart of [`Metric::evaluate`].
pub fn evaluate(
    metric: &Metric,
    f: &Volume,
    t: &Template,
    exec: &Executor,
    partitions: usize,
) -> Result<f64, MetricError> {
    match metric.kind() {
        MetricKind::Ssd => ssd(f, t, exec, partitions),
        MetricKind::Ncc => ncc(f, t, exec, partitions),
        MetricKind::Dice => dice(f, t, metric.dice_threshold(), exec, partitions),
    }
}
