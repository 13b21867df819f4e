//! Volumetric similarity between a candidate volume and a template.
//!
//! All metrics operate in voxel space on co-registered volumes of identical
//! extents. Sums are accumulated in `f64` in flat (x-fastest) order, so a
//! given pair always yields the same bits.

pub mod dataset;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pardata::PardataError;
use crate::volume::{Volume, VolumeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch { left: [usize; 3], right: [usize; 3] },
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("threshold must be finite, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Pardata(#[from] PardataError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// A voxel translation applied to the template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Offset {
    pub u: i64,
    pub v: i64,
    pub w: i64,
}

impl Offset {
    pub const ZERO: Offset = Offset { u: 0, v: 0, w: 0 };

    pub fn new(u: i64, v: i64, w: i64) -> Self {
        Offset { u, v, w }
    }
}

/// Reference pattern plus the threshold that binarizes it for Dice.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    volume: Volume,
    mask_threshold: f64,
}

impl Template {
    pub fn new(volume: Volume, mask_threshold: f64) -> Result<Self, MetricError> {
        if !mask_threshold.is_finite() {
            return Err(MetricError::InvalidThreshold(mask_threshold));
        }
        Ok(Template {
            volume,
            mask_threshold,
        })
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn mask_threshold(&self) -> f64 {
        self.mask_threshold
    }

    pub fn dims(&self) -> [usize; 3] {
        self.volume.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Ssd,
    Ncc,
    Dice,
}

impl MetricKind {
    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Ssd => Direction::LowerIsBetter,
            MetricKind::Ncc | MetricKind::Dice => Direction::HigherIsBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ssd => "ssd",
            MetricKind::Ncc => "ncc",
            MetricKind::Dice => "dice",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ssd" => Ok(MetricKind::Ssd),
            "ncc" => Ok(MetricKind::Ncc),
            "dice" => Ok(MetricKind::Dice),
            other => Err(format!(
                "unknown metric '{other}' (expected ssd, ncc or dice)"
            )),
        }
    }
}

/// A metric kind together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    kind: MetricKind,
    /// Candidate binarization threshold; only read by Dice.
    dice_threshold: f64,
}

impl Metric {
    pub fn ssd() -> Self {
        Metric {
            kind: MetricKind::Ssd,
            dice_threshold: 0.0,
        }
    }

    pub fn ncc() -> Self {
        Metric {
            kind: MetricKind::Ncc,
            dice_threshold: 0.0,
        }
    }

    pub fn dice(candidate_threshold: f64) -> Self {
        Metric {
            kind: MetricKind::Dice,
            dice_threshold: candidate_threshold,
        }
    }

    pub fn new(kind: MetricKind, dice_threshold: f64) -> Self {
        Metric {
            kind,
            dice_threshold,
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn dice_threshold(&self) -> f64 {
        self.dice_threshold
    }

    pub fn evaluate(&self, f: &Volume, t: &Template) -> Result<f64, MetricError> {
        match self.kind {
            MetricKind::Ssd => ssd(f, t),
            MetricKind::Ncc => ncc(f, t),
            MetricKind::Dice => dice(f, t, self.dice_threshold),
        }
    }
}

fn check_dims(f: &Volume, t: &Template) -> Result<(), MetricError> {
    if f.dims() != t.dims() {
        return Err(MetricError::DimMismatch {
            left: f.dims(),
            right: t.dims(),
        });
    }
    Ok(())
}

/// Sum of squared voxel differences at zero offset.
pub fn ssd(f: &Volume, t: &Template) -> Result<f64, MetricError> {
    check_dims(f, t)?;
    Ok(f.data()
        .iter()
        .zip(t.volume().data())
        .fold(0.0, |acc, (a, b)| {
            let d = a - b;
            acc + d * d
        }))
}

/// Sum of squared differences against the template shifted by `off`, i.e.
/// over `f(x, y, z) - t(x - u, y - v, z - w)`. Only voxels whose shifted
/// template index lies inside the grid contribute.
pub fn ssd_at_offset(f: &Volume, t: &Template, off: Offset) -> Result<f64, MetricError> {
    check_dims(f, t)?;
    let [nx, ny, nz] = f.dims();
    let tv = t.volume();
    // overlap range of x such that 0 <= x - u < n
    let range = |n: usize, shift: i64| {
        let n = n as i64;
        let lo = shift.clamp(0, n);
        let hi = (n + shift).clamp(0, n);
        lo as usize..hi.max(lo) as usize
    };
    let (xs, ys, zs) = (range(nx, off.u), range(ny, off.v), range(nz, off.w));
    let mut acc = 0.0;
    for z in zs {
        let tz = (z as i64 - off.w) as usize;
        for y in ys.clone() {
            let ty = (y as i64 - off.v) as usize;
            for x in xs.clone() {
                let tx = (x as i64 - off.u) as usize;
                let d = f.get(x, y, z) - tv.get(tx, ty, tz);
                acc += d * d;
            }
        }
    }
    Ok(acc)
}

fn is_constant(data: &[f64]) -> bool {
    data.iter().all(|&v| v == data[0])
}

fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Zero-normalized (Pearson) cross-correlation.
pub fn ncc(f: &Volume, t: &Template) -> Result<f64, MetricError> {
    check_dims(f, t)?;
    let (a, b) = (f.data(), t.volume().data());
    if is_constant(a) || is_constant(b) {
        return Err(MetricError::ZeroVariance);
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    pearson(sab, saa, sbb)
}

pub(crate) fn pearson(sab: f64, saa: f64, sbb: f64) -> Result<f64, MetricError> {
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Dice overlap of `f > f_threshold` and `template > mask_threshold`.
/// Two empty masks score 1.0.
pub fn dice(f: &Volume, t: &Template, f_threshold: f64) -> Result<f64, MetricError> {
    check_dims(f, t)?;
    if !f_threshold.is_finite() {
        return Err(MetricError::InvalidThreshold(f_threshold));
    }
    let tt = t.mask_threshold();
    let (mut both, mut na, mut nb) = (0u64, 0u64, 0u64);
    for (&x, &y) in f.data().iter().zip(t.volume().data()) {
        let (ia, ib) = (x > f_threshold, y > tt);
        na += u64::from(ia);
        nb += u64::from(ib);
        both += u64::from(ia && ib);
    }
    Ok(dice_from_counts(both, na, nb))
}

pub(crate) fn dice_from_counts(both: u64, na: u64, nb: u64) -> f64 {
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

/// Rescales to zero mean and unit population standard deviation.
pub fn zscore(v: &Volume) -> Result<Volume, MetricError> {
    let data = v.data();
    if is_constant(data) {
        return Err(MetricError::ZeroVariance);
    }
    let m = mean(data);
    let var = data.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / data.len() as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok(v.map_values(|x| (x - m) / sd)?)
}
