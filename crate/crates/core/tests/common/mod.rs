//! Straight serial reference implementations used as test oracles.
#![allow(dead_code)]

use neuromatch::metrics::MetricKind;
use neuromatch::Volume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ssd_loop(f: &Volume, t: &Volume) -> f64 {
    let [nx, ny, nz] = f.dims();
    let mut acc = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let d = f.get(x, y, z) - t.get(x, y, z);
                acc += d * d;
            }
        }
    }
    acc
}

pub fn ncc_loop(f: &Volume, t: &Volume) -> f64 {
    let [nx, ny, nz] = f.dims();
    let n = (nx * ny * nz) as f64;
    let (mut sf, mut st) = (0.0, 0.0);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                sf += f.get(x, y, z);
                st += t.get(x, y, z);
            }
        }
    }
    let (mf, mt) = (sf / n, st / n);
    let (mut num, mut vf, mut vt) = (0.0, 0.0, 0.0);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let a = f.get(x, y, z) - mf;
                let b = t.get(x, y, z) - mt;
                num += a * b;
                vf += a * a;
                vt += b * b;
            }
        }
    }
    num / (vf * vt).sqrt()
}

pub fn dice_loop(f: &Volume, f_thr: f64, t: &Volume, t_thr: f64) -> f64 {
    let [nx, ny, nz] = f.dims();
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let ia = f.get(x, y, z) > f_thr;
                let ib = t.get(x, y, z) > t_thr;
                if ia {
                    a += 1;
                }
                if ib {
                    b += 1;
                }
                if ia && ib {
                    inter += 1;
                }
            }
        }
    }
    if a + b == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (a + b) as f64
    }
}

pub fn score_loop(kind: MetricKind, f: &Volume, t: &Volume, f_thr: f64, t_thr: f64) -> f64 {
    match kind {
        MetricKind::Ssd => ssd_loop(f, t),
        MetricKind::Ncc => ncc_loop(f, t),
        MetricKind::Dice => dice_loop(f, f_thr, t, t_thr),
    }
}

/// Index of the best value by brute force; earliest index wins ties.
pub fn best_index(kind: MetricKind, values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let better = match kind {
            MetricKind::Ssd => v < values[best],
            MetricKind::Ncc | MetricKind::Dice => v > values[best],
        };
        if better {
            best = i;
        }
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0e-300) || a == b
}

pub fn random_volume(rng: &mut ChaCha8Rng, dims: [usize; 3], label: &str) -> Volume {
    let n = dims.iter().product();
    let data = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    Volume::from_data(dims, data, label).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Extents in `2..=max`; below 8 voxels NCC collapses to near-ties of +-1.
pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> [usize; 3] {
    [
        rng.random_range(2..=max),
        rng.random_range(2..=max),
        rng.random_range(2..=max),
    ]
}
