//! Deterministic synthetic component sets.
//!
//! The template is a sum of a few Gaussian bumps. Every component is unit
//! Gaussian noise, except the planted one, which is the template plus
//! `noise_sigma`-scaled noise. Each volume draws from its own ChaCha stream
//! keyed by the seed, so output does not depend on generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Template;
use crate::volume::Volume;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid synth spec: {0}")]
pub struct InvalidSpec(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_components: usize,
    pub dims: [usize; 3],
    pub noise_sigma: f64,
    pub planted_index: Option<usize>,
    /// Dice binarization threshold attached to the generated template.
    pub mask_threshold: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            n_components: 84,
            dims: [64, 64, 64],
            noise_sigma: 0.1,
            planted_index: None,
            mask_threshold: 0.5,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), InvalidSpec> {
        if self.n_components == 0 {
            return Err(InvalidSpec("n_components must be >= 1".into()));
        }
        if self.dims.contains(&0) {
            return Err(InvalidSpec(format!(
                "dims must be positive, got {:?}",
                self.dims
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(InvalidSpec(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !self.mask_threshold.is_finite() {
            return Err(InvalidSpec("mask_threshold must be finite".into()));
        }
        if let Some(i) = self.planted_index {
            if i >= self.n_components {
                return Err(InvalidSpec(format!(
                    "planted_index {i} out of range for {} components",
                    self.n_components
                )));
            }
        }
        Ok(())
    }
}

const TEMPLATE_STREAM: u64 = 0;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn component_stream(seed: u64, index: usize) -> ChaCha8Rng {
    stream(seed, index as u64 + 1)
}

struct Bump {
    center: [f64; 3],
    width: [f64; 3],
    amplitude: f64,
}

fn template_pattern(spec: &SynthSpec) -> Vec<f64> {
    let mut rng = stream(spec.seed, TEMPLATE_STREAM);
    let count = rng.random_range(3..=5);
    let bumps: Vec<Bump> = (0..count)
        .map(|_| {
            let frac = rng.random_range(0.08..0.18);
            Bump {
                center: spec.dims.map(|n| rng.random_range(0.2..0.8) * n as f64),
                width: spec.dims.map(|n| (frac * n as f64).max(0.5)),
                amplitude: rng.random_range(1.0..3.0),
            }
        })
        .collect();
    let [nx, ny, nz] = spec.dims;
    let mut data = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64, y as f64, z as f64];
                let value: f64 = bumps
                    .iter()
                    .map(|b| {
                        let r2: f64 = (0..3)
                            .map(|a| ((p[a] - b.center[a]) / b.width[a]).powi(2))
                            .sum();
                        b.amplitude * (-0.5 * r2).exp()
                    })
                    .sum();
                data.push(value);
            }
        }
    }
    data
}

/// Builds component `index` on its own stream.
fn component(spec: &SynthSpec, index: usize, pattern: &[f64]) -> Vec<f64> {
    let mut rng = component_stream(spec.seed, index);
    let mut noise = || rng.sample::<f64, _>(StandardNormal);
    if spec.planted_index == Some(index) {
        pattern
            .iter()
            .map(|&t| t + spec.noise_sigma * noise())
            .collect()
    } else {
        (0..pattern.len()).map(|_| noise()).collect()
    }
}

pub fn component_label(index: usize) -> String {
    format!("comp_{index}")
}

/// Generates the components and the template described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<Volume>, Template), InvalidSpec> {
    spec.validate()?;
    let pattern = template_pattern(spec);
    let build = |data: Vec<f64>, label: String| {
        Volume::from_data(spec.dims, data, label).map_err(|e| InvalidSpec(e.to_string()))
    };
    let components = (0..spec.n_components)
        .map(|i| build(component(spec, i, &pattern), component_label(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let template = Template::new(build(pattern, "template".into())?, spec.mask_threshold)
        .map_err(|e| InvalidSpec(e.to_string()))?;
    Ok((components, template))
}
