//! Monte-Carlo estimates of the acceptable-region volume.
//!
//! The acceptable region is the part of the parameter hypercube `[0,1]^D`
//! where the task-fidelity is at least `1 − ε`; `γ` is its volume fraction
//! under the uniform measure. Points are drawn in fixed blocks of
//! [`BLOCK_SAMPLES`]; block `i` uses random stream `i` of the seed, so the
//! hit count is the same for any number of worker threads.
//!
//! For tiny regions around the exact solution, [`Sampling::Corner`] draws
//! only from the sub-cube of side `δ` at the solution corner and rescales the
//! hit fraction by `δ^D`. This is unbiased only when the region lies inside
//! that sub-cube.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::circuits::CircuitKind;
use crate::error::{invalid_arg, Result};
use crate::fidelity::{FidelityObjective, TargetSpec};
use crate::rng::substream;

pub const BLOCK_SAMPLES: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// Uniform over the whole hypercube.
    Uniform,
    /// Uniform over the side-`delta` cube at the exact solution.
    Corner { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEstimate {
    pub kind: CircuitKind,
    pub dimension: usize,
    pub epsilon: f64,
    pub samples: u64,
    pub hits: u64,
    /// Volume fraction of the region. Equals `hits / samples` for uniform
    /// sampling; corner sampling multiplies that by `δ^D`.
    pub gamma: f64,
    pub std_error: f64,
    pub sampling: Sampling,
}

impl RegionEstimate {
    fn volume_scale(&self) -> f64 {
        match self.sampling {
            Sampling::Uniform => 1.0,
            Sampling::Corner { delta } => delta.powi(self.dimension as i32),
        }
    }

    /// One-sided upper confidence bound on `γ`. With no hits this is the
    /// zero-count binomial bound `−ln(1 − c)/n`, otherwise `γ + z_c·σ`.
    pub fn upper_bound(&self, confidence: f64) -> Result<f64> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(invalid_arg(format!("confidence {confidence} is outside (0, 1)")));
        }
        if self.hits == 0 {
            return Ok(-(1.0 - confidence).ln() / self.samples as f64 * self.volume_scale());
        }
        let z = Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(confidence);
        Ok(self.gamma + z * self.std_error)
    }
}

/// Counts points of `[0,1]^D` with fidelity at least `1 − ε`.
#[derive(Debug, Clone)]
pub struct RegionSampler {
    objective: FidelityObjective,
    corner: Vec<bool>,
}

impl RegionSampler {
    /// The quantum kind uses the parity phase pattern.
    pub fn new(kind: CircuitKind, target: &TargetSpec) -> Self {
        // The exact solution sets p_k = 0 where a_k = 1 (NOT) and 1 elsewhere.
        Self {
            objective: FidelityObjective::new(kind, target),
            corner: target.task.coefficients().to_vec(),
        }
    }

    pub fn estimate(
        &self,
        epsilon: f64,
        samples: u64,
        seed: u64,
        sampling: Sampling,
    ) -> Result<RegionEstimate> {
        let hits = self.count_hits(&[epsilon], samples, seed, sampling)?[0];
        Ok(self.finish(epsilon, samples, hits, sampling))
    }

    /// Hit counts for several tolerances over one shared sample stream, so
    /// the counts are nested.
    pub fn estimate_many(
        &self,
        epsilons: &[f64],
        samples: u64,
        seed: u64,
        sampling: Sampling,
    ) -> Result<Vec<RegionEstimate>> {
        let hits = self.count_hits(epsilons, samples, seed, sampling)?;
        Ok(epsilons
            .iter()
            .zip(hits)
            .map(|(&eps, h)| self.finish(eps, samples, h, sampling))
            .collect())
    }

    fn finish(&self, epsilon: f64, samples: u64, hits: u64, sampling: Sampling) -> RegionEstimate {
        let mut est = RegionEstimate {
            kind: self.objective.kind(),
            dimension: self.objective.dimension(),
            epsilon,
            samples,
            hits,
            gamma: 0.0,
            std_error: 0.0,
            sampling,
        };
        let frac = hits as f64 / samples as f64;
        let scale = est.volume_scale();
        est.gamma = frac * scale;
        est.std_error = (frac * (1.0 - frac) / samples as f64).sqrt() * scale;
        est
    }

    fn count_hits(
        &self,
        epsilons: &[f64],
        samples: u64,
        seed: u64,
        sampling: Sampling,
    ) -> Result<Vec<u64>> {
        if samples == 0 {
            return Err(invalid_arg("samples must be at least 1"));
        }
        if let Some(eps) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(invalid_arg(format!("epsilon {eps} is outside (0, 1]")));
        }
        if let Sampling::Corner { delta } = sampling {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(invalid_arg(format!("corner delta {delta} is outside (0, 1]")));
            }
        }
        let thresholds: Vec<f64> = epsilons.iter().map(|e| 1.0 - e).collect();
        let blocks = samples.div_ceil(BLOCK_SAMPLES);
        let dim = self.objective.dimension();
        let per_block = |block: u64| -> Vec<u64> {
            let mut rng = substream(seed, block);
            let mut ev = self.objective.evaluator();
            let mut point = vec![0.0; dim];
            let mut hits = vec![0u64; thresholds.len()];
            let n = BLOCK_SAMPLES.min(samples - block * BLOCK_SAMPLES);
            for _ in 0..n {
                match sampling {
                    Sampling::Uniform => point.iter_mut().for_each(|p| *p = rng.gen()),
                    Sampling::Corner { delta } => {
                        for (p, &flip) in point.iter_mut().zip(&self.corner) {
                            let off = delta * rng.gen::<f64>();
                            *p = if flip { off } else { 1.0 - off };
                        }
                    }
                }
                let f = ev.eval(&point);
                for (h, &t) in hits.iter_mut().zip(&thresholds) {
                    *h += (f >= t) as u64;
                }
            }
            hits
        };
        Ok((0..blocks)
            .into_par_iter()
            .map(per_block)
            .reduce(
                || vec![0; thresholds.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            ))
    }
}

/// Uniform-sampling estimate of `γ` at tolerance `ε`.
pub fn estimate_gamma(
    kind: CircuitKind,
    target: &TargetSpec,
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> Result<RegionEstimate> {
    RegionSampler::new(kind, target).estimate(epsilon, samples, seed, Sampling::Uniform)
}

/// Runs [`estimate_gamma`] and returns its upper confidence bound.
pub fn gamma_upper_bound(
    kind: CircuitKind,
    target: &TargetSpec,
    epsilon: f64,
    samples: u64,
    confidence: f64,
    seed: u64,
) -> Result<f64> {
    estimate_gamma(kind, target, epsilon, samples, seed)?.upper_bound(confidence)
}
