//! Learning models: random search and differential evolution.
//!
//! Both maximize the task-fidelity of a circuit over the gate probabilities
//! and stop once a parameter vector reaches `ℱ ≥ 1 − ε`. Quantum circuits
//! keep the parity phase pattern fixed, so both kinds search the same
//! `2^N`-dimensional cube.

mod de;
mod random_search;

pub use de::{de_run, DEConfig, Population};
pub use random_search::random_search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::CircuitKind;
use crate::digest::config_digest;
use crate::error::{invalid_arg, Result};
use crate::fidelity::TargetSpec;
use crate::rng::{substream, StreamRng};

/// Default iteration caps.
pub const RS_MAX_ITERATIONS: u64 = 10_000_000;
pub const DE_MAX_ITERATIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub kind: CircuitKind,
    pub target: TargetSpec,
    /// Success tolerance; a run succeeds at `ℱ ≥ 1 − ε`.
    pub epsilon: f64,
    pub max_iterations: u64,
    pub seed: u64,
    /// Random stream under `seed`; trial `t` of an experiment uses stream `t`.
    #[serde(default)]
    pub stream: u64,
    /// Keep per-iteration fidelity series in the trace.
    #[serde(default)]
    pub record_series: bool,
    /// Differential evolution keeps iterating after the first success
    /// until at least this many iterations have run, so fidelity curves
    /// share a common horizon. The success iteration is unaffected.
    #[serde(default)]
    pub min_iterations: u64,
}

impl LearnConfig {
    pub fn new(kind: CircuitKind, target: TargetSpec, epsilon: f64, max_iterations: u64, seed: u64) -> Self {
        Self {
            kind,
            target,
            epsilon,
            max_iterations,
            seed,
            stream: 0,
            record_series: false,
            min_iterations: 0,
        }
    }

    pub fn n_bits(&self) -> u32 {
        self.target.n_bits()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid_arg(format!("epsilon {} is outside (0, 1]", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(invalid_arg("max_iterations must be positive"));
        }
        Ok(())
    }

    pub fn with_stream(&self, stream: u64) -> Self {
        Self {
            stream,
            ..self.clone()
        }
    }

    pub fn with_series(mut self, record: bool) -> Self {
        self.record_series = record;
        self
    }

    pub fn with_min_iterations(mut self, n: u64) -> Self {
        self.min_iterations = n;
        self
    }

    pub(crate) fn rng(&self) -> StreamRng {
        substream(self.seed, self.stream)
    }

    pub(crate) fn threshold(&self) -> f64 {
        1.0 - self.epsilon
    }
}

/// Outcome of one learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningTrace {
    /// `None` when the iteration cap was hit first.
    pub iterations_to_success: Option<u64>,
    /// Best fidelity seen so far, per iteration. For differential evolution
    /// entry 0 is the initial population.
    pub best_fidelity_series: Vec<f64>,
    /// Population-mean fidelity per iteration (differential evolution only).
    pub mean_fidelity_series: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub config_digest: String,
}

impl LearningTrace {
    pub(crate) fn start(config: &LearnConfig, digest_of: &impl Serialize) -> Self {
        Self {
            iterations_to_success: None,
            best_fidelity_series: Vec::new(),
            mean_fidelity_series: Vec::new(),
            seed: config.seed,
            stream: config.stream,
            config_digest: config_digest(digest_of),
        }
    }

    pub fn converged(&self) -> bool {
        self.iterations_to_success.is_some()
    }
}

/// Fraction of traces that succeeded within `n` iterations.
pub fn learning_probability(traces: &[LearningTrace], n: u64) -> Result<f64> {
    if traces.is_empty() {
        return Err(invalid_arg("no traces"));
    }
    let done = traces
        .iter()
        .filter(|t| t.iterations_to_success.is_some_and(|i| i <= n))
        .count();
    Ok(done as f64 / traces.len() as f64)
}

/// Runs `trials` independent trials in parallel, trial `t` on stream `t`.
/// The output is in trial order whatever the thread count.
pub fn run_trials<F>(config: &LearnConfig, trials: u64, run: F) -> Result<Vec<LearningTrace>>
where
    F: Fn(&LearnConfig) -> Result<LearningTrace> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| run(&config.with_stream(t)))
        .collect()
}
