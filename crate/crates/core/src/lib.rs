//! Simulation of classical probabilistic and quantum circuits that learn
//! N-bit Boolean functions.
//!
//! A function is given by its Reed-Muller coefficients ([`task`]). The
//! circuit applies one controlled gate per coefficient to a single work
//! channel ([`circuits`]) and is scored against the target by the
//! task-fidelity ([`fidelity`]). On top of that sit Monte-Carlo volume
//! estimates of the acceptable region ([`region`]), the two learners
//! ([`learners`]), curve fits ([`fitting`]) and the experiment drivers
//! ([`harness`]).

pub mod circuits;
pub mod digest;
pub mod error;
pub mod fidelity;
pub mod fitting;
pub mod harness;
pub mod learners;
pub mod region;
pub mod rng;
pub mod task;

pub use circuits::{
    circuit_distribution, classical_prob_zero, gate_unitary, optimized_phases, quantum_amplitude,
    CircuitKind, ConditionalDistribution, GateUnitary, ParameterVector, PhaseVector,
};
pub use error::{Error, Result};
pub use fidelity::{
    closed_form_fc_1bit, closed_form_fq_1bit, target_distribution, task_fidelity, Fidelity,
    FidelityObjective, TargetSpec,
};
pub use fitting::{empirical_cdf, fit_exponential_cdf, fit_power_law, ExponentialFit, PowerLawFit};
pub use learners::{
    de_run, learning_probability, random_search, run_trials, DEConfig, LearnConfig, LearningTrace,
    Population,
};
pub use region::{estimate_gamma, gamma_upper_bound, RegionEstimate, RegionSampler, Sampling};
pub use task::{active_set, eval_boolean, BooleanTask, InputWord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
