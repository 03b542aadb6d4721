//! Task-fidelity between a circuit and a deterministic target.
//!
//! For each input the circuit and target output distributions are compared
//! with the Bhattacharyya coefficient `F_x = Σ_y √(P(y|x)·P_τ(y|x))`; the
//! task-fidelity is the geometric mean of `F_x` over all `2^N` inputs.

use serde::{Deserialize, Serialize};

use crate::circuits::{
    classical_zero_raw, optimized_phases, CircuitKind, ConditionalDistribution, PhaseVector,
    QuantumGates,
};
use crate::error::{invalid_arg, Error, Result};
use crate::task::BooleanTask;

/// Above this many inputs the geometric mean is taken in log space.
const DIRECT_PRODUCT_MAX_INPUTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Fidelity(f64);

impl Fidelity {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid_arg(format!("fidelity {value} is outside [0, 1]")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Snaps rounding noise at the ends of `[0, 1]`.
    pub(crate) fn saturating(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }
}

/// The deterministic function a circuit is asked to learn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub task: BooleanTask,
}

impl TargetSpec {
    pub fn new(task: BooleanTask) -> Self {
        Self { task }
    }

    /// The constant-0 target used throughout the experiments.
    pub fn constant_zero(n_bits: u32) -> Result<Self> {
        Ok(Self::new(BooleanTask::constant_zero(n_bits)?))
    }

    pub fn n_bits(&self) -> u32 {
        self.task.n_bits()
    }
}

/// Distribution putting all mass on `y = f(x)`.
pub fn target_distribution(spec: &TargetSpec) -> ConditionalDistribution {
    let prob_zero = spec
        .task
        .truth_table()
        .into_iter()
        .map(|y| if y { 0.0 } else { 1.0 })
        .collect();
    ConditionalDistribution::from_prob_zero(prob_zero).expect("0/1 entries are probabilities")
}

/// Geometric mean of per-input fidelities. Any zero term gives zero.
fn geometric_mean(terms: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = terms.len();
    if n > DIRECT_PRODUCT_MAX_INPUTS {
        let mut log_sum = 0.0;
        for f in terms {
            if f <= 0.0 {
                return 0.0;
            }
            log_sum += f.ln();
        }
        (log_sum / n as f64).exp()
    } else {
        let prod: f64 = terms.product();
        if prod <= 0.0 {
            0.0
        } else {
            prod.powf(1.0 / n as f64)
        }
    }
}

pub fn task_fidelity(
    circuit: &ConditionalDistribution,
    target: &ConditionalDistribution,
) -> Result<Fidelity> {
    if circuit.n_bits() != target.n_bits() {
        return Err(invalid_arg(format!(
            "circuit covers {} bits, target {}",
            circuit.n_bits(),
            target.n_bits()
        )));
    }
    let n = circuit.prob_zero().len();
    let per_input = (0..n).map(|x| {
        [false, true]
            .iter()
            .map(|&y| (circuit.prob(x, y) * target.prob(x, y)).sqrt())
            .sum::<f64>()
    });
    Ok(Fidelity::saturating(geometric_mean(per_input)))
}

/// `ℱ_C = [p0 − p0(p0 + p1) + 2p0²p1]^{1/4}` for the 1-bit circuit learning
/// the constant-0 function.
pub fn closed_form_fc_1bit(p0: f64, p1: f64) -> Result<Fidelity> {
    for p in [p0, p1] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid_arg(format!("probability {p} is outside [0, 1]")));
        }
    }
    Ok(Fidelity::saturating(classical_quartic(p0, p1).max(0.0).powf(0.25)))
}

fn classical_quartic(p0: f64, p1: f64) -> f64 {
    p0 - p0 * (p0 + p1) + 2.0 * p0 * p0 * p1
}

/// `ℱ_Q = [ℱ_C⁴ − 2p0·√(p0p1(1−p0)(1−p1))·cosΔ]^{1/4}` for the 1-bit quantum
/// circuit learning the constant-0 function, `Δ = φ_1 − φ_0`.
pub fn closed_form_fq_1bit(p0: f64, p1: f64, delta: f64) -> Result<Fidelity> {
    closed_form_fc_1bit(p0, p1)?;
    let fc4 = classical_quartic(p0, p1);
    let radicand =
        fc4 - 2.0 * p0 * (p0 * p1 * (1.0 - p0) * (1.0 - p1)).sqrt() * delta.cos();
    if radicand < -1e-12 {
        return Err(Error::NumericDomain(format!(
            "negative quartic fidelity {radicand} at p0={p0}, p1={p1}, delta={delta}"
        )));
    }
    Ok(Fidelity::saturating(radicand.max(0.0).powf(0.25)))
}

/// Fidelity of a circuit against a fixed target, evaluated straight from the
/// gate probabilities without building the distribution. This is the
/// objective both learners maximize.
#[derive(Debug, Clone)]
pub struct FidelityObjective {
    kind: CircuitKind,
    n_bits: u32,
    truth: Vec<bool>,
    phases: Option<PhaseVector>,
}

impl FidelityObjective {
    /// Quantum circuits use the parity phase pattern.
    pub fn new(kind: CircuitKind, target: &TargetSpec) -> Self {
        let phases = match kind {
            CircuitKind::Classical => None,
            CircuitKind::Quantum => Some(optimized_phases(target.n_bits())),
        };
        Self {
            kind,
            n_bits: target.n_bits(),
            truth: target.task.truth_table(),
            phases,
        }
    }

    pub fn with_phases(target: &TargetSpec, phases: PhaseVector) -> Result<Self> {
        if phases.n_bits() != target.n_bits() {
            return Err(invalid_arg("phase and target widths differ"));
        }
        Ok(Self {
            kind: CircuitKind::Quantum,
            n_bits: target.n_bits(),
            truth: target.task.truth_table(),
            phases: Some(phases),
        })
    }

    pub fn kind(&self) -> CircuitKind {
        self.kind
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn dimension(&self) -> usize {
        self.truth.len()
    }

    /// An evaluator with its own scratch space; one per thread.
    pub fn evaluator(&self) -> Evaluator<'_> {
        let gates = self.phases.as_ref().map(|ph| {
            QuantumGates::new(&vec![1.0; ph.as_slice().len()], ph.as_slice())
        });
        Evaluator {
            objective: self,
            gates,
        }
    }

    /// Convenience single-shot evaluation.
    pub fn fidelity(&self, probs: &[f64]) -> Result<Fidelity> {
        if probs.len() != self.dimension() {
            return Err(invalid_arg(format!(
                "expected {} parameters, got {}",
                self.dimension(),
                probs.len()
            )));
        }
        Ok(Fidelity::saturating(self.evaluator().eval(probs)))
    }
}

pub struct Evaluator<'a> {
    objective: &'a FidelityObjective,
    gates: Option<QuantumGates>,
}

impl Evaluator<'_> {
    /// Task-fidelity of `probs`, which must have length `2^N` and lie in
    /// `[0, 1]`; checked only in debug builds.
    pub fn eval(&mut self, probs: &[f64]) -> f64 {
        let obj = self.objective;
        debug_assert_eq!(probs.len(), obj.truth.len());
        debug_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        let hit = |p0: f64, y: bool| {
            let p = if y { 1.0 - p0 } else { p0 };
            p.clamp(0.0, 1.0).sqrt()
        };
        let value = match &mut self.gates {
            None => geometric_mean(
                obj.truth
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| hit(classical_zero_raw(probs, x), y)),
            ),
            Some(gates) => {
                gates.refill(probs, obj.phases.as_ref().unwrap().as_slice());
                let gates = &*gates;
                geometric_mean(
                    obj.truth
                        .iter()
                        .enumerate()
                        .map(|(x, &y)| hit(gates.amplitude(x).norm_sqr(), y)),
                )
            }
        };
        value.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{circuit_distribution, ParameterVector};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn f1() -> TargetSpec {
        TargetSpec::constant_zero(1).unwrap()
    }

    #[test]
    fn targets() {
        let d = target_distribution(&f1());
        assert_eq!(d.prob(0, false), 1.0);
        assert_eq!(d.prob(0, true), 0.0);
        assert_eq!(d.prob(1, false), 1.0);
        assert_eq!(d.prob(1, true), 0.0);

        let d = target_distribution(&TargetSpec::constant_zero(2).unwrap());
        assert_eq!(d.prob_zero(), &[1.0; 4]);

        let ident = TargetSpec::new(BooleanTask::from_bits(1, &[0, 1]).unwrap());
        let d = target_distribution(&ident);
        assert_eq!(d.prob(0, false), 1.0);
        assert_eq!(d.prob(1, true), 1.0);
    }

    #[test]
    fn fidelity_examples() {
        let t = target_distribution(&f1());
        assert_abs_diff_eq!(task_fidelity(&t, &t).unwrap().value(), 1.0);

        let p = ParameterVector::new(vec![0.9, 0.9]).unwrap();
        let c = circuit_distribution(CircuitKind::Classical, &p, None).unwrap();
        assert_abs_diff_eq!(
            task_fidelity(&c, &t).unwrap().value(),
            0.738f64.powf(0.25),
            epsilon = 1e-12
        );
        let q = circuit_distribution(CircuitKind::Quantum, &p, Some(&optimized_phases(1))).unwrap();
        assert_abs_diff_eq!(
            task_fidelity(&q, &t).unwrap().value(),
            0.9f64.powf(0.25),
            epsilon = 1e-12
        );

        let t2 = target_distribution(&TargetSpec::constant_zero(2).unwrap());
        assert!(task_fidelity(&c, &t2).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(closed_form_fc_1bit(1.0, 1.0).unwrap().value(), 1.0);
        assert_abs_diff_eq!(closed_form_fc_1bit(0.9, 0.9).unwrap().value(), 0.738f64.powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(closed_form_fc_1bit(0.5, 0.5).unwrap().value(), 0.25f64.powf(0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(closed_form_fq_1bit(1.0, 1.0, 0.3).unwrap().value(), 1.0);
        assert_abs_diff_eq!(closed_form_fq_1bit(0.9, 0.9, PI).unwrap().value(), 0.974_004, epsilon = 1e-6);
        assert_abs_diff_eq!(
            closed_form_fq_1bit(0.9, 0.9, PI / 2.0).unwrap().value(),
            closed_form_fc_1bit(0.9, 0.9).unwrap().value(),
            epsilon = 1e-12
        );
        assert!(closed_form_fc_1bit(1.1, 0.5).is_err());
    }

    #[test]
    fn zero_term_forces_zero() {
        let t = target_distribution(&TargetSpec::constant_zero(1).unwrap());
        let c = ConditionalDistribution::from_prob_zero(vec![0.0, 1.0]).unwrap();
        assert_eq!(task_fidelity(&c, &t).unwrap().value(), 0.0);
        // Log-space branch.
        let t = target_distribution(&TargetSpec::constant_zero(7).unwrap());
        let mut p0 = vec![0.99; 128];
        p0[17] = 0.0;
        let c = ConditionalDistribution::from_prob_zero(p0).unwrap();
        assert_eq!(task_fidelity(&c, &t).unwrap().value(), 0.0);
    }

    #[test]
    fn log_and_direct_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let terms: Vec<f64> = (0..64).map(|_| rng.gen_range(0.2..1.0)).collect();
            let direct = geometric_mean(terms.iter().copied());
            let log = (terms.iter().map(|t| t.ln()).sum::<f64>() / 64.0).exp();
            assert_abs_diff_eq!(direct, log, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_target_only_at_fidelity_one() {
        let spec = TargetSpec::new(BooleanTask::from_bits(2, &[1, 0, 1, 1]).unwrap());
        let t = target_distribution(&spec);
        assert_abs_diff_eq!(task_fidelity(&t, &t).unwrap().value(), 1.0);
        let mut p0 = t.prob_zero().to_vec();
        p0[2] = (p0[2] - 1e-3f64).abs();
        let c = ConditionalDistribution::from_prob_zero(p0).unwrap();
        assert!(task_fidelity(&c, &t).unwrap().value() < 1.0);
    }

    #[test]
    fn objective_matches_generic_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=7u32 {
            let task = BooleanTask::new(n, (0..1 << n).map(|_| rng.gen_bool(0.3)).collect()).unwrap();
            let spec = TargetSpec::new(task);
            let target = target_distribution(&spec);
            for kind in [CircuitKind::Classical, CircuitKind::Quantum] {
                let obj = FidelityObjective::new(kind, &spec);
                let mut ev = obj.evaluator();
                for _ in 0..20 {
                    let probs: Vec<f64> = (0..1 << n).map(|_| rng.gen()).collect();
                    let params = ParameterVector::new(probs.clone()).unwrap();
                    let phases = (kind == CircuitKind::Quantum).then(|| optimized_phases(n));
                    let d = circuit_distribution(kind, &params, phases.as_ref()).unwrap();
                    let generic = task_fidelity(&d, &target).unwrap().value();
                    assert_abs_diff_eq!(ev.eval(&probs), generic, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn quartic_difference_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = target_distribution(&f1());
        for _ in 0..1000 {
            let (p0, p1, delta) = (rng.gen::<f64>(), rng.gen::<f64>(), rng.gen_range(0.0..2.0 * PI));
            let params = ParameterVector::new(vec![p0, p1]).unwrap();
            let c = circuit_distribution(CircuitKind::Classical, &params, None).unwrap();
            let q = circuit_distribution(
                CircuitKind::Quantum,
                &params,
                Some(&PhaseVector::new(vec![0.0, delta]).unwrap()),
            )
            .unwrap();
            let fc = task_fidelity(&c, &t).unwrap().value();
            let fq = task_fidelity(&q, &t).unwrap().value();
            let expect = -2.0 * p0 * (p0 * p1 * (1.0 - p0) * (1.0 - p1)).sqrt() * delta.cos();
            assert_abs_diff_eq!(fq.powi(4) - fc.powi(4), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_zero_reduces_to_root_prob_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = TargetSpec::constant_zero(3).unwrap();
        let t = target_distribution(&spec);
        for _ in 0..100 {
            let params = ParameterVector::new((0..8).map(|_| rng.gen()).collect()).unwrap();
            let d = circuit_distribution(CircuitKind::Classical, &params, None).unwrap();
            let via_roots: f64 = d.prob_zero().iter().map(|p| p.sqrt()).product::<f64>().powf(1.0 / 8.0);
            assert_abs_diff_eq!(task_fidelity(&d, &t).unwrap().value(), via_roots, epsilon = 1e-12);
        }
    }
}
