//! Differential evolution over the gate probabilities.
//!
//! One iteration updates every member `p_i` of the population:
//!
//! 1. mutant `m_i = p_a + W·(p_b − p_c)`, with `a`, `b`, `c` mutually
//!    distinct and different from `i`, clamped into `[0, 1]`;
//! 2. trial `t_i` keeps component `k` of `p_i` when `r_k > R` or `k = s`,
//!    and takes it from `m_i` otherwise (`r_k` uniform per component, `s` a
//!    uniform component index);
//! 3. `t_i` replaces `p_i` only if its fidelity is strictly larger.
//!
//! Trials are built from the population as it stood at the start of the
//! iteration and selection happens afterwards for all members at once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LearnConfig, LearningTrace};
use crate::error::{Error, Result};
use crate::fidelity::FidelityObjective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEConfig {
    /// Population size `M`.
    pub population: usize,
    /// Differential weight `W`.
    pub weight: f64,
    /// Crossover rate `R`.
    pub crossover: f64,
}

impl Default for DEConfig {
    fn default() -> Self {
        Self {
            population: 50,
            weight: 0.4,
            crossover: 0.85,
        }
    }
}

impl DEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidConfig(format!(
                "population {} is below 4; mutation needs three others",
                self.population
            )));
        }
        if !self.weight.is_finite() {
            return Err(Error::InvalidConfig("weight must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidConfig(format!(
                "crossover {} is outside [0, 1]",
                self.crossover
            )));
        }
        Ok(())
    }
}

/// Parameter vectors and their fidelities.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    members: Vec<Vec<f64>>,
    fitness: Vec<f64>,
}

impl Population {
    pub fn new<F>(members: Vec<Vec<f64>>, mut objective: F) -> Self
    where
        F: FnMut(&[f64]) -> f64,
    {
        let fitness = members.iter().map(|m| objective(m)).collect();
        Self { members, fitness }
    }

    /// `size` points drawn uniformly from `[0,1]^dim`.
    pub fn random<F, R>(size: usize, dim: usize, objective: F, rng: &mut R) -> Self
    where
        F: FnMut(&[f64]) -> f64,
        R: Rng + ?Sized,
    {
        let members = (0..size)
            .map(|_| (0..dim).map(|_| rng.gen()).collect())
            .collect();
        Self::new(members, objective)
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best(&self) -> f64 {
        self.fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }

    /// One differential-evolution iteration.
    pub fn step<F, R>(&mut self, de: &DEConfig, mut objective: F, rng: &mut R) -> Result<()>
    where
        F: FnMut(&[f64]) -> f64,
        R: Rng + ?Sized,
    {
        de.validate()?;
        let m = self.members.len();
        if m != de.population {
            return Err(Error::InvalidConfig(format!(
                "population has {m} members, config says {}",
                de.population
            )));
        }
        let dim = self.members[0].len();
        let mut trials = Vec::with_capacity(m);
        for i in 0..m {
            let [a, b, c] = pick_three(i, m, rng);
            let (pa, pb, pc) = (&self.members[a], &self.members[b], &self.members[c]);
            let s = rng.gen_range(0..dim);
            let parent = &self.members[i];
            let trial: Vec<f64> = (0..dim)
                .map(|k| {
                    let r: f64 = rng.gen();
                    if r > de.crossover || k == s {
                        parent[k]
                    } else {
                        (pa[k] + de.weight * (pb[k] - pc[k])).clamp(0.0, 1.0)
                    }
                })
                .collect();
            trials.push(trial);
        }
        for (i, trial) in trials.into_iter().enumerate() {
            let f = objective(&trial);
            if f > self.fitness[i] {
                self.members[i] = trial;
                self.fitness[i] = f;
            }
        }
        Ok(())
    }
}

/// Three mutually distinct indices in `0..m`, none equal to `i`.
fn pick_three<R: Rng + ?Sized>(i: usize, m: usize, rng: &mut R) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    for slot in 0..3 {
        out[slot] = loop {
            let j = rng.gen_range(0..m);
            if j != i && !out[..slot].contains(&j) {
                break j;
            }
        };
    }
    out
}

/// Differential evolution from a uniform random population until some
/// member reaches `ℱ ≥ 1 − ε` (or, with `min_iterations` set, until that
/// horizon too has passed). Success in the initial population counts as
/// iteration 0. Fidelity series, when recorded, start with the initial
/// population and so hold one more entry than the iterations performed.
pub fn de_run(config: &LearnConfig, de: &DEConfig) -> Result<LearningTrace> {
    config.validate()?;
    de.validate()?;
    let objective = FidelityObjective::new(config.kind, &config.target);
    let mut ev = objective.evaluator();
    let mut rng = config.rng();
    let mut trace = LearningTrace::start(config, &(config, de));
    let threshold = config.threshold();

    let mut pop = Population::random(
        de.population,
        objective.dimension(),
        |p| ev.eval(p),
        &mut rng,
    );
    let record = |pop: &Population, trace: &mut LearningTrace| {
        if config.record_series {
            trace.best_fidelity_series.push(pop.best());
            trace.mean_fidelity_series.push(pop.mean());
        }
    };
    record(&pop, &mut trace);
    if pop.best() >= threshold {
        trace.iterations_to_success = Some(0);
    }
    for n in 1..=config.max_iterations {
        if trace.iterations_to_success.is_some() && n > config.min_iterations {
            break;
        }
        pop.step(de, |p| ev.eval(p), &mut rng)?;
        record(&pop, &mut trace);
        if trace.iterations_to_success.is_none() && pop.best() >= threshold {
            trace.iterations_to_success = Some(n);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::CircuitKind;
    use crate::fidelity::TargetSpec;
    use crate::learners::run_trials;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn sphere(p: &[f64]) -> f64 {
        1.0 - p.iter().map(|x| (1.0 - x).powi(2)).sum::<f64>() / p.len() as f64
    }

    #[test]
    fn small_population_rejected() {
        let de = DEConfig {
            population: 3,
            ..DEConfig::default()
        };
        assert!(matches!(de.validate(), Err(Error::InvalidConfig(_))));
        let cfg = LearnConfig::new(CircuitKind::Quantum, TargetSpec::constant_zero(1).unwrap(), 0.05, 10, 0);
        assert!(de_run(&cfg, &de).is_err());
    }

    #[test]
    fn distinct_indices() {
        let mut rng = substream(1, 0);
        for _ in 0..10_000 {
            let i = rng.gen_range(0..4);
            let [a, b, c] = pick_three(i, 4, &mut rng);
            assert!(a != b && b != c && a != c);
            assert!(![a, b, c].contains(&i));
        }
    }

    #[test]
    fn zero_weight_copies_donor_components() {
        // With W = 0 and R = 1 every component but s comes from p_a, so each
        // trial component equals that member's own value or a member value.
        let mut rng = substream(2, 0);
        let members: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 10.0; 4]).collect();
        let mut pop = Population::new(members.clone(), |_| 0.0);
        let de = DEConfig {
            population: 6,
            weight: 0.0,
            crossover: 1.0,
        };
        let mut seen = Vec::new();
        pop.step(&de, |t| {
            seen.push(t.to_vec());
            0.0
        }, &mut rng)
        .unwrap();
        for (i, t) in seen.iter().enumerate() {
            let donors: Vec<f64> = t.iter().copied().filter(|&v| v != members[i][0]).collect();
            // All non-parent components share one donor value.
            assert!(donors.windows(2).all(|w| w[0] == w[1]));
            assert!(donors.len() <= 3);
        }
        assert_eq!(pop.members(), &members[..]);
    }

    #[test]
    fn zero_crossover_keeps_parent() {
        let mut rng = substream(3, 0);
        let mut pop = Population::random(8, 5, sphere, &mut rng);
        let before = pop.clone();
        let de = DEConfig {
            population: 8,
            weight: 0.7,
            crossover: 0.0,
        };
        let mut seen = Vec::new();
        pop.step(&de, |t| {
            seen.push(t.to_vec());
            sphere(t)
        }, &mut rng)
        .unwrap();
        for (i, t) in seen.iter().enumerate() {
            let differing = t.iter().zip(&before.members()[i]).filter(|(a, b)| a != b).count();
            assert!(differing <= 1);
        }
    }

    #[test]
    fn solved_population_is_fixed() {
        let mut rng = substream(4, 0);
        let cfg_obj = FidelityObjective::new(CircuitKind::Classical, &TargetSpec::constant_zero(2).unwrap());
        let mut ev = cfg_obj.evaluator();
        let mut pop = Population::new(vec![vec![1.0; 4]; 10], |p| ev.eval(p));
        let before = pop.clone();
        let de = DEConfig {
            population: 10,
            ..DEConfig::default()
        };
        for _ in 0..5 {
            pop.step(&de, |p| ev.eval(p), &mut rng).unwrap();
        }
        assert_eq!(pop, before);
        assert!(pop.fitness().iter().all(|&f| f == 1.0));
    }

    #[test]
    fn epsilon_one_stops_at_initialization() {
        let cfg = LearnConfig::new(CircuitKind::Classical, TargetSpec::constant_zero(3).unwrap(), 1.0, 100, 0)
            .with_series(true);
        let t = de_run(&cfg, &DEConfig::default()).unwrap();
        assert_eq!(t.iterations_to_success, Some(0));
        assert_eq!(t.mean_fidelity_series.len(), 1);
    }

    #[test]
    fn quantum_one_bit_converges_quickly() {
        let cfg = LearnConfig::new(CircuitKind::Quantum, TargetSpec::constant_zero(1).unwrap(), 0.05, 10_000, 9);
        let traces = run_trials(&cfg, 200, |c| de_run(c, &DEConfig::default())).unwrap();
        assert!(traces.iter().all(|t| t.converged()));
        let mean = traces.iter().map(|t| t.iterations_to_success.unwrap() as f64).sum::<f64>() / 200.0;
        assert!(mean < 3.0, "mean {mean}");
    }

    #[test]
    fn horizon_does_not_move_success() {
        let base = LearnConfig::new(CircuitKind::Quantum, TargetSpec::constant_zero(3).unwrap(), 0.05, 10_000, 12)
            .with_series(true);
        let de = DEConfig::default();
        for stream in 0..20 {
            let short = de_run(&base.with_stream(stream), &de).unwrap();
            let long = de_run(&base.with_stream(stream).with_min_iterations(60), &de).unwrap();
            assert_eq!(short.iterations_to_success, long.iterations_to_success);
            let n = short.mean_fidelity_series.len();
            assert_eq!(short.mean_fidelity_series[..], long.mean_fidelity_series[..n]);
            assert!(long.mean_fidelity_series.len() >= 61);
            assert!(long.mean_fidelity_series.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn reproducible_traces() {
        let cfg = LearnConfig::new(CircuitKind::Classical, TargetSpec::constant_zero(3).unwrap(), 0.05, 10_000, 5)
            .with_series(true);
        let de = DEConfig::default();
        assert_eq!(de_run(&cfg, &de).unwrap(), de_run(&cfg, &de).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn elitism_and_bounds(seed in any::<u64>(), n in 1u32..=4, quantum in any::<bool>()) {
            let kind = if quantum { CircuitKind::Quantum } else { CircuitKind::Classical };
            let obj = FidelityObjective::new(kind, &TargetSpec::constant_zero(n).unwrap());
            let mut ev = obj.evaluator();
            let mut rng = substream(seed, 0);
            let de = DEConfig { population: 12, weight: 0.9, crossover: 0.85 };
            let mut pop = Population::random(12, obj.dimension(), |p| ev.eval(p), &mut rng);
            for _ in 0..15 {
                let (best, mean) = (pop.best(), pop.mean());
                let old = pop.fitness().to_vec();
                pop.step(&de, |p| ev.eval(p), &mut rng).unwrap();
                prop_assert!(pop.best() >= best);
                prop_assert!(pop.mean() >= mean - 1e-15);
                prop_assert!(pop.fitness().iter().zip(&old).all(|(n, o)| n >= o));
                prop_assert!(pop.members().iter().flatten().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }
}
