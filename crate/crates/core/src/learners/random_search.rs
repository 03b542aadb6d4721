use rand::Rng;

use super::{LearnConfig, LearningTrace};
use crate::error::Result;
use crate::fidelity::FidelityObjective;

/// Draws fresh uniform parameter vectors until one is acceptable. Each draw
/// counts as one iteration, the first being iteration 1.
pub fn random_search(config: &LearnConfig) -> Result<LearningTrace> {
    config.validate()?;
    let objective = FidelityObjective::new(config.kind, &config.target);
    let mut ev = objective.evaluator();
    let mut rng = config.rng();
    let mut trace = LearningTrace::start(config, config);
    let threshold = config.threshold();
    let mut point = vec![0.0; objective.dimension()];
    let mut best = 0.0f64;
    for n in 1..=config.max_iterations {
        point.iter_mut().for_each(|p| *p = rng.gen());
        let f = ev.eval(&point);
        if config.record_series {
            best = best.max(f);
            trace.best_fidelity_series.push(best);
        }
        if f >= threshold {
            trace.iterations_to_success = Some(n);
            break;
        }
    }
    Ok(trace)
}
