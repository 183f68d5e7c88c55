use serde::{Deserialize, Serialize};

use super::engine::step_frozen_flow;
use super::{MarginalFlow, SimulationConfig};
use crate::empirical::EmpiricalMeasure;
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Domain, StreamFactory};

/// Noise used by successive fixed-point iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IncrementMode {
    /// Every iterate reuses the same increments; iterate gaps carry no Monte-Carlo noise.
    #[default]
    Common,
    /// Fresh increments per iterate.
    Independent,
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    /// `flows[0]` is the constant-in-time initial law, `flows[j]` the j-th iterate.
    pub flows: Vec<MarginalFlow>,
    /// `gaps[j] = sup_t d(flows[j]_t, flows[j+1]_t)`.
    pub gaps: Vec<f64>,
}

/// Fixed-point iteration `Q ↦ Φ(Q)` on marginal flows.
///
/// Iterate `j` simulates the linear SDE with coefficient `σ(·, Q^{j-1}_t)`
/// from a common sample of `X₀`. Marginals are recorded at every step.
pub fn picard_flow(cfg: &SimulationConfig, iterations: usize, mode: IncrementMode) -> Result<PicardResult> {
    if iterations == 0 {
        return Err(invalid("iterations", "must be at least 1"));
    }
    let cfg = cfg.clone().with_record_every(1)?;
    let start = cfg.initial_state()?;
    let times: Vec<f64> = (0..=cfg.steps).map(|k| cfg.time(k)).collect();
    let mut flows = vec![MarginalFlow::constant(times.clone(), start.empirical()?)?];
    let mut gaps = Vec::with_capacity(iterations);

    for j in 1..=iterations {
        let streams = match mode {
            IncrementMode::Common => cfg.increment_streams(),
            IncrementMode::Independent => StreamFactory::new(derive_seed(cfg.seed, &[j as u64]), Domain::Increments),
        };
        let previous = &flows[j - 1];
        let mut state = start.clone();
        let mut marginals = Vec::with_capacity(times.len());
        marginals.push(state.empirical()?);
        for step in 0..cfg.steps {
            state = step_frozen_flow(&state, previous.marginal(step), &cfg, &streams, step)?;
            marginals.push(EmpiricalMeasure::from_slice(&state.positions)?);
        }
        let next = MarginalFlow::new(times.clone(), marginals)?;
        gaps.push(previous.sup_distance(&next)?);
        flows.push(next);
    }
    Ok(PicardResult { flows, gaps })
}
