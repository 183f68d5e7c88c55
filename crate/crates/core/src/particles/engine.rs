use rayon::prelude::*;

use super::{MarginalFlow, ParticleState, SimulationConfig};
use crate::coefficient::CoefficientField;
use crate::empirical::{wasserstein2, EmpiricalMeasure};
use crate::error::{invalid, Error, Result};
use crate::rng::StreamFactory;

#[inline]
fn increment(cfg: &SimulationConfig, streams: &StreamFactory, id: u64, step: usize) -> f64 {
    let mut rng = streams.stream(id, step as u64);
    cfg.driver.sample_truncated(cfg.dt, cfg.truncation, &mut rng)
}

fn check_step(cfg: &SimulationConfig, step: usize) -> Result<()> {
    if step >= cfg.steps {
        return Err(invalid("step", format!("step {step} would pass the horizon ({} steps)", cfg.steps)));
    }
    Ok(())
}

fn check_finite(positions: &[f64], step: usize) -> Result<()> {
    match positions.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite {
            step,
            particle: i,
            value: positions[i],
        }),
        None => Ok(()),
    }
}

fn advance(
    state: &ParticleState,
    field: &CoefficientField<'_>,
    cfg: &SimulationConfig,
    streams: &StreamFactory,
    step: usize,
) -> Result<ParticleState> {
    let positions: Vec<f64> = state
        .positions
        .par_iter()
        .zip(state.ids.par_iter())
        .map(|(&x, &id)| x + field.at(x) * increment(cfg, streams, id, step))
        .collect();
    check_finite(&positions, step)?;
    Ok(ParticleState {
        time: cfg.time(step + 1),
        positions,
        ids: state.ids.clone(),
    })
}

/// One step of the interacting system, `σ` evaluated against the particles' own empirical measure.
pub fn step_interacting(
    state: &ParticleState,
    cfg: &SimulationConfig,
    streams: &StreamFactory,
    step: usize,
) -> Result<ParticleState> {
    check_step(cfg, step)?;
    let mu = state.empirical()?;
    let field = cfg.sigma.field(&mu, cfg.field, state.len());
    advance(state, &field, cfg, streams, step)
}

/// One step of the linear SDE driven by `σ(·, Q_t)` for an externally given marginal `Q_t`.
pub fn step_frozen_flow(
    state: &ParticleState,
    flow_marginal: &EmpiricalMeasure,
    cfg: &SimulationConfig,
    streams: &StreamFactory,
    step: usize,
) -> Result<ParticleState> {
    check_step(cfg, step)?;
    let field = cfg.sigma.field(flow_marginal, cfg.field, state.len());
    advance(state, &field, cfg, streams, step)
}

/// Recorded flow plus the final particle state.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub flow: MarginalFlow,
    pub final_state: ParticleState,
}

pub fn simulate_run(cfg: &SimulationConfig) -> Result<SimulationRun> {
    let streams = cfg.increment_streams();
    let mut state = cfg.initial_state()?;
    let mut times = vec![0.0];
    let mut marginals = vec![state.empirical()?];
    for step in 0..cfg.steps {
        state = step_interacting(&state, cfg, &streams, step)?;
        if cfg.records(step + 1) {
            times.push(state.time);
            marginals.push(state.empirical()?);
        }
    }
    Ok(SimulationRun {
        flow: MarginalFlow::new(times, marginals)?,
        final_state: state,
    })
}

/// Runs the interacting particle system to the horizon and records its marginals.
pub fn simulate(cfg: &SimulationConfig) -> Result<MarginalFlow> {
    simulate_run(cfg).map(|r| r.flow)
}

/// Pathwise comparison between the particle system and frozen-flow copies.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    /// `sup_k |X^{i,n}_{t_k} - X^i_{t_k}|`, indexed by particle.
    pub sup_gaps: Vec<f64>,
    /// Times at which `d(μⁿ_system, μⁿ_copies) > |ξ - ζ|/√n` (should stay 0).
    pub vasdis_violations: usize,
}

impl CoupledRun {
    /// `(1/n) Σᵢ sup_t |X^{i,n} - X^i|²`.
    pub fn mean_square_sup_gap(&self) -> f64 {
        self.sup_gaps.iter().map(|g| g * g).sum::<f64>() / self.sup_gaps.len() as f64
    }
}

/// Runs the interacting system and the copies driven by `σ(·, P_t)` with
/// `P_t` taken from `reference_flow`, sharing `X₀` and every increment per
/// particle index.
pub fn simulate_coupled(cfg: &SimulationConfig, reference_flow: &MarginalFlow) -> Result<CoupledRun> {
    if reference_flow.len() != cfg.steps + 1
        || (0..=cfg.steps).any(|k| (reference_flow.times()[k] - cfg.time(k)).abs() > 1e-9)
    {
        return Err(Error::IncompatibleFlow(format!(
            "reference flow must be recorded at all {} step times",
            cfg.steps + 1
        )));
    }
    let streams = cfg.increment_streams();
    let start = cfg.initial_state()?;
    let n = start.len();
    let mut system = start.positions.clone();
    let mut copies = start.positions;
    let ids = start.ids;
    let mut sup_gaps = vec![0.0f64; n];
    let mut vasdis_violations = 0;

    for step in 0..cfg.steps {
        let mu = EmpiricalMeasure::from_slice(&system)?;
        let sys_field = cfg.sigma.field(&mu, cfg.field, n);
        let ref_field = cfg.sigma.field(reference_flow.marginal(step), cfg.field, n);
        let next: Vec<(f64, f64)> = system
            .par_iter()
            .zip(copies.par_iter())
            .zip(ids.par_iter())
            .map(|((&xs, &xc), &id)| {
                let dz = increment(cfg, &streams, id, step);
                (xs + sys_field.at(xs) * dz, xc + ref_field.at(xc) * dz)
            })
            .collect();
        for (i, (xs, xc)) in next.into_iter().enumerate() {
            system[i] = xs;
            copies[i] = xc;
            sup_gaps[i] = sup_gaps[i].max((xs - xc).abs());
        }
        check_finite(&system, step)?;
        check_finite(&copies, step)?;

        let d = wasserstein2(&EmpiricalMeasure::from_slice(&system)?, &EmpiricalMeasure::from_slice(&copies)?)?;
        let euclid = system.iter().zip(&copies).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d > euclid / (n as f64).sqrt() + 1e-12 {
            vasdis_violations += 1;
        }
    }
    Ok(CoupledRun {
        sup_gaps,
        vasdis_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{CoefficientSpec, FieldStrategy, InteractionKernel};
    use crate::levy_driver::{Driver, LevyTripletSpec, StableDriverSpec};
    use crate::particles::InitialLaw;
    use crate::rng::Domain;

    fn sine(c0: f64, c1: f64) -> CoefficientSpec {
        CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Sine { c0, c1 },
        }
    }

    fn stable_cfg(n: usize, sigma: CoefficientSpec) -> SimulationConfig {
        SimulationConfig::new(
            n,
            0.05,
            0.5,
            17,
            Driver::Stable(StableDriverSpec::new(1.5, 1.0).unwrap()),
            sigma,
            InitialLaw::Gaussian { mean: 0.0, std: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn zero_coefficient_freezes_particles() {
        let cfg = stable_cfg(20, CoefficientSpec::Constant { value: 0.0 });
        let s0 = cfg.initial_state().unwrap();
        let s1 = step_interacting(&s0, &cfg, &cfg.increment_streams(), 0).unwrap();
        assert_eq!(s0.positions, s1.positions);
        assert!((s1.time - 0.05).abs() < 1e-15);
    }

    #[test]
    fn deterministic_drift_moves_everyone() {
        let cfg = SimulationConfig::new(
            8,
            0.5,
            1.0,
            3,
            Driver::Triplet(LevyTripletSpec::drift(1.0).unwrap()),
            CoefficientSpec::Constant { value: 1.0 },
            InitialLaw::Uniform { low: -1.0, high: 1.0 },
        )
        .unwrap();
        let s0 = cfg.initial_state().unwrap();
        let s1 = step_interacting(&s0, &cfg, &cfg.increment_streams(), 0).unwrap();
        for (a, b) in s0.positions.iter().zip(&s1.positions) {
            assert_eq!(*b, a + 0.5);
        }
    }

    #[test]
    fn two_particle_step_matches_hand_update() {
        let cfg = stable_cfg(2, sine(1.0, 0.5));
        let streams = cfg.increment_streams();
        let s0 = cfg.initial_state().unwrap();
        let s1 = step_interacting(&s0, &cfg, &streams, 0).unwrap();
        let (a, b) = (s0.positions[0], s0.positions[1]);
        let driver = StableDriverSpec::new(1.5, 1.0).unwrap();
        for (i, x) in [a, b].into_iter().enumerate() {
            let sigma = 1.0 + 0.5 * ((x - a).sin() + (x - b).sin()) / 2.0;
            let dz = driver.sample_increment(cfg.dt, &mut streams.stream(i as u64, 0));
            assert!((s1.positions[i] - (x + sigma * dz)).abs() < 1e-13);
        }
    }

    #[test]
    fn cannot_step_past_horizon() {
        let cfg = stable_cfg(3, CoefficientSpec::Constant { value: 1.0 });
        let s0 = cfg.initial_state().unwrap();
        assert!(step_interacting(&s0, &cfg, &cfg.increment_streams(), cfg.steps).is_err());
    }

    #[test]
    fn measure_independent_sigma_frozen_step_matches_interacting_step() {
        let cfg = stable_cfg(30, CoefficientSpec::Constant { value: 0.7 });
        let streams = cfg.increment_streams();
        let s0 = cfg.initial_state().unwrap();
        let other = EmpiricalMeasure::from_slice(&[5.0, 6.0]).unwrap();
        let a = step_interacting(&s0, &cfg, &streams, 0).unwrap();
        let b = step_frozen_flow(&s0, &other, &cfg, &streams, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_against_own_flow_reproduces_trajectories() {
        let cfg = stable_cfg(25, sine(1.0, 0.8));
        let run = simulate_run(&cfg).unwrap();
        let streams = cfg.increment_streams();
        let mut state = cfg.initial_state().unwrap();
        for step in 0..cfg.steps {
            state = step_frozen_flow(&state, run.flow.marginal(step), &cfg, &streams, step).unwrap();
        }
        assert_eq!(state.positions, run.final_state.positions);
    }

    #[test]
    fn one_particle_frozen_hand_check() {
        let cfg = stable_cfg(1, sine(1.0, 0.5));
        let streams = cfg.increment_streams();
        let s0 = cfg.initial_state().unwrap();
        let q = EmpiricalMeasure::from_slice(&[0.3, -0.4]).unwrap();
        let s1 = step_frozen_flow(&s0, &q, &cfg, &streams, 0).unwrap();
        let x = s0.positions[0];
        let sigma = 1.0 + 0.5 * ((x - 0.3).sin() + (x + 0.4).sin()) / 2.0;
        let dz = StableDriverSpec::new(1.5, 1.0).unwrap().sample_increment(cfg.dt, &mut streams.stream(0, 0));
        assert!((s1.positions[0] - (x + sigma * dz)).abs() < 1e-13);
    }

    #[test]
    fn exchangeability_under_relabelling() {
        let cfg = stable_cfg(12, CoefficientSpec::SmoothedDensityPower { eps: 0.5, s: 0.5 });
        let streams = cfg.increment_streams();
        let s0 = cfg.initial_state().unwrap();
        let perm: Vec<usize> = (0..12).map(|i| (i * 5 + 3) % 12).collect();
        let permuted = ParticleState::with_ids(
            0.0,
            perm.iter().map(|&i| s0.positions[i]).collect(),
            perm.iter().map(|&i| s0.ids[i]).collect(),
        )
        .unwrap();
        let a = step_interacting(&s0, &cfg, &streams, 0).unwrap();
        let b = step_interacting(&permuted, &cfg, &streams, 0).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(b.positions[k], a.positions[i]);
        }
    }

    #[test]
    fn constant_sigma_is_exact_sum_of_increments() {
        let c = 0.8;
        let cfg = stable_cfg(10, CoefficientSpec::Constant { value: c });
        let run = simulate_run(&cfg).unwrap();
        let s0 = cfg.initial_state().unwrap();
        let streams = cfg.increment_streams();
        for i in 0..10 {
            let mut sum = 0.0;
            let mut x = s0.positions[i];
            for step in 0..cfg.steps {
                let dz = increment(&cfg, &streams, i as u64, step);
                sum += dz;
                x += c * dz;
            }
            assert_eq!(run.final_state.positions[i], x);
            assert!((x - s0.positions[i] - c * sum).abs() < 1e-12);
        }
    }

    #[test]
    fn measure_independent_coupling_has_zero_gaps() {
        let cfg = stable_cfg(40, sine(1.3, 0.0));
        let reference = simulate(&cfg.with_particles(100).with_seed(99)).unwrap();
        let run = simulate_coupled(&cfg, &reference).unwrap();
        assert!(run.sup_gaps.iter().all(|&g| g == 0.0));
        assert_eq!(run.vasdis_violations, 0);
    }

    #[test]
    fn one_particle_coupling_gap_is_path_difference() {
        let cfg = stable_cfg(1, sine(1.0, 0.5));
        let reference = simulate(&cfg.with_particles(50).with_seed(5)).unwrap();
        let run = simulate_coupled(&cfg, &reference).unwrap();

        let streams = cfg.increment_streams();
        let mut a = cfg.initial_state().unwrap();
        let mut b = a.clone();
        let mut sup: f64 = 0.0;
        for step in 0..cfg.steps {
            a = step_interacting(&a, &cfg, &streams, step).unwrap();
            b = step_frozen_flow(&b, reference.marginal(step), &cfg, &streams, step).unwrap();
            sup = sup.max((a.positions[0] - b.positions[0]).abs());
        }
        assert_eq!(run.sup_gaps[0], sup);
        assert!(sup > 0.0);
    }

    #[test]
    fn coupled_rejects_mismatched_reference() {
        let cfg = stable_cfg(5, sine(1.0, 0.5));
        let coarse = cfg.clone().with_record_every(2).unwrap();
        let reference = simulate(&coarse).unwrap();
        assert!(matches!(simulate_coupled(&cfg, &reference), Err(Error::IncompatibleFlow(_))));
    }

    #[test]
    fn exact_and_binned_fields_agree_on_small_runs() {
        let base = stable_cfg(400, CoefficientSpec::SmoothedDensityPower { eps: 0.5, s: 0.5 });
        let a = simulate_run(&base.clone().with_field(FieldStrategy::Exact)).unwrap();
        let b = simulate_run(&base.with_field(FieldStrategy::Binned)).unwrap();
        let gap = a
            .final_state
            .positions
            .iter()
            .zip(&b.final_state.positions)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-2, "gap={gap}");
    }

    #[test]
    fn non_finite_positions_abort() {
        let cfg = stable_cfg(3, CoefficientSpec::Constant { value: f64::MAX });
        let streams = StreamFactory::new(1, Domain::Increments);
        let state = ParticleState::new(0.0, vec![f64::MAX, 0.0, 1.0]);
        let err = (0..cfg.steps).try_fold(state, |s, k| step_interacting(&s, &cfg, &streams, k));
        assert!(matches!(err, Err(Error::NonFinite { .. })));
    }
}
