//! Interacting particle approximation of the nonlinear SDE.
//!
//! `n` particles follow `X^i_{t+dt} = X^i_t + σ(X^i_t, μⁿ_t) ΔZ^i` where `μⁿ_t`
//! is their empirical measure and the `ΔZ^i` are independent driver
//! increments. The coefficient is frozen at the start of each step, matching
//! the predictable integrand `σ(X_{s-}, ·)`; stable increments are exact, so
//! for constant `σ` the scheme has no discretisation error at all.

mod chaos;
mod engine;
mod flow;
mod picard;

use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coefficient::{CoefficientSpec, FieldStrategy};
use crate::empirical::EmpiricalMeasure;
use crate::error::{invalid, Error, Result};
use crate::levy_driver::Driver;
use crate::rng::{Domain, StreamFactory};

pub use chaos::{chaos_rate_experiment, fit_loglog_slope, ChaosRateTable, ChaosRow, ChaosStatus, SlopeFit};
pub use engine::{simulate, simulate_coupled, simulate_run, step_frozen_flow, step_interacting, CoupledRun, SimulationRun};
pub use flow::MarginalFlow;
pub use picard::{picard_flow, IncrementMode, PicardResult};

/// Law of `X₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    PointMass { x: f64 },
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    /// Resampled with replacement from a single-column CSV.
    File { path: PathBuf },
}

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialLaw::PointMass { x } if !x.is_finite() => Err(invalid("initial_law.x", "must be finite")),
            InitialLaw::Gaussian { mean, std } if !(mean.is_finite() && *std >= 0.0 && std.is_finite()) => {
                Err(invalid("initial_law", "gaussian needs a finite mean and std ≥ 0"))
            }
            InitialLaw::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                Err(invalid("initial_law", "uniform needs low < high"))
            }
            _ => Ok(()),
        }
    }

    /// Density of the law, when it has one.
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            InitialLaw::Gaussian { mean, std } if std > 0.0 => {
                Some(crate::empirical::gaussian_kernel(std * std, x - mean))
            }
            InitialLaw::Uniform { low, high } => Some(if (low..high).contains(&x) { 1.0 / (high - low) } else { 0.0 }),
            _ => None,
        }
    }

    /// Draws `n` starting points; particle `i` uses its own substream.
    pub fn sample_positions(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let streams = StreamFactory::new(seed, Domain::InitialLaw);
        let pool = match self {
            InitialLaw::File { path } => {
                let file = std::fs::File::open(path)?;
                Some(EmpiricalMeasure::read_csv(file)?.into_samples())
            }
            _ => None,
        };
        Ok((0..n)
            .map(|i| {
                let mut rng = streams.stream(i as u64, 0);
                match (self, &pool) {
                    (InitialLaw::PointMass { x }, _) => *x,
                    (InitialLaw::Gaussian { mean, std }, _) => {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mean + std * z
                    }
                    (InitialLaw::Uniform { low, high }, _) => rng.random_range(*low..*high),
                    (InitialLaw::File { .. }, Some(pool)) => pool[rng.random_range(0..pool.len())],
                    (InitialLaw::File { .. }, None) => unreachable!("file pool loaded above"),
                }
            })
            .collect())
    }

    /// Convenience normal law.
    pub fn normal(mean: f64, std: f64) -> Self {
        debug_assert!(Normal::new(mean, std).is_ok());
        InitialLaw::Gaussian { mean, std }
    }
}

/// Everything needed to run the particle system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimulationFields")]
pub struct SimulationConfig {
    pub n_particles: usize,
    /// Effective step `horizon / steps`.
    pub dt: f64,
    /// Step as requested before rounding to a whole number of steps.
    pub requested_dt: f64,
    pub steps: usize,
    pub horizon: f64,
    pub seed: u64,
    pub driver: Driver,
    pub sigma: CoefficientSpec,
    pub initial_law: InitialLaw,
    pub truncation: Option<f64>,
    pub field: FieldStrategy,
    /// Marginals are recorded every `record_every` steps (and at the horizon).
    pub record_every: usize,
}

#[derive(Deserialize)]
struct SimulationFields {
    n_particles: usize,
    dt: f64,
    horizon: f64,
    #[serde(default)]
    seed: u64,
    driver: Driver,
    sigma: CoefficientSpec,
    initial_law: InitialLaw,
    #[serde(default)]
    truncation: Option<f64>,
    #[serde(default)]
    field: FieldStrategy,
    #[serde(default = "one_usize")]
    record_every: usize,
}

fn one_usize() -> usize {
    1
}

impl TryFrom<SimulationFields> for SimulationConfig {
    type Error = Error;

    fn try_from(f: SimulationFields) -> Result<Self> {
        let mut cfg = SimulationConfig::new(f.n_particles, f.dt, f.horizon, f.seed, f.driver, f.sigma, f.initial_law)?;
        cfg.field = f.field;
        cfg = cfg.with_record_every(f.record_every)?;
        if let Some(n) = f.truncation {
            cfg = cfg.with_truncation(n)?;
        }
        Ok(cfg)
    }
}

impl SimulationConfig {
    pub fn new(
        n_particles: usize,
        dt: f64,
        horizon: f64,
        seed: u64,
        driver: Driver,
        sigma: CoefficientSpec,
        initial_law: InitialLaw,
    ) -> Result<Self> {
        if n_particles == 0 {
            return Err(invalid("n_particles", "must be positive"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        sigma.validate()?;
        initial_law.validate()?;
        let steps = ((horizon / dt).round() as usize).max(1);
        Ok(Self {
            n_particles,
            dt: horizon / steps as f64,
            requested_dt: dt,
            steps,
            horizon,
            seed,
            driver,
            sigma,
            initial_law,
            truncation: None,
            field: FieldStrategy::Auto,
            record_every: 1,
        })
    }

    /// Removes driver jumps larger than `level`.
    pub fn with_truncation(mut self, level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(invalid("truncation", "level must be positive"));
        }
        if !self.driver.supports_truncation() {
            return Err(invalid(
                "truncation",
                "the stable driver does not expose its jumps; use a triplet (e.g. stable_like) driver",
            ));
        }
        self.truncation = Some(level);
        Ok(self)
    }

    pub fn with_field(mut self, field: FieldStrategy) -> Self {
        self.field = field;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Result<Self> {
        if every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        self.record_every = every;
        Ok(self)
    }

    pub fn with_particles(&self, n: usize) -> Self {
        Self {
            n_particles: n,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.steps {
            self.horizon
        } else {
            step as f64 * self.dt
        }
    }

    /// Whether marginals are stored after `step` steps.
    pub fn records(&self, step: usize) -> bool {
        step % self.record_every == 0 || step == self.steps
    }

    pub fn increment_streams(&self) -> StreamFactory {
        StreamFactory::new(self.seed, Domain::Increments)
    }

    pub fn initial_state(&self) -> Result<ParticleState> {
        let positions = self.initial_law.sample_positions(self.n_particles, self.seed)?;
        Ok(ParticleState::new(0.0, positions))
    }
}

/// Particle positions at one time; `ids` address each particle's random substream.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub time: f64,
    pub positions: Vec<f64>,
    pub ids: Vec<u64>,
}

impl ParticleState {
    pub fn new(time: f64, positions: Vec<f64>) -> Self {
        let ids = (0..positions.len() as u64).collect();
        Self { time, positions, ids }
    }

    pub fn with_ids(time: f64, positions: Vec<f64>, ids: Vec<u64>) -> Result<Self> {
        if positions.len() != ids.len() {
            return Err(Error::SizeMismatch {
                left: positions.len(),
                right: ids.len(),
            });
        }
        Ok(Self { time, positions, ids })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn empirical(&self) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::from_slice(&self.positions)
    }
}
