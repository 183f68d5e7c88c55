//! Particle marginals against the Fokker-Planck density on matched settings.
//!
//! For a symmetric stable driver with `E e^{iξZ_t} = e^{-ct|ξ|^α}` the
//! generator of `dX = σ dZ` is `|σ|^α` times the multiplier `-c|ξ|^α`, so the
//! PDE operator is calibrated with `K′ = c`.

use serde::{Deserialize, Serialize};

use crate::coefficient::{CoefficientSpec, FieldStrategy};
use crate::empirical::gaussian_kernel;
use crate::error::{invalid, Result};
use crate::fractional_fp::{FpOptions, FpSolver, FractionalParams};
use crate::grid::DensityGrid;
use crate::levy_driver::{Driver, StableDriverSpec};
use crate::particles::{simulate_run, InitialLaw, SimulationConfig};
use crate::smoothing::BinnedField;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bandwidth {
    /// `0.9 · min(sd, IQR/1.34) · n^{-1/5}`.
    #[default]
    Silverman,
    Fixed { h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSetup {
    pub driver: StableDriverSpec,
    pub sigma: CoefficientSpec,
    pub initial_law: InitialLaw,
    pub horizon: f64,
    pub particle_dt: f64,
    /// Defaults to 0.9 of the stability bound at `t = 0`.
    #[serde(default)]
    pub pde_dt: Option<f64>,
    pub half_width: f64,
    pub grid_points: usize,
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Number of equally spaced comparison times in `(0, T]`.
    #[serde(default = "one")]
    pub snapshots: usize,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default)]
    pub field: FieldStrategy,
    #[serde(default)]
    pub pde: FpOptions,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub n: usize,
    pub bandwidth: f64,
    /// `∫|KDE - p|` at each comparison time.
    pub l1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub k_prime: f64,
    pub times: Vec<f64>,
    pub rows: Vec<CompareRow>,
    pub pde_steps: usize,
    pub pde_max_mass_error: f64,
    pub pde_max_boundary_density: f64,
    /// L¹ at the horizon strictly decreases along `n_list`.
    pub decreasing_at_horizon: bool,
}

impl CompareReport {
    pub fn final_l1(&self) -> Vec<f64> {
        self.rows.iter().map(|r| *r.l1.last().expect("at least one time")).collect()
    }
}

pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian kernel density estimate of all `samples`, read at the nodes of `grid`.
pub fn kde_on_grid(samples: &[f64], h: f64, grid: &DensityGrid) -> Vec<f64> {
    let reach = 10.0 * h;
    let limit = grid.half_width() + reach;
    let inside: Vec<f64> = samples.iter().copied().filter(|x| x.abs() <= limit).collect();
    let nodes = grid.nodes();
    if inside.is_empty() {
        return vec![0.0; nodes.len()];
    }
    let share = inside.len() as f64 / samples.len() as f64;
    let kernel = |d: f64| gaussian_kernel(h * h, d);
    // Linear binning adds variance spacing²/6; take it out of the kernel.
    let spacing = h / 8.0;
    let binned = |d: f64| gaussian_kernel(h * h - spacing * spacing / 6.0, d);
    let span = (-grid.half_width(), grid.half_width());
    match BinnedField::build_covering(&inside, binned, reach, spacing, span) {
        Some(field) => nodes.iter().map(|&x| share * field.at(x)).collect(),
        None => nodes
            .iter()
            .map(|&x| inside.iter().map(|y| kernel(x - y)).sum::<f64>() / samples.len() as f64)
            .collect(),
    }
}

/// Runs the PDE once and the particle system for each `n`, comparing at the snapshot times.
pub fn compare_particles_pde(setup: &CompareSetup) -> Result<CompareReport> {
    if setup.n_list.is_empty() || setup.snapshots == 0 {
        return Err(invalid("n_list", "need at least one particle count and one snapshot"));
    }
    let density = |x: f64| setup.initial_law.density(x);
    if density(0.0).is_none() {
        return Err(invalid("initial_law", "the PDE needs an initial law with a density"));
    }
    let params = FractionalParams::new(setup.driver.alpha(), setup.driver.scale())?;
    let p0 = DensityGrid::from_fn(setup.half_width, setup.grid_points, |x| density(x).unwrap_or(0.0))?;

    let s = setup.snapshots;
    let probe = FpSolver::new(&p0, setup.sigma.clone(), params, setup.pde.clone())?;
    let pde_dt = match setup.pde_dt {
        Some(dt) => dt,
        None => (0.9 * probe.stability_bound(&p0)?).min(setup.horizon),
    };
    let pde_steps = round_to_multiple(setup.horizon / pde_dt, s);
    let options = FpOptions {
        snapshot_every: Some(pde_steps / s),
        ..setup.pde.clone()
    };
    let solver = FpSolver::new(&p0, setup.sigma.clone(), params, options)?;
    let solution = solver.solve(&p0, setup.horizon, setup.horizon / pde_steps as f64)?;
    let times: Vec<f64> = solution.times[1..].to_vec();
    let targets = &solution.snapshots[1..];

    let particle_steps = round_to_multiple(setup.horizon / setup.particle_dt, s);
    let mut rows = Vec::with_capacity(setup.n_list.len());
    for &n in &setup.n_list {
        let cfg = SimulationConfig::new(
            n,
            setup.horizon / particle_steps as f64,
            setup.horizon,
            setup.seed,
            Driver::Stable(setup.driver),
            setup.sigma.clone(),
            setup.initial_law.clone(),
        )?
        .with_field(setup.field)
        .with_record_every(particle_steps / s)?;
        let run = simulate_run(&cfg)?;
        let marginals = &run.flow.marginals()[1..];
        let mut l1 = Vec::with_capacity(s);
        let mut h_final = 0.0;
        for (mu, target) in marginals.iter().zip(targets) {
            let h = match setup.bandwidth {
                Bandwidth::Silverman => silverman_bandwidth(mu.samples()),
                Bandwidth::Fixed { h } => h,
            };
            h_final = h;
            l1.push(target.l1_distance(&kde_on_grid(mu.samples(), h, target)));
        }
        rows.push(CompareRow {
            n,
            bandwidth: h_final,
            l1,
        });
    }
    let finals: Vec<f64> = rows.iter().map(|r| *r.l1.last().expect("snapshots ≥ 1")).collect();
    Ok(CompareReport {
        k_prime: params.k_prime(),
        times,
        pde_steps,
        pde_max_mass_error: solution.max_mass_error(),
        pde_max_boundary_density: solution.max_boundary_density(),
        decreasing_at_horizon: finals.windows(2).all(|w| w[1] < w[0]),
        rows,
    })
}

fn round_to_multiple(steps: f64, s: usize) -> usize {
    let k = (steps / s as f64).ceil().max(1.0) as usize;
    k * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(sigma: CoefficientSpec, n_list: Vec<usize>) -> CompareSetup {
        CompareSetup {
            driver: StableDriverSpec::new(1.5, 1.0).unwrap(),
            sigma,
            initial_law: InitialLaw::Gaussian { mean: 0.0, std: 1.0 },
            horizon: 0.3,
            particle_dt: 0.05,
            pde_dt: None,
            half_width: 64.0,
            grid_points: 2048,
            n_list,
            seed: 5,
            snapshots: 2,
            bandwidth: Bandwidth::Silverman,
            field: FieldStrategy::Auto,
            pde: FpOptions {
                boundary_tol: None,
                ..FpOptions::default()
            },
        }
    }

    #[test]
    fn silverman_on_gaussian_sample() {
        let xs: Vec<f64> = (1..2000).map(|i| statrs::function::erf::erf_inv(2.0 * i as f64 / 2000.0 - 1.0) * 2f64.sqrt()).collect();
        let h = silverman_bandwidth(&xs);
        let expect = 0.9 * 1999f64.powf(-0.2);
        assert!((h / expect - 1.0).abs() < 0.02, "{h} vs {expect}");
    }

    #[test]
    fn kde_integrates_to_inside_share() {
        let grid = DensityGrid::from_fn(10.0, 1024, |_| 1.0).unwrap();
        let xs = [-1.0, 0.0, 0.5, 3.0, 100.0];
        let kde = kde_on_grid(&xs, 0.3, &grid);
        let mass = kde.iter().sum::<f64>() * grid.dx();
        assert!((mass - 0.8).abs() < 1e-3, "mass={mass}");
        let peak = kde.iter().copied().fold(0.0, f64::max);
        for (j, &x) in grid.nodes().iter().enumerate().filter(|(_, x)| x.abs() < 4.0) {
            let direct: f64 = xs.iter().map(|y| gaussian_kernel(0.09, x - y)).sum::<f64>() / 5.0;
            assert!((kde[j] - direct).abs() < 3e-3 * peak, "x={x}");
        }
    }

    #[test]
    fn constant_sigma_gap_shrinks_with_n() {
        let report = compare_particles_pde(&setup(CoefficientSpec::Constant { value: 1.0 }, vec![300, 3000, 30000])).unwrap();
        assert_eq!(report.k_prime, 1.0);
        assert_eq!(report.times.len(), 2);
        let l1 = report.final_l1();
        assert!(report.decreasing_at_horizon, "{l1:?}");
        assert!(l1[2] < 0.05, "{l1:?}");
        assert!(report.pde_max_mass_error < 1e-12);
    }

    #[test]
    fn rejects_point_mass_start() {
        let mut s = setup(CoefficientSpec::Constant { value: 1.0 }, vec![10]);
        s.initial_law = InitialLaw::PointMass { x: 0.0 };
        assert!(compare_particles_pde(&s).is_err());
    }
}
