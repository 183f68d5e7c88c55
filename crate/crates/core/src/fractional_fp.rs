//! Fourier-spectral solver for the nonlinear fractional Fokker-Planck
//! equation `∂ₜp = D^α(|σ(·,p)|^α p)` on the periodic domain `[-L, L)`.
//!
//! `D^α` is the multiplier `-K′|ξ|^α`. The singular-integral form
//! `K∫(f(x+y) - f(x))|y|^{-1-α}dy` agrees with it when
//! `K′ = Kπ / (Γ(1+α) sin(πα/2))`, the same relation that links the Lévy
//! density of a symmetric stable driver to its characteristic exponent.

use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientSpec;
use crate::error::{invalid, Error, Result};
use crate::frames::{write_frames, FrameKind};
use crate::grid::{DensityGrid, Spectral};
use crate::levy_driver::{stable_cf_constant, stable_levy_constant};

/// Positivity is violated when a value drops below `-POSITIVITY_REL_TOL · max p`.
pub const POSITIVITY_REL_TOL: f64 = 1e-8;
/// Largest admissible change of total mass over one step.
pub const MASS_DRIFT_TOL: f64 = 1e-9;
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-8;
pub const DEFAULT_C_STAB: f64 = 0.5;
/// Extent of the RK4 stability region along the negative real axis.
const RK4_REAL_EXTENT: f64 = 2.785;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamFields")]
pub struct FractionalParams {
    alpha: f64,
    k_prime: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFields {
    alpha: f64,
    #[serde(default = "one")]
    k_prime: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<ParamFields> for FractionalParams {
    type Error = Error;

    fn try_from(f: ParamFields) -> Result<Self> {
        Self::new(f.alpha, f.k_prime)
    }
}

impl FractionalParams {
    pub fn new(alpha: f64, k_prime: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 2]")));
        }
        if !(k_prime > 0.0 && k_prime.is_finite()) {
            return Err(invalid("k_prime", "must be positive"));
        }
        Ok(Self { alpha, k_prime })
    }

    /// Parameters whose operator is the generator of the stable law with Lévy density `K|y|^{-1-α}`.
    pub fn from_levy_density(alpha: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid("alpha", "the singular-integral form needs α in (0, 2)"));
        }
        Self::new(alpha, stable_cf_constant(alpha, k))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_prime(&self) -> f64 {
        self.k_prime
    }

    /// `K` of the singular-integral form; undefined at α = 2.
    pub fn levy_density_constant(&self) -> Option<f64> {
        (self.alpha < 2.0).then(|| stable_levy_constant(self.alpha, self.k_prime))
    }

    pub fn symbol(&self, xi: f64) -> f64 {
        -self.k_prime * xi.abs().powf(self.alpha)
    }
}

/// `D^α` of grid values through the discrete Fourier transform.
pub fn frac_laplacian_values(values: &[f64], spectral: &Spectral, params: &FractionalParams) -> Vec<f64> {
    spectral.apply(values, |xi| params.symbol(xi))
}

pub fn frac_laplacian(grid: &DensityGrid, params: &FractionalParams) -> Vec<f64> {
    frac_laplacian_values(grid.values(), &Spectral::for_grid(grid), params)
}

/// Exact solution of `∂ₜp = D^α p` for the discretised operator.
pub fn solve_linear_exact(p0: &DensityGrid, t: f64, params: &FractionalParams) -> Result<DensityGrid> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be non-negative"));
    }
    let spectral = Spectral::for_grid(p0);
    let values = spectral.apply(p0.values(), |xi| (t * params.symbol(xi)).exp());
    DensityGrid::unnormalized(p0.half_width(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    Rk4,
    /// RK4 on `D^α((A - ā)p)` after factoring out the frozen linear part `ā D^α p`, where `A = |σ|^α` and
    /// `ā = (max A + min A)/2` is fixed over each step. Exact for constant σ.
    IntegratingFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpOptions {
    pub scheme: TimeScheme,
    pub c_stab: f64,
    pub positivity_rel_tol: f64,
    pub mass_drift_tol: f64,
    /// Largest tolerated density at the seam; `None` disables the check.
    pub boundary_tol: Option<f64>,
    /// Keep every `snapshot_every`-th state; `None` keeps only the initial and final ones.
    pub snapshot_every: Option<usize>,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::Rk4,
            c_stab: DEFAULT_C_STAB,
            positivity_rel_tol: POSITIVITY_REL_TOL,
            mass_drift_tol: MASS_DRIFT_TOL,
            boundary_tol: Some(DEFAULT_BOUNDARY_TOL),
            snapshot_every: None,
        }
    }
}

/// Method-of-lines integrator for one grid, coefficient and operator.
#[derive(Debug, Clone)]
pub struct FpSolver {
    sigma: CoefficientSpec,
    params: FractionalParams,
    options: FpOptions,
    spectral: Spectral,
    half_width: f64,
}

impl FpSolver {
    pub fn new(grid: &DensityGrid, sigma: CoefficientSpec, params: FractionalParams, options: FpOptions) -> Result<Self> {
        sigma.validate()?;
        if !(options.c_stab > 0.0 && options.c_stab <= 1.0) {
            return Err(invalid("c_stab", "must lie in (0, 1]"));
        }
        if options.snapshot_every == Some(0) {
            return Err(invalid("snapshot_every", "must be at least 1"));
        }
        Ok(Self {
            sigma,
            params,
            options,
            spectral: Spectral::for_grid(grid),
            half_width: grid.half_width(),
        })
    }

    pub fn params(&self) -> &FractionalParams {
        &self.params
    }

    pub fn options(&self) -> &FpOptions {
        &self.options
    }

    fn check_grid(&self, p: &DensityGrid) -> Result<()> {
        if p.len() != self.spectral.len() || p.half_width() != self.half_width {
            return Err(invalid("grid", "density grid does not match the solver grid"));
        }
        Ok(())
    }

    /// `A = |σ(·, p)|^α` on the grid.
    pub fn amplitude(&self, values: &[f64]) -> Result<Vec<f64>> {
        let sigma = self.sigma.evaluate_on_values(values, self.half_width, &self.spectral)?;
        Ok(sigma.into_iter().map(|s| s.abs().powf(self.params.alpha)).collect())
    }

    /// Right-hand side `D^α(A ⊙ p)`, with `A` shifted down by `shift`.
    fn rhs(&self, values: &[f64], shift: f64) -> Result<Vec<f64>> {
        let a = self.amplitude(values)?;
        let flux: Vec<f64> = a.iter().zip(values).map(|(a, p)| (a - shift) * p).collect();
        Ok(frac_laplacian_values(&flux, &self.spectral, &self.params))
    }

    fn frozen_shift(&self, values: &[f64]) -> Result<(f64, f64)> {
        let a = self.amplitude(values)?;
        let hi = a.iter().copied().fold(0.0, f64::max);
        let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(match self.options.scheme {
            TimeScheme::Rk4 => (0.0, hi),
            TimeScheme::IntegratingFactor => (0.5 * (hi + lo), 0.5 * (hi - lo)),
        })
    }

    /// Largest stable step for the state `p`.
    pub fn stability_bound(&self, p: &DensityGrid) -> Result<f64> {
        let (_, spread) = self.frozen_shift(p.values())?;
        let stiffness = self.params.k_prime * self.spectral.max_wavenumber().powf(self.params.alpha) * spread;
        Ok(if stiffness > 0.0 {
            self.options.c_stab * RK4_REAL_EXTENT / stiffness
        } else {
            f64::INFINITY
        })
    }

    pub fn step(&self, p: &DensityGrid, dt: f64) -> Result<DensityGrid> {
        self.step_at(p, dt, f64::NAN)
    }

    fn step_at(&self, p: &DensityGrid, dt: f64, time: f64) -> Result<DensityGrid> {
        self.check_grid(p)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        let bound = self.stability_bound(p)?;
        if dt > bound {
            return Err(Error::StabilityBound { dt, bound });
        }
        let (shift, _) = self.frozen_shift(p.values())?;
        let p0 = p.values();
        let axpy = |x: &[f64], h: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + h * k).collect() };

        let next: Vec<f64> = match self.options.scheme {
            TimeScheme::Rk4 => {
                let k1 = self.rhs(p0, 0.0)?;
                let k2 = self.rhs(&axpy(p0, 0.5 * dt, &k1), 0.0)?;
                let k3 = self.rhs(&axpy(p0, 0.5 * dt, &k2), 0.0)?;
                let k4 = self.rhs(&axpy(p0, dt, &k3), 0.0)?;
                (0..p0.len())
                    .map(|j| p0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
                    .collect()
            }
            TimeScheme::IntegratingFactor => {
                let propagate =
                    |v: &[f64], h: f64| self.spectral.apply(v, |xi| (h * shift * self.params.symbol(xi)).exp());
                let half_p = propagate(p0, 0.5 * dt);
                let full_p = propagate(p0, dt);
                let k1 = self.rhs(p0, shift)?;
                let k2 = self.rhs(&propagate(&axpy(p0, 0.5 * dt, &k1), 0.5 * dt), shift)?;
                let k3 = self.rhs(&axpy(&half_p, 0.5 * dt, &k2), shift)?;
                let k4 = self.rhs(&axpy(&full_p, dt, &propagate(&k3, 0.5 * dt)), shift)?;
                let mid: Vec<f64> = k2.iter().zip(&k3).map(|(a, b)| 2.0 * (a + b)).collect();
                let k1_full = propagate(&k1, dt);
                let mid_half = propagate(&mid, 0.5 * dt);
                (0..p0.len())
                    .map(|j| full_p[j] + dt / 6.0 * (k1_full[j] + mid_half[j] + k4[j]))
                    .collect()
            }
        };

        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability {
                time,
                reason: "non-finite density".into(),
            });
        }
        let next = DensityGrid::unnormalized(self.half_width, next)?;
        let floor = -self.options.positivity_rel_tol * next.max_value();
        if next.min_value() < floor {
            return Err(Error::Instability {
                time,
                reason: format!("density {:.3e} below positivity floor {floor:.3e}", next.min_value()),
            });
        }
        let drift = (next.mass() - p.mass()).abs();
        if drift > self.options.mass_drift_tol {
            return Err(Error::Instability {
                time,
                reason: format!("mass drift {drift:.3e} in one step"),
            });
        }
        Ok(next)
    }

    /// Integrates from `p0` to `horizon` in `ceil(horizon/dt)` equal steps.
    pub fn solve(&self, p0: &DensityGrid, horizon: f64, dt: f64) -> Result<FpSolution> {
        self.check_grid(p0)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = horizon / steps as f64;
        let mut log = vec![LogRow::of(0.0, p0)];
        self.check_boundary(p0, 0.0)?;
        let mut times = vec![0.0];
        let mut snapshots = vec![p0.clone()];
        let mut p = p0.clone();
        for k in 1..=steps {
            let t = if k == steps { horizon } else { k as f64 * dt };
            p = self.step_at(&p, dt, t)?;
            log.push(LogRow::of(t, &p));
            self.check_boundary(&p, t)?;
            let keep = k == steps || self.options.snapshot_every.is_some_and(|e| k % e == 0);
            if keep {
                times.push(t);
                snapshots.push(p.clone());
            }
        }
        Ok(FpSolution {
            dt,
            steps,
            times,
            snapshots,
            log,
        })
    }

    fn check_boundary(&self, p: &DensityGrid, time: f64) -> Result<()> {
        match self.options.boundary_tol {
            Some(tol) if p.boundary_density() > tol => Err(Error::BoundaryMass {
                time,
                density: p.boundary_density(),
                tol,
            }),
            _ => Ok(()),
        }
    }
}

/// One explicit RK4 step with default options.
pub fn step_fp(p: &DensityGrid, dt: f64, sigma: &CoefficientSpec, params: &FractionalParams) -> Result<DensityGrid> {
    FpSolver::new(p, sigma.clone(), *params, FpOptions::default())?.step(p, dt)
}

pub fn solve_fp(
    p0: &DensityGrid,
    horizon: f64,
    dt: f64,
    sigma: &CoefficientSpec,
    params: &FractionalParams,
    options: FpOptions,
) -> Result<FpSolution> {
    FpSolver::new(p0, sigma.clone(), *params, options)?.solve(p0, horizon, dt)
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub time: f64,
    pub mass: f64,
    pub boundary_density: f64,
    pub min_value: f64,
}

impl LogRow {
    fn of(time: f64, p: &DensityGrid) -> Self {
        Self {
            time,
            mass: p.mass(),
            boundary_density: p.boundary_density(),
            min_value: p.min_value(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FpSolution {
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub snapshots: Vec<DensityGrid>,
    /// One row per step, including the initial state.
    pub log: Vec<LogRow>,
}

impl FpSolution {
    pub fn last(&self) -> &DensityGrid {
        &self.snapshots[self.snapshots.len() - 1]
    }

    pub fn max_mass_error(&self) -> f64 {
        self.log.iter().map(|r| (r.mass - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_boundary_density(&self) -> f64 {
        self.log.iter().map(|r| r.boundary_density).fold(0.0, f64::max)
    }

    pub fn write_log_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "mass", "boundary_density", "min_value"])?;
        for r in &self.log {
            w.write_record([r.time, r.mass, r.boundary_density, r.min_value].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, writer: W) -> Result<()> {
        let first = &self.snapshots[0];
        write_frames(
            writer,
            FrameKind::Density,
            first.half_width(),
            first.len(),
            self.times.iter().copied().zip(self.snapshots.iter().map(|s| s.values())),
        )
    }
}

/// Two-column `x,p` table of one density.
pub fn write_density_csv<W: Write>(grid: &DensityGrid, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "p"])?;
    for (j, p) in grid.values().iter().enumerate() {
        w.write_record([format!("{:e}", grid.x(j)), format!("{p:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// A bump stays numerically zero this many widths from its centre.
const SUPPORT_WIDTHS: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

/// Smooth, effectively compactly supported test function: a sum of Gaussian bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestFunction {
    bumps: Vec<GaussianBump>,
}

impl TestFunction {
    pub fn new(bumps: Vec<GaussianBump>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(invalid("test_function", "needs at least one bump"));
        }
        if bumps.iter().any(|b| !(b.width > 0.0 && b.amplitude.is_finite() && b.center.is_finite())) {
            return Err(invalid("test_function", "bumps need finite amplitude and centre and positive width"));
        }
        Ok(Self { bumps })
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(vec![GaussianBump {
            amplitude,
            center,
            width,
        }])
    }

    pub fn bumps(&self) -> &[GaussianBump] {
        &self.bumps
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// `n`-th derivative via probabilists' Hermite polynomials.
    pub fn derivative(&self, n: usize, x: f64) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let u = (x - b.center) / b.width;
                let (mut h0, mut h1) = (1.0, u);
                let he = if n == 0 {
                    1.0
                } else {
                    for k in 1..n {
                        let h2 = u * h1 - k as f64 * h0;
                        h0 = h1;
                        h1 = h2;
                    }
                    h1
                };
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                b.amplitude * sign * he * (-0.5 * u * u).exp() / b.width.powi(n as i32)
            })
            .sum()
    }

    fn min_width(&self) -> f64 {
        self.bumps.iter().map(|b| b.width).fold(f64::INFINITY, f64::min)
    }

    fn check_inside(&self, half_width: f64, name: &'static str) -> Result<()> {
        for b in &self.bumps {
            if b.center.abs() + SUPPORT_WIDTHS * b.width > half_width {
                return Err(invalid(
                    name,
                    format!(
                        "bump at {} with width {} reaches the periodic seam at ±{half_width}",
                        b.center, b.width
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdjointReport {
    /// `∫ L[ν]φ · ψ dx` from the singular-integral generator.
    pub left: f64,
    /// `∫ φ · D^α(|σ(·,ν)|^α ψ) dx` from the spectral operator.
    pub right: f64,
    pub relative_error: f64,
}

/// Number of periodic images summed explicitly on each side.
const IMAGE_TERMS: i32 = 16;
const GL_DEGREE: usize = 12;
const PANELS_PER_WIDTH: f64 = 4.0;

/// `K ∫ (φ(x+z) - φ(x)) |z|^{-1-α} dz` for the `2L`-periodisation of `φ`.
///
/// Below `h₀` the second difference is replaced by its Taylor series, integrated exactly.
/// Beyond, the integral over `z ∈ ℝ` is folded onto one period `y ∈ [-L, L)` against the
/// lattice kernel `Σ_j |y - x + 2Lj|^{-1-α}`, whose tail is summed by Euler-Maclaurin.
fn singular_integral(phi: &TestFunction, x: f64, half_width: f64, alpha: f64, k: f64, gl: &GaussLegendre) -> f64 {
    let h0 = phi.min_width() / 4.0;
    let mut near = 0.0;
    let mut factorial = 1.0;
    for order in 1..=6 {
        let n = 2 * order;
        factorial *= ((n - 1) * n) as f64;
        near += 2.0 * phi.derivative(n, x) / factorial * h0.powf(n as f64 - alpha) / (n as f64 - alpha);
    }

    let period = 2.0 * half_width;
    let edge = |r: f64| if r.abs() >= h0 { r.abs().powf(-1.0 - alpha) } else { 0.0 };
    let tail = |r: f64| {
        // Σ_{j>J} f(j) ≈ ∫_{J+½}^∞ f - f′(J+½)/24 with f(t) = (r + 2Lt)^{-1-α}.
        let s = r + period * (IMAGE_TERMS as f64 + 0.5);
        s.powf(-alpha) / (period * alpha) + (1.0 + alpha) * period * s.powf(-2.0 - alpha) / 24.0
    };
    let kernel = |r: f64| {
        let mut w = edge(r);
        for j in 1..=IMAGE_TERMS {
            let shift = period * j as f64;
            w += edge(r + shift) + edge(r - shift);
        }
        w + tail(r) + tail(-r)
    };

    let mut far = 0.0;
    for b in &phi.bumps {
        let (lo, hi) = (b.center - SUPPORT_WIDTHS * b.width, b.center + SUPPORT_WIDTHS * b.width);
        let panels = (2.0 * SUPPORT_WIDTHS * PANELS_PER_WIDTH).ceil() as usize;
        let mut cuts: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect();
        for j in -1..=1 {
            for c in [x - h0 + period * j as f64, x + h0 + period * j as f64] {
                if c > lo && c < hi {
                    cuts.push(c);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let single = TestFunction { bumps: vec![*b] };
        for w in cuts.windows(2) {
            if w[1] - w[0] > 1e-14 {
                far += gl.integrate(w[0], w[1], |y| single.value(y) * kernel(y - x));
            }
        }
    }
    far -= phi.value(x) * 2.0 * h0.powf(-alpha) / alpha;
    k * (near + far)
}

/// Compares `∫ L[ν]φ · ψ` (generator by direct quadrature) with `∫ φ · D^α(|σ(·,ν)|^α ψ)` (spectral).
pub fn adjoint_identity_check(
    sigma: &CoefficientSpec,
    nu: &DensityGrid,
    phi: &TestFunction,
    psi: &TestFunction,
    params: &FractionalParams,
) -> Result<AdjointReport> {
    let k = params
        .levy_density_constant()
        .ok_or_else(|| invalid("alpha", "the generator has no jump form at α = 2"))?;
    let half_width = nu.half_width();
    phi.check_inside(half_width, "phi")?;
    psi.check_inside(half_width, "psi")?;
    let spectral = Spectral::for_grid(nu);
    let amplitude: Vec<f64> = sigma
        .evaluate_on_density(nu)?
        .into_iter()
        .map(|s| s.abs().powf(params.alpha()))
        .collect();
    let nodes = nu.nodes();
    let dx = nu.dx();
    let weight: Vec<f64> = nodes.iter().zip(&amplitude).map(|(&x, a)| a * psi.value(x)).collect();

    let flux = frac_laplacian_values(&weight, &spectral, params);
    let right = nodes.iter().zip(&flux).map(|(&x, f)| phi.value(x) * f).sum::<f64>() * dx;

    let gl = GaussLegendre::new(NonZeroUsize::new(GL_DEGREE).expect("nonzero degree"));
    let cutoff = 1e-18 * weight.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let left = nodes
        .par_iter()
        .zip(weight.par_iter())
        .filter(|(_, w)| w.abs() > cutoff)
        .map(|(&x, w)| w * singular_integral(phi, x, half_width, params.alpha(), k, &gl))
        .sum::<f64>()
        * dx;

    Ok(AdjointReport {
        left,
        right,
        relative_error: (left - right).abs() / (left.abs() + right.abs() + 1e-300),
    })
}
