//! The nonlinear coefficient `σ(x, ν)`.
//!
//! Three families: a constant (the linear control case), the mean-field form
//! `σ(x,ν) = ∫ς(x,y)ν(dy)` with a bounded smooth kernel, and the smoothed
//! density power `σ(x,ν) = (g_ε * ν)(x)^s`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::empirical::{gaussian_kernel, modified_d1_upper, smoothed_density, wasserstein2, EmpiricalMeasure};
use crate::error::{invalid, Error, Result};
use crate::grid::{DensityGrid, Spectral};
use crate::smoothing::BinnedField;

/// Above this many kernel evaluations per field, `Auto` switches to binning.
pub const AUTO_EXACT_PAIR_LIMIT: usize = 50_000_000;

/// Translation-invariant interaction kernels `ς(x, y) = c₀ + c₁ κ(x - y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionKernel {
    /// `c₀ + c₁ sin(x - y)`.
    Sine { c0: f64, c1: f64 },
    /// `c₀ + c₁ / (1 + (x - y)²)`.
    Lorentzian { c0: f64, c1: f64 },
}

impl InteractionKernel {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            InteractionKernel::Sine { c0, c1 } => c0 + c1 * (x - y).sin(),
            InteractionKernel::Lorentzian { c0, c1 } => {
                let d = x - y;
                c0 + c1 / (1.0 + d * d)
            }
        }
    }

    fn coefficients(&self) -> (f64, f64) {
        match *self {
            InteractionKernel::Sine { c0, c1 } | InteractionKernel::Lorentzian { c0, c1 } => (c0, c1),
        }
    }

    /// Lipschitz constant of `ς(x, ·)`, hence of `σ(x, ·)` for the 1-Wasserstein distance.
    pub fn lipschitz_in_y(&self) -> f64 {
        match *self {
            InteractionKernel::Sine { c1, .. } => c1.abs(),
            // max |d/du (1+u²)^-1| = 9/(8√3), attained at u = 1/√3
            InteractionKernel::Lorentzian { c1, .. } => c1.abs() * 9.0 / (8.0 * 3f64.sqrt()),
        }
    }

    /// Range `[inf, sup]` of the kernel.
    pub fn range(&self) -> (f64, f64) {
        let (c0, c1) = self.coefficients();
        match self {
            InteractionKernel::Sine { .. } => (c0 - c1.abs(), c0 + c1.abs()),
            InteractionKernel::Lorentzian { .. } => (c0 + c1.min(0.0), c0 + c1.max(0.0)),
        }
    }

    /// Sup-norms of `ς`, `∂ₓς`, `∂²ₓς`, probed on a grid of separations with
    /// centred differences.
    pub fn probe_bounds(&self) -> KernelBounds {
        let h = 1e-4;
        let mut out = KernelBounds::default();
        for i in -4000..=4000 {
            let d = i as f64 * 5e-3;
            let f0 = self.eval(d, 0.0);
            let fp = self.eval(d + h, 0.0);
            let fm = self.eval(d - h, 0.0);
            out.sup = out.sup.max(f0.abs());
            out.sup_dx = out.sup_dx.max(((fp - fm) / (2.0 * h)).abs());
            out.sup_dxx = out.sup_dxx.max(((fp - 2.0 * f0 + fm) / (h * h)).abs());
        }
        out
    }
}

/// Numerical sup-norm bounds of a kernel and its first two x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KernelBounds {
    pub sup: f64,
    pub sup_dx: f64,
    pub sup_dxx: f64,
}

/// The coefficient functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Constant { value: f64 },
    LinearInteraction { kernel: InteractionKernel },
    SmoothedDensityPower { eps: f64, s: f64 },
}

/// How fields against large measures are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldStrategy {
    /// Direct sums.
    Exact,
    /// Grid deposit + FFT convolution + interpolation.
    Binned,
    /// Exact unless the pair count exceeds [`AUTO_EXACT_PAIR_LIMIT`].
    #[default]
    Auto,
}

impl CoefficientSpec {
    /// Rejects parameters for which the functional is undefined or unbounded.
    ///
    /// A zero constant is accepted: it is the degenerate control case, and
    /// [`CoefficientSpec::hypotheses`] reports it as violating `σ ≠ 0`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            CoefficientSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("sigma.value", "must be finite"));
                }
            }
            CoefficientSpec::LinearInteraction { kernel } => {
                let (c0, c1) = kernel.coefficients();
                if !(c0.is_finite() && c1.is_finite()) {
                    return Err(invalid("sigma.kernel", "coefficients must be finite"));
                }
                let b = kernel.probe_bounds();
                if !(b.sup.is_finite() && b.sup_dx.is_finite() && b.sup_dxx.is_finite()) {
                    return Err(invalid("sigma.kernel", "kernel or its x-derivatives are unbounded"));
                }
            }
            CoefficientSpec::SmoothedDensityPower { eps, s } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(invalid("sigma.eps", "must be positive"));
                }
                if !(s > 0.0 && s.is_finite()) {
                    return Err(invalid("sigma.s", "must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn is_measure_independent(&self) -> bool {
        match *self {
            CoefficientSpec::Constant { .. } => true,
            CoefficientSpec::LinearInteraction { kernel } => kernel.coefficients().1 == 0.0,
            CoefficientSpec::SmoothedDensityPower { .. } => false,
        }
    }

    /// Whether `σ(x) = σ(-x)` whenever the measure is symmetric.
    pub fn preserves_evenness(&self) -> bool {
        match self {
            CoefficientSpec::Constant { .. } | CoefficientSpec::SmoothedDensityPower { .. } => true,
            CoefficientSpec::LinearInteraction { kernel } => matches!(kernel, InteractionKernel::Lorentzian { .. }),
        }
    }

    /// `σ(x, μ)` by the defining sum.
    pub fn evaluate(&self, x: f64, mu: &EmpiricalMeasure) -> f64 {
        match *self {
            CoefficientSpec::Constant { value } => value,
            CoefficientSpec::LinearInteraction { kernel } => {
                mu.samples().iter().map(|&y| kernel.eval(x, y)).sum::<f64>() / mu.len() as f64
            }
            CoefficientSpec::SmoothedDensityPower { eps, s } => smoothed_density(mu, eps, x).powf(s),
        }
    }

    /// Prepares repeated evaluation of `σ(·, μ)` for `queries` points.
    pub fn field<'a>(&self, mu: &'a EmpiricalMeasure, strategy: FieldStrategy, queries: usize) -> CoefficientField<'a> {
        let binned = match strategy {
            FieldStrategy::Exact => false,
            FieldStrategy::Binned => true,
            FieldStrategy::Auto => queries.saturating_mul(mu.len()) > AUTO_EXACT_PAIR_LIMIT,
        };
        let kind = match *self {
            CoefficientSpec::Constant { value } => FieldKind::Constant(value),
            CoefficientSpec::LinearInteraction {
                kernel: InteractionKernel::Sine { c0, c1 },
            } => {
                // sin(x-y) = sin x cos y - cos x sin y
                let n = mu.len() as f64;
                let mc = mu.samples().iter().map(|y| y.cos()).sum::<f64>() / n;
                let ms = mu.samples().iter().map(|y| y.sin()).sum::<f64>() / n;
                FieldKind::Sine { c0, c1, mc, ms }
            }
            CoefficientSpec::LinearInteraction {
                kernel: InteractionKernel::Lorentzian { c0, c1 },
            } => {
                let lorentz = |d: f64| 1.0 / (1.0 + d * d);
                match binned
                    .then(|| BinnedField::build(mu.samples(), lorentz, f64::INFINITY, 1.0 / 64.0))
                    .flatten()
                {
                    Some(field) => FieldKind::Binned {
                        field,
                        c0,
                        c1,
                        power: None,
                    },
                    None => FieldKind::Direct(*self, mu),
                }
            }
            CoefficientSpec::SmoothedDensityPower { eps, s } => {
                let h = eps.sqrt() / 16.0;
                match binned
                    .then(|| BinnedField::build(mu.samples(), |d| gaussian_kernel(eps, d), 10.0 * eps.sqrt(), h))
                    .flatten()
                {
                    Some(field) => FieldKind::Binned {
                        field,
                        c0: 0.0,
                        c1: 1.0,
                        power: Some(s),
                    },
                    None => FieldKind::Direct(*self, mu),
                }
            }
        };
        CoefficientField { kind }
    }

    /// `σ(x_j, p·dx)` at every node of a periodic density grid.
    pub fn evaluate_on_density(&self, grid: &DensityGrid) -> Result<Vec<f64>> {
        let spectral = Spectral::for_grid(grid);
        self.evaluate_on_values(grid.values(), grid.half_width(), &spectral)
    }

    /// As [`evaluate_on_density`](Self::evaluate_on_density) for raw grid values with a cached transform.
    pub fn evaluate_on_values(&self, values: &[f64], half_width: f64, spectral: &Spectral) -> Result<Vec<f64>> {
        let m = values.len();
        let dx = 2.0 * half_width / m as f64;
        let node = |j: usize| -half_width + j as f64 * dx;
        Ok(match *self {
            CoefficientSpec::Constant { value } => vec![value; m],
            CoefficientSpec::LinearInteraction {
                kernel: InteractionKernel::Sine { c0, c1 },
            } => {
                let (mut mc, mut ms) = (0.0, 0.0);
                for (j, p) in values.iter().enumerate() {
                    let (s, c) = node(j).sin_cos();
                    mc += c * p * dx;
                    ms += s * p * dx;
                }
                (0..m)
                    .map(|j| {
                        let (s, c) = node(j).sin_cos();
                        c0 + c1 * (s * mc - c * ms)
                    })
                    .collect()
            }
            CoefficientSpec::LinearInteraction {
                kernel: InteractionKernel::Lorentzian { c0, c1 },
            } => {
                let mass = values.iter().sum::<f64>() * dx;
                // Fourier transform of 1/(1+u²) is π e^{-|ξ|}; the result is the periodised convolution.
                let conv = spectral.apply(values, |xi| std::f64::consts::PI * (-xi.abs()).exp());
                conv.into_iter().map(|v| c0 * mass + c1 * v).collect()
            }
            CoefficientSpec::SmoothedDensityPower { eps, s } => {
                let floor = 4.0 * dx * dx;
                if eps < floor {
                    return Err(Error::GridTooCoarse { eps, floor });
                }
                let conv = spectral.apply(values, |xi| (-0.5 * eps * xi * xi).exp());
                conv.into_iter().map(|v| v.max(0.0).powf(s)).collect()
            }
        })
    }

    /// Numerical report on the regularity hypotheses for this coefficient.
    pub fn hypotheses<R: Rng + ?Sized>(&self, trials: usize, rng: &mut R) -> HypothesisReport {
        let h = 1e-4;
        let mut k1: f64 = 0.0;
        let mut k2: f64 = 0.0;
        let mut min_abs = f64::INFINITY;
        for _ in 0..trials.max(1) {
            let mu = random_measure(8, rng);
            for i in -40..=40 {
                let x = i as f64 * 0.1;
                let f0 = self.evaluate(x, &mu);
                let fp = self.evaluate(x + h, &mu);
                let fm = self.evaluate(x - h, &mu);
                k1 = k1.max(((fp - fm) / (2.0 * h)).abs());
                k2 = k2.max(((fp - 2.0 * f0 + fm) / (h * h)).abs());
                min_abs = min_abs.min(f0.abs());
            }
        }
        let nonzero = match *self {
            CoefficientSpec::Constant { value } => value != 0.0,
            CoefficientSpec::LinearInteraction { kernel } => {
                let (lo, hi) = kernel.range();
                lo > 0.0 || hi < 0.0
            }
            CoefficientSpec::SmoothedDensityPower { .. } => true,
        };
        HypothesisReport {
            nonzero,
            k1_estimate: k1,
            k2_estimate: k2,
            min_abs_sampled: min_abs,
        }
    }
}

/// Outcome of [`CoefficientSpec::hypotheses`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// `σ(x, ν) ≠ 0` for all inputs (analytic for each family).
    pub nonzero: bool,
    /// Largest sampled `|∂ₓσ|`.
    pub k1_estimate: f64,
    /// Largest sampled `|∂²ₓσ|`.
    pub k2_estimate: f64,
    pub min_abs_sampled: f64,
}

fn random_measure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> EmpiricalMeasure {
    let spread = 0.2 + 2.0 * rng.random::<f64>();
    let xs = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            spread * z
        })
        .collect();
    EmpiricalMeasure::new(xs).expect("finite samples")
}

/// Prepared evaluator for `σ(·, μ)`.
#[derive(Debug)]
pub struct CoefficientField<'a> {
    kind: FieldKind<'a>,
}

#[derive(Debug)]
enum FieldKind<'a> {
    Constant(f64),
    Sine {
        c0: f64,
        c1: f64,
        mc: f64,
        ms: f64,
    },
    Direct(CoefficientSpec, &'a EmpiricalMeasure),
    Binned {
        field: BinnedField,
        c0: f64,
        c1: f64,
        power: Option<f64>,
    },
}

impl CoefficientField<'_> {
    #[inline]
    pub fn at(&self, x: f64) -> f64 {
        match &self.kind {
            FieldKind::Constant(v) => *v,
            FieldKind::Sine { c0, c1, mc, ms } => {
                let (s, c) = x.sin_cos();
                c0 + c1 * (s * mc - c * ms)
            }
            FieldKind::Direct(spec, mu) => spec.evaluate(x, mu),
            FieldKind::Binned { field, c0, c1, power } => {
                let v = field.at(x);
                match power {
                    Some(s) => v.max(0.0).powf(*s),
                    None => c0 + c1 * v,
                }
            }
        }
    }

    pub fn is_binned(&self) -> bool {
        matches!(self.kind, FieldKind::Binned { .. })
    }
}

/// Largest observed difference ratios of `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// `|σ(x,μ) - σ(x',μ)| / |x - x'|`.
    pub in_x: f64,
    /// `|σ(x,μ) - σ(x,ν)| / d(μ,ν)`.
    pub in_measure_d2: f64,
    /// `|σ(x,μ) - σ(x,ν)| / d₁⁺(μ,ν)` with the monotone-coupling value of `d₁`.
    pub in_measure_d1: f64,
}

/// Lower-bound estimates of the Lipschitz constants of `σ` from random pairs.
pub fn lipschitz_probe<R: Rng + ?Sized>(spec: &CoefficientSpec, trials: usize, rng: &mut R) -> LipschitzEstimate {
    let mut est = LipschitzEstimate {
        in_x: 0.0,
        in_measure_d2: 0.0,
        in_measure_d1: 0.0,
    };
    for _ in 0..trials {
        let mu = random_measure(8, rng);
        let x = rng.random_range(-3.0..3.0);
        let h = 10f64.powf(rng.random_range(-3.0..0.0));
        let dx = (spec.evaluate(x + h, &mu) - spec.evaluate(x, &mu)).abs() / h;
        est.in_x = est.in_x.max(dx);

        let r = 10f64.powf(rng.random_range(-3.0..0.0));
        let shifted = mu
            .samples()
            .iter()
            .map(|y| {
                let z: f64 = StandardNormal.sample(rng);
                y + r * z
            })
            .collect();
        let nu = EmpiricalMeasure::new(shifted).expect("finite samples");
        let diff = (spec.evaluate(x, &mu) - spec.evaluate(x, &nu)).abs();
        let d2 = wasserstein2(&mu, &nu).expect("equal sizes");
        let d1 = modified_d1_upper(&mu, &nu).expect("equal sizes");
        if d2 > 0.0 {
            est.in_measure_d2 = est.in_measure_d2.max(diff / d2);
        }
        if d1 > 0.0 {
            est.in_measure_d1 = est.in_measure_d1.max(diff / d1);
        }
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::gaussian_kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn emp(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_slice(xs).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let mu = emp(&[0.4, -2.0, 7.0]);
        assert_eq!(CoefficientSpec::Constant { value: 1.0 }.evaluate(3.3, &mu), 1.0);
        let flat = CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Sine { c0: 0.75, c1: 0.0 },
        };
        assert!((flat.evaluate(-1.0, &mu) - 0.75).abs() < 1e-15);
        let (eps, s) = (0.3, 0.7);
        let spd = CoefficientSpec::SmoothedDensityPower { eps, s };
        let expect = (2.0 * std::f64::consts::PI * eps).powf(-s / 2.0);
        assert!((spd.evaluate(0.0, &emp(&[0.0])) - expect).abs() < 1e-14);
    }

    #[test]
    fn sine_reduction_matches_direct_sum() {
        let spec = CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Sine { c0: 1.0, c1: 0.6 },
        };
        let mu = emp(&[0.1, -0.8, 2.2, 5.0, -3.3]);
        let field = spec.field(&mu, FieldStrategy::Exact, 1);
        for x in [-4.0, -0.3, 0.0, 1.7, 9.0] {
            assert!((field.at(x) - spec.evaluate(x, &mu)).abs() < 1e-14);
        }
    }

    #[test]
    fn binned_field_tracks_exact_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mu = random_measure(3000, &mut rng);
        for spec in [
            CoefficientSpec::SmoothedDensityPower { eps: 0.5, s: 0.5 },
            CoefficientSpec::LinearInteraction {
                kernel: InteractionKernel::Lorentzian { c0: 1.0, c1: 0.5 },
            },
        ] {
            let exact = spec.field(&mu, FieldStrategy::Exact, 1);
            let binned = spec.field(&mu, FieldStrategy::Binned, 1);
            assert!(binned.is_binned());
            for &x in mu.samples().iter().step_by(50) {
                let (a, b) = (exact.at(x), binned.at(x));
                assert!((a - b).abs() <= 1e-3 * a.abs(), "{spec:?} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn density_evaluation_constant_and_parity() {
        let grid = DensityGrid::from_fn(8.0, 128, |x| (-x * x / 2.0).exp()).unwrap();
        let c = CoefficientSpec::Constant { value: 2.0 }.evaluate_on_density(&grid).unwrap();
        assert!(c.iter().all(|&v| v == 2.0));

        let odd = CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Sine { c0: 0.0, c1: 1.0 },
        }
        .evaluate_on_density(&grid)
        .unwrap();
        // node j mirrors node m - j about x = 0
        for j in 1..128 {
            assert!((odd[j] + odd[128 - j]).abs() < 1e-14, "j={j}");
        }
        assert!(odd[64].abs() < 1e-14);
    }

    #[test]
    fn density_evaluation_rejects_coarse_grids() {
        let grid = DensityGrid::from_fn(8.0, 16, |x| (-x * x).exp()).unwrap();
        let spec = CoefficientSpec::SmoothedDensityPower { eps: 0.5, s: 1.0 };
        assert!(matches!(spec.evaluate_on_density(&grid), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn density_convolution_matches_closed_form() {
        // g_ε * N(0,1) = N(0, 1+ε) for the periodic grid when the tails are negligible.
        let grid = DensityGrid::from_fn(12.0, 256, |x| gaussian_kernel(1.0, x)).unwrap();
        let eps = 0.2;
        let out = CoefficientSpec::SmoothedDensityPower { eps, s: 1.0 }
            .evaluate_on_density(&grid)
            .unwrap();
        for (j, v) in out.iter().enumerate() {
            assert!((v - gaussian_kernel(1.0 + eps, grid.x(j))).abs() < 1e-12);
        }
    }

    #[test]
    fn lorentzian_density_matches_quadrature() {
        let grid = DensityGrid::from_fn(20.0, 512, |x| gaussian_kernel(0.5, x)).unwrap();
        let spec = CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Lorentzian { c0: 0.5, c1: 1.0 },
        };
        let out = spec.evaluate_on_density(&grid).unwrap();
        let dx = grid.dx();
        for j in (0..512).step_by(37) {
            let x = grid.x(j);
            // periodised kernel: sum over images
            let direct: f64 = (0..512)
                .map(|k| {
                    let y = grid.x(k);
                    let kernel: f64 = (-200..=200).map(|w| 1.0 / (1.0 + (x - y + 40.0 * w as f64).powi(2))).sum();
                    kernel * grid.values()[k] * dx
                })
                .sum();
            assert!((out[j] - (0.5 + direct)).abs() < 2e-4, "j={j}: {} vs {}", out[j], 0.5 + direct);
        }
    }

    #[test]
    fn lipschitz_probe_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = lipschitz_probe(&CoefficientSpec::Constant { value: 3.0 }, 100, &mut rng);
        assert_eq!((c.in_x, c.in_measure_d2), (0.0, 0.0));

        let sine = CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Sine { c0: 1.0, c1: 1.0 },
        };
        let est = lipschitz_probe(&sine, 2000, &mut rng);
        // |σ(x,μ)-σ(x,ν)| ≤ W₁(μ,ν) ≤ W₂(μ,ν) for a 1-Lipschitz kernel
        assert!(est.in_measure_d2 <= 1.0 + 1e-9, "{est:?}");
        assert!(est.in_x <= 1.0 + 1e-9);

        let spd = CoefficientSpec::SmoothedDensityPower { eps: 0.5, s: 0.5 };
        let a = lipschitz_probe(&spd, 3000, &mut ChaCha8Rng::seed_from_u64(1));
        let b = lipschitz_probe(&spd, 3000, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(a.in_x.is_finite() && a.in_measure_d2.is_finite());
        assert!((a.in_x / b.in_x - 1.0).abs() < 0.5, "{a:?} {b:?}");
    }

    #[test]
    fn hypothesis_report_flags_vanishing_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        assert!(!CoefficientSpec::Constant { value: 0.0 }.hypotheses(2, &mut rng).nonzero);
        let sine = CoefficientSpec::LinearInteraction {
            kernel: InteractionKernel::Sine { c0: 1.0, c1: 0.5 },
        };
        let rep = sine.hypotheses(4, &mut rng);
        assert!(rep.nonzero);
        assert!(rep.k1_estimate <= 0.5 + 1e-6 && rep.k2_estimate <= 0.5 + 1e-3);
        let spd = CoefficientSpec::SmoothedDensityPower { eps: 0.5, s: 0.5 };
        assert!(spd.hypotheses(4, &mut rng).min_abs_sampled > 0.0);
    }

    #[test]
    fn kernel_bounds_are_finite() {
        let b = InteractionKernel::Lorentzian { c0: 1.0, c1: 1.0 }.probe_bounds();
        assert!((b.sup - 2.0).abs() < 1e-12);
        assert!((b.sup_dx - 9.0 / (8.0 * 3f64.sqrt())).abs() < 1e-4);
        assert!((b.sup_dxx - 2.0).abs() < 1e-3);
    }
}
