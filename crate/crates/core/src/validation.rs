//! Statistical batteries for the sampler and the metric inequalities.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::empirical::{check_vasdis, empirical_gap_experiment, wasserstein2, EmpiricalMeasure};
use crate::error::{invalid, Result};
use crate::levy_driver::StableDriverSpec;
use crate::rng::{substream, Domain};

const CHUNK: usize = 1 << 16;

/// Draws `count` increments in fixed chunks, each from its own substream, so
/// the result does not depend on the thread count.
pub fn draw_increments(spec: &StableDriverSpec, dt: f64, count: usize, seed: u64) -> Vec<f64> {
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = substream(seed, Domain::Experiment, c as u64, 0);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len).map(move |_| spec.sample_increment(dt, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfRow {
    pub xi: f64,
    pub empirical: f64,
    pub exact: f64,
    pub gap: f64,
}

/// Moments of the α = 2 (Gaussian) case, whose variance is `2c·dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMoments {
    pub variance: f64,
    pub expected_variance: f64,
    pub kurtosis: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfBattery {
    pub alpha: f64,
    pub scale: f64,
    pub dt: f64,
    pub draws: usize,
    pub rows: Vec<CfRow>,
    pub sup_gap: f64,
    pub tolerance: f64,
    pub gaussian_moments: Option<GaussianMoments>,
    pub pass: bool,
}

/// Compares the empirical characteristic function of `draws` increments with `exp(-c·dt·|ξ|^α)`.
pub fn cf_battery(
    spec: &StableDriverSpec,
    dt: f64,
    draws: usize,
    xis: &[f64],
    tolerance: f64,
    seed: u64,
) -> Result<CfBattery> {
    if draws < 2 || xis.is_empty() || !(dt > 0.0) {
        return Err(invalid("cf_battery", "need draws ≥ 2, dt > 0 and at least one ξ"));
    }
    let xs = draw_increments(spec, dt, draws, seed);
    let n = xs.len() as f64;
    let rows: Vec<CfRow> = xis
        .iter()
        .map(|&xi| {
            let empirical = xs.iter().map(|x| (xi * x).cos()).sum::<f64>() / n;
            let exact = spec.characteristic_function(xi, dt);
            CfRow {
                xi,
                empirical,
                exact,
                gap: (empirical - exact).abs(),
            }
        })
        .collect();
    let sup_gap = rows.iter().map(|r| r.gap).fold(0.0, f64::max);
    let gaussian_moments = (spec.alpha() == 2.0).then(|| {
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let expected_variance = 2.0 * spec.scale() * dt;
        let kurtosis = m4 / (m2 * m2);
        // Five standard errors: var(s²) ≈ 2σ⁴/n, var(kurtosis) ≈ 24/n.
        let pass = (m2 - expected_variance).abs() < 5.0 * expected_variance * (2.0 / n).sqrt()
            && (kurtosis - 3.0).abs() < 5.0 * (24.0 / n).sqrt();
        GaussianMoments {
            variance: m2,
            expected_variance,
            kurtosis,
            pass,
        }
    });
    let pass = sup_gap <= tolerance && gaussian_moments.is_none_or(|g| g.pass);
    Ok(CfBattery {
        alpha: spec.alpha(),
        scale: spec.scale(),
        dt,
        draws,
        rows,
        sup_gap,
        tolerance,
        gaussian_moments,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapTable {
    pub rows: Vec<GapRow>,
    /// `4 ∫|x|² ν(dx)`.
    pub bound: f64,
    pub reference_size: usize,
    pub reps: usize,
    pub within_bound: bool,
    pub decreasing: bool,
}

/// `E d²(νⁿ, ν)` for the standard Gaussian `ν`, represented by a reference sample of `reference_size` draws.
pub fn lemma4_experiment(ns: &[usize], reps: usize, reference_size: usize, seed: u64) -> Result<GapTable> {
    if ns.is_empty() || reps < 2 || reference_size == 0 {
        return Err(invalid("lemma4", "need sizes, reps ≥ 2 and a reference sample"));
    }
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let mut rng = substream(seed, Domain::Reference, 0, 0);
    let reference = EmpiricalMeasure::new((0..reference_size).map(|_| gauss(&mut rng)).collect())?;
    let rows = ns
        .par_iter()
        .map(|&n| {
            let mut rng = substream(seed, Domain::Experiment, n as u64, 0);
            let est = empirical_gap_experiment(gauss, &reference, n, reps, &mut rng)?;
            Ok(GapRow {
                n,
                estimate: est.mean,
                std_error: est.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = 4.0;
    let within_bound = rows.iter().all(|r| r.estimate <= bound);
    let decreasing = rows.windows(2).all(|w| {
        let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        w[1].estimate < w[0].estimate + 2.0 * se
    });
    Ok(GapTable {
        rows,
        bound,
        reference_size,
        reps,
        within_bound,
        decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VasdisReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `d(μ_ξ, μ_ζ)·√n / |ξ - ζ|` seen; at most 1.
    pub max_ratio: f64,
}

/// Random position vectors `(ξ, ζ)` with `n` uniform in `n_range`, mixing Gaussian and heavy-tailed coordinates.
pub fn vasdis_battery(pairs: usize, n_range: (usize, usize), seed: u64) -> Result<VasdisReport> {
    let (lo, hi) = n_range;
    if lo == 0 || lo > hi {
        return Err(invalid("n_range", "need 1 ≤ lo ≤ hi"));
    }
    let results = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, Domain::Experiment, k as u64, 1);
            let n = rng.random_range(lo..=hi);
            let heavy = k % 2 == 1;
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
                let z: f64 = StandardNormal.sample(rng);
                if heavy {
                    z / rng.random_range(0.05f64..1.0).powi(2)
                } else {
                    3.0 * z
                }
            };
            let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let ys: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let ok = check_vasdis(&xs, &ys)?;
            let d = wasserstein2(&EmpiricalMeasure::from_slice(&xs)?, &EmpiricalMeasure::from_slice(&ys)?)?;
            let euclid = xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let ratio = if euclid > 0.0 { d * (n as f64).sqrt() / euclid } else { 0.0 };
            Ok((ok, ratio))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VasdisReport {
        pairs,
        violations: results.iter().filter(|(ok, _)| !ok).count(),
        max_ratio: results.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_draws_are_reproducible_and_sized() {
        let spec = StableDriverSpec::new(1.2, 1.0).unwrap();
        let a = draw_increments(&spec, 1.0, 70_000, 4);
        let b = draw_increments(&spec, 1.0, 70_000, 4);
        assert_eq!(a.len(), 70_000);
        assert_eq!(a, b);
        assert_ne!(a, draw_increments(&spec, 1.0, 70_000, 5));
    }

    #[test]
    fn cf_battery_passes_for_cauchy() {
        let spec = StableDriverSpec::new(1.0, 0.5).unwrap();
        let r = cf_battery(&spec, 1.0, 200_000, &[0.5, 1.0, 2.0], 1e-2, 7).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.gaussian_moments.is_none());
    }

    #[test]
    fn gaussian_case_checks_moments() {
        let spec = StableDriverSpec::new(2.0, 1.0).unwrap();
        let r = cf_battery(&spec, 0.5, 200_000, &[1.0], 1e-2, 7).unwrap();
        let g = r.gaussian_moments.unwrap();
        assert!(g.pass, "{g:?}");
        assert_eq!(g.expected_variance, 1.0);
    }

    #[test]
    fn small_gap_table() {
        let t = lemma4_experiment(&[10, 100], 50, 20_000, 3).unwrap();
        assert!(t.within_bound && t.decreasing, "{t:?}");
        assert!(t.rows[0].estimate > t.rows[1].estimate);
    }

    #[test]
    fn vasdis_has_no_violations() {
        let r = vasdis_battery(500, (2, 16), 9).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_ratio <= 1.0 + 1e-12);
    }
}
