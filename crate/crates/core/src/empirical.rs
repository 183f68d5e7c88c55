//! Empirical measures on the real line and the distances between them.
//!
//! In one dimension the optimal coupling for the quadratic cost pairs the
//! order statistics, so the Vaserstein distance `d` is computed exactly by
//! sorting. The modified distance `d₁` uses the truncated cost `|x-y|² ∧ 1`,
//! which is not convex; the sorted coupling then only gives an upper bound,
//! which is what [`modified_d1_upper`] returns.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Uniformly weighted point cloud, samples kept sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(invalid("samples", format!("non-finite sample {bad}")));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn from_slice(samples: &[f64]) -> Result<Self> {
        Self::new(samples.to_vec())
    }

    /// Dirac mass at `x`, repeated `n` times.
    pub fn dirac(x: f64, n: usize) -> Result<Self> {
        Self::new(vec![x; n])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// `∫ x² μ(dx)`.
    pub fn second_moment(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    /// Empirical quantile by the lower order statistic.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.len();
        let idx = ((q.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.samples[idx]
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.len() - 1]
    }

    /// Writes one sample per line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for x in &self.samples {
            w.write_record([format!("{x:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a single-column CSV, ignoring a non-numeric header line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut samples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = rec.get(0).unwrap_or("").trim();
            match field.parse::<f64>() {
                Ok(v) => samples.push(v),
                Err(_) if line == 0 => continue,
                Err(_) => return Err(Error::Format(format!("line {}: `{field}` is not a number", line + 1))),
            }
        }
        Self::new(samples)
    }
}

fn check_sizes(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(())
}

/// Vaserstein-2 distance between equal-size empirical measures.
pub fn wasserstein2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_sizes(mu, nu)?;
    let n = mu.len() as f64;
    let ss: f64 = mu.samples.iter().zip(&nu.samples).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / n).sqrt())
}

/// Vaserstein-2 distance between empirical measures of any sizes, via the
/// exact quantile-function coupling `∫₀¹ (F⁻¹(u) - G⁻¹(u))² du`.
pub fn wasserstein2_quantile(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    let (mut i, mut j) = (0usize, 0usize);
    // Breakpoints of the two step quantile functions, in integer units of 1/(n m).
    let (mut next_i, mut next_j) = (m as u128, n as u128);
    let mut pos: u128 = 0;
    let mut acc = 0.0;
    while i < n && j < m {
        let step = next_i.min(next_j);
        let d = mu.samples[i] - nu.samples[j];
        acc += d * d * (step - pos) as f64;
        pos = step;
        if next_i == step {
            i += 1;
            next_i += m as u128;
        }
        if next_j == step {
            j += 1;
            next_j += n as u128;
        }
    }
    (acc / (n as f64 * m as f64)).sqrt()
}

/// Monotone-coupling value of the truncated-cost distance; an upper bound on `d₁`.
pub fn modified_d1_upper(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_sizes(mu, nu)?;
    let n = mu.len() as f64;
    let ss: f64 = mu
        .samples
        .iter()
        .zip(&nu.samples)
        .map(|(x, y)| ((x - y) * (x - y)).min(1.0))
        .sum();
    Ok((ss / n).sqrt())
}

/// Both distances at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub d2: f64,
    pub d1_upper: f64,
}

pub fn metric_report(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<MetricReport> {
    Ok(MetricReport {
        d2: wasserstein2(mu, nu)?,
        d1_upper: modified_d1_upper(mu, nu)?,
    })
}

/// Checks `d(μ_ξ, μ_ζ) ≤ |ξ - ζ| / √n` for two position vectors.
pub fn check_vasdis(xs: &[f64], ys: &[f64]) -> Result<bool> {
    if xs.len() != ys.len() {
        return Err(Error::SizeMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len() as f64;
    let d = wasserstein2(&EmpiricalMeasure::from_slice(xs)?, &EmpiricalMeasure::from_slice(ys)?)?;
    let euclid = xs.iter().zip(ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok(d <= euclid / n.sqrt() + 1e-12)
}

/// Gaussian kernel `g_ε(x) = exp(-x²/2ε)/√(2πε)`.
#[inline]
pub fn gaussian_kernel(eps: f64, x: f64) -> f64 {
    (-x * x / (2.0 * eps)).exp() / (2.0 * PI * eps).sqrt()
}

/// `(g_ε * μ)(x)`.
pub fn smoothed_density(mu: &EmpiricalMeasure, eps: f64, x: f64) -> f64 {
    let inv = -1.0 / (2.0 * eps);
    let sum: f64 = mu.samples.iter().map(|y| ((x - y) * (x - y) * inv).exp()).sum();
    sum / (mu.len() as f64 * (2.0 * PI * eps).sqrt())
}

pub fn second_moment(mu: &EmpiricalMeasure) -> f64 {
    mu.second_moment()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, std_error: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

/// Estimates `E d²(νⁿ, ν)` with `ν` represented by a large reference sample.
///
/// `sampler` draws one point from `ν`. The reference measure should be built
/// from many more draws than `n`; its own distance to `ν` biases the
/// estimate upward by roughly `E d²(ν_ref, ν)`.
pub fn empirical_gap_experiment<R, F>(
    mut sampler: F,
    reference: &EmpiricalMeasure,
    n: usize,
    reps: usize,
    rng: &mut R,
) -> Result<Estimate>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    if n == 0 || reps == 0 {
        return Err(invalid("n/reps", "must be positive"));
    }
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        let sample: Vec<f64> = (0..n).map(|_| sampler(rng)).collect();
        let mu = EmpiricalMeasure::new(sample)?;
        let d = wasserstein2_quantile(&mu, reference);
        values.push(d * d);
    }
    Ok(Estimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn emp(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_slice(xs).unwrap()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Minimum over all pairings of the mean cost, then square-rooted.
    fn brute_force(xs: &[f64], ys: &[f64], cost: impl Fn(f64) -> f64) -> f64 {
        let n = xs.len();
        permutations(n)
            .iter()
            .map(|p| (0..n).map(|i| cost(xs[i] - ys[p[i]])).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    #[test]
    fn basic_values() {
        let mu = emp(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein2(&mu, &mu).unwrap(), 0.0);
        assert_eq!(wasserstein2(&emp(&[0.0; 4]), &emp(&[1.0; 4])).unwrap(), 1.0);
        assert_eq!(modified_d1_upper(&mu, &mu).unwrap(), 0.0);
        assert_eq!(modified_d1_upper(&emp(&[0.0; 3]), &emp(&[10.0; 3])).unwrap(), 1.0);
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = emp(&[0.0, 1.0]);
        let b = emp(&[0.0]);
        assert!(matches!(wasserstein2(&a, &b), Err(Error::SizeMismatch { .. })));
        assert!(modified_d1_upper(&a, &b).is_err());
        assert!(check_vasdis(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(EmpiricalMeasure::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sorted_coupling_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..40 {
            let xs: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w = wasserstein2(&emp(&xs), &emp(&ys)).unwrap();
            let oracle = brute_force(&xs, &ys, |d| d * d);
            assert!((w - oracle).abs() < 1e-12, "{w} vs {oracle}");

            let d1 = modified_d1_upper(&emp(&xs), &emp(&ys)).unwrap();
            let d1_oracle = brute_force(&xs, &ys, |d| (d * d).min(1.0));
            assert!(d1 >= d1_oracle - 1e-12);
        }
    }

    #[test]
    fn d1_upper_is_exact_when_gaps_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            // Every pairwise gap stays below 1, so the truncation never binds.
            let xs: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..0.45)).collect();
            let ys: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..0.45)).collect();
            let d1 = modified_d1_upper(&emp(&xs), &emp(&ys)).unwrap();
            let oracle = brute_force(&xs, &ys, |d| (d * d).min(1.0));
            assert!((d1 - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn d1_upper_can_be_strict_bound_for_eight_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let xs: Vec<f64> = (0..8).map(|_| rng.random_range(-4.0..4.0)).collect();
            let ys: Vec<f64> = (0..8).map(|_| rng.random_range(-4.0..4.0)).collect();
            let d1 = modified_d1_upper(&emp(&xs), &emp(&ys)).unwrap();
            let oracle = brute_force(&xs, &ys, |d| (d * d).min(1.0));
            assert!(d1 >= oracle - 1e-12);
        }
    }

    #[test]
    fn vasdis_examples() {
        assert!(check_vasdis(&[1.0, 2.0], &[1.0, 2.0]).unwrap());
        // permuted vectors: measure distance 0, euclidean gap √2
        assert!(check_vasdis(&[0.0, 1.0], &[1.0, 0.0]).unwrap());
        let d = wasserstein2(&emp(&[0.0, 1.0]), &emp(&[1.0, 0.0])).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn smoothed_density_peak_and_mass() {
        let eps = 0.3;
        let mu = emp(&[0.0]);
        assert!((smoothed_density(&mu, eps, 0.0) - 1.0 / (2.0 * PI * eps).sqrt()).abs() < 1e-15);

        let mu = emp(&[-1.0, 0.2, 0.25, 3.0]);
        let h = 1e-3;
        let mass: f64 = (-15_000..=18_000).map(|k| smoothed_density(&mu, eps, k as f64 * h) * h).sum();
        assert!((mass - 1.0).abs() < 1e-6, "mass={mass}");
    }

    #[test]
    fn smoothed_gaussian_sample_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mu = EmpiricalMeasure::new(xs).unwrap();
        let eps = 0.1;
        let worst = (-40..=40)
            .map(|k| {
                let x = k as f64 * 0.1;
                (smoothed_density(&mu, eps, x) - gaussian_kernel(1.0 + eps, x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 0.02, "worst={worst}");
    }

    #[test]
    fn second_moment_examples() {
        assert_eq!(second_moment(&emp(&[0.0])), 0.0);
        assert_eq!(second_moment(&emp(&[1.0, -1.0])), 1.0);
        let xs = [0.5, -2.0, 3.25, 1.0];
        let mut naive = 0.0;
        for x in xs {
            naive += x * x;
        }
        assert!((second_moment(&emp(&xs)) - naive / 4.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_coupling_agrees_with_sorted_pairs_for_equal_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let xs: Vec<f64> = (0..37).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..37).map(|_| rng.random_range(-1.0..5.0)).collect();
        let a = wasserstein2(&emp(&xs), &emp(&ys)).unwrap();
        let b = wasserstein2_quantile(&emp(&xs), &emp(&ys));
        assert!((a - b).abs() < 1e-12);
        // replicating each atom k times leaves the measure unchanged
        let xs3: Vec<f64> = xs.iter().flat_map(|&x| [x, x, x]).collect();
        let c = wasserstein2_quantile(&emp(&xs3), &emp(&ys));
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn gap_experiment_point_mass_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let reference = EmpiricalMeasure::dirac(2.0, 1000).unwrap();
        let est = empirical_gap_experiment(|_: &mut ChaCha8Rng| 2.0, &reference, 10, 20, &mut rng).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn csv_roundtrip() {
        let mu = emp(&[3.5, -1.0e-7, 2.0, 1.0 / 3.0]);
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let back = EmpiricalMeasure::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, mu);
        let with_header = b"x\n1.5\n-2\n";
        assert_eq!(EmpiricalMeasure::read_csv(&with_header[..]).unwrap().samples(), &[-2.0, 1.5]);
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            c in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let (ma, mb, mc) = (emp(&a), emp(&b), emp(&c));
            let ab = wasserstein2(&ma, &mb).unwrap();
            prop_assert_eq!(ab, wasserstein2(&mb, &ma).unwrap());
            let ac = wasserstein2(&ma, &mc).unwrap();
            let cb = wasserstein2(&mc, &mb).unwrap();
            prop_assert!(ab <= ac + cb + 1e-10);
            let d1 = modified_d1_upper(&ma, &mb).unwrap();
            prop_assert!(d1 <= ab.min(1.0) + 1e-12);
        }

        #[test]
        fn vasdis_always_holds(
            pairs in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..64),
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(check_vasdis(&xs, &ys).unwrap());
        }

        #[test]
        fn smoothed_density_positive(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..20),
            x in -8.0f64..8.0,
            eps in 0.5f64..2.0,
        ) {
            prop_assert!(smoothed_density(&emp(&xs), eps, x) > 0.0);
        }
    }
}
