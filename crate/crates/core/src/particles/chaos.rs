use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::engine::{simulate, simulate_coupled};
use super::SimulationConfig;
use crate::empirical::Estimate;
use crate::error::{invalid, Result};
use crate::rng::derive_seed;

const REFERENCE_TAG: u64 = 0x5245_4620; // "REF "

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    /// Estimate of `E sup_{t≤T} |X^{i,n}_t - X^i_t|²`.
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaosStatus {
    Ok,
    /// Every gap is zero (measure-independent σ); no slope exists.
    DegenerateAllZero,
    /// Some but not all estimates vanish; the log-log fit is undefined.
    DegenerateSomeZero,
}

/// Least-squares line through `(ln n, ln estimate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// 95% Student-t interval for the slope.
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosRateTable {
    pub rows: Vec<ChaosRow>,
    pub fit: Option<SlopeFit>,
    pub status: ChaosStatus,
    pub reps: usize,
    pub reference_particles: usize,
    pub vasdis_violations: usize,
}

impl ChaosRateTable {
    pub fn fitted_slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// Each estimate lies below its predecessor plus `k` combined standard errors.
    pub fn is_monotone_decreasing(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
            w[1].estimate < w[0].estimate + k * se
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "estimate", "std_error"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), format!("{:e}", r.estimate), format!("{:e}", r.std_error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// OLS fit of `ln y` against `ln x`; `None` for fewer than 3 points or non-positive data.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 3 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = k - 2.0;
    let std_error = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).ok()?.inverse_cdf(0.975);
    Some(SlopeFit {
        slope,
        intercept,
        std_error,
        ci95: (slope - t * std_error, slope + t * std_error),
    })
}

/// Mean-square pathwise gap between the `n`-particle system and copies of
/// the nonlinear process, for each `n` in `n_list`.
///
/// The nonlinear law is stood in for by an `n_ref`-particle run with an
/// independent seed. Each repetition draws fresh `X₀` and increments.
pub fn chaos_rate_experiment(
    cfg_base: &SimulationConfig,
    n_list: &[usize],
    reps: usize,
    n_ref: usize,
) -> Result<ChaosRateTable> {
    if n_list.len() < 4 {
        return Err(invalid("n_list", "need at least 4 particle counts"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(invalid("n_list", "must be strictly ascending and positive"));
    }
    let n_max = *n_list.last().expect("nonempty");
    if n_ref < 10 * n_max {
        return Err(invalid("n_ref", format!("{n_ref} < 10 × {n_max}")));
    }
    if reps < 2 {
        return Err(invalid("reps", "need at least 2 repetitions for standard errors"));
    }
    let base = cfg_base.clone().with_record_every(1)?;
    let reference_cfg = base.with_particles(n_ref).with_seed(derive_seed(base.seed, &[REFERENCE_TAG]));
    let reference = simulate(&reference_cfg)?;

    let mut rows = Vec::with_capacity(n_list.len());
    let mut vasdis_violations = 0;
    for &n in n_list {
        let runs = (0..reps)
            .into_par_iter()
            .map(|r| {
                let cfg = base.with_particles(n).with_seed(derive_seed(base.seed, &[n as u64, r as u64]));
                simulate_coupled(&cfg, &reference)
            })
            .collect::<Result<Vec<_>>>()?;
        vasdis_violations += runs.iter().map(|r| r.vasdis_violations).sum::<usize>();
        let stats: Vec<f64> = runs.iter().map(|r| r.mean_square_sup_gap()).collect();
        let est = Estimate::from_samples(&stats);
        rows.push(ChaosRow {
            n,
            estimate: est.mean,
            std_error: est.std_error,
        });
    }

    let zeros = rows.iter().filter(|r| r.estimate <= 0.0).count();
    let (status, fit) = if zeros == rows.len() {
        (ChaosStatus::DegenerateAllZero, None)
    } else if zeros > 0 {
        (ChaosStatus::DegenerateSomeZero, None)
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        (ChaosStatus::Ok, fit_loglog_slope(&xs, &ys))
    };
    Ok(ChaosRateTable {
        rows,
        fit,
        status,
        reps,
        reference_particles: n_ref,
        vasdis_violations,
    })
}
