use std::io::{Read, Write};

use crate::empirical::{wasserstein2, EmpiricalMeasure};
use crate::error::{invalid, Error, Result};
use crate::frames::{read_frames, write_frames, FrameKind};

/// Time-discretised flow of marginal laws `(P_t)`, one empirical measure per recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalFlow {
    times: Vec<f64>,
    marginals: Vec<EmpiricalMeasure>,
}

impl MarginalFlow {
    pub fn new(times: Vec<f64>, marginals: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.is_empty() || times.len() != marginals.len() {
            return Err(invalid("flow", "need one marginal per time and at least one time"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("flow.times", "must be strictly increasing"));
        }
        let n = marginals[0].len();
        if marginals.iter().any(|m| m.len() != n) {
            return Err(invalid("flow.marginals", "all marginals must have the same sample count"));
        }
        Ok(Self { times, marginals })
    }

    /// The same measure at every time of `times`.
    pub fn constant(times: Vec<f64>, marginal: EmpiricalMeasure) -> Result<Self> {
        let marginals = vec![marginal; times.len()];
        Self::new(times, marginals)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marginals(&self) -> &[EmpiricalMeasure] {
        &self.marginals
    }

    pub fn marginal(&self, k: usize) -> &EmpiricalMeasure {
        &self.marginals[k]
    }

    pub fn last(&self) -> &EmpiricalMeasure {
        &self.marginals[self.marginals.len() - 1]
    }

    pub fn sample_count(&self) -> usize {
        self.marginals[0].len()
    }

    /// `sup_t d(P_t, Q_t)` over the shared time grid.
    pub fn sup_distance(&self, other: &MarginalFlow) -> Result<f64> {
        self.check_same_grid(other)?;
        self.marginals
            .iter()
            .zip(&other.marginals)
            .try_fold(0.0f64, |acc, (a, b)| Ok(acc.max(wasserstein2(a, b)?)))
    }

    pub(crate) fn check_same_grid(&self, other: &MarginalFlow) -> Result<()> {
        if self.len() != other.len() || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::IncompatibleFlow(format!(
                "time grids differ ({} vs {} points)",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    /// One row per time: the time, then the sorted samples.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend((0..self.sample_count()).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (t, m) in self.times.iter().zip(&self.marginals) {
            let mut row = Vec::with_capacity(m.len() + 1);
            row.push(format!("{t:e}"));
            row.extend(m.samples().iter().map(|x| format!("{x:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, writer: W) -> Result<()> {
        write_frames(
            writer,
            FrameKind::Particles,
            0.0,
            self.sample_count(),
            self.times.iter().copied().zip(self.marginals.iter().map(|m| m.samples())),
        )
    }

    pub fn read_binary<R: Read>(reader: R) -> Result<Self> {
        let frames = read_frames(reader)?;
        if frames.kind != FrameKind::Particles {
            return Err(Error::Format("not a particle flow".into()));
        }
        let marginals = (0..frames.times.len())
            .map(|k| EmpiricalMeasure::from_slice(frames.row(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames.times, marginals)
    }
}
