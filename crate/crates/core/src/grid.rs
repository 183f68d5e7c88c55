//! Periodic uniform grids and Fourier multipliers on them.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Tolerance on the unit-mass invariant of a [`DensityGrid`].
pub const MASS_TOL: f64 = 1e-10;

/// Probability density sampled at `x_j = -L + j·dx`, `dx = 2L/m`, on the
/// periodic domain `[-L, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    half_width: f64,
    values: Vec<f64>,
}

impl DensityGrid {
    /// Wraps `values`, rescaling them to unit mass.
    pub fn new(half_width: f64, values: Vec<f64>) -> Result<Self> {
        let grid = Self::unnormalized(half_width, values)?;
        let mass = grid.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("values", format!("total mass {mass} cannot be normalised")));
        }
        let values = grid.values.iter().map(|v| v / mass).collect();
        Ok(Self { half_width, values })
    }

    /// Wraps `values` as they are; used for intermediate solver states.
    pub fn unnormalized(half_width: f64, values: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("half_width", "must be positive"));
        }
        let m = values.len();
        if m < 4 || !m.is_power_of_two() {
            return Err(invalid("m_points", format!("{m} is not a power of two ≥ 4")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "non-finite density value"));
        }
        Ok(Self { half_width, values })
    }

    /// Samples `f` on the grid and normalises.
    pub fn from_fn(half_width: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = 2.0 * half_width / m as f64;
        let values = (0..m).map(|j| f(-half_width + j as f64 * dx)).collect();
        Self::new(half_width, values)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.values.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    /// Density at the periodic seam `x = ±L`.
    pub fn boundary_density(&self) -> f64 {
        self.values[0].abs()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Periodic linear interpolation.
    pub fn interpolate(&self, x: f64) -> f64 {
        let m = self.len();
        let period = 2.0 * self.half_width;
        let t = (x + self.half_width).rem_euclid(period) / self.dx();
        let j = t.floor();
        let s = t - j;
        let j = (j as usize) % m;
        (1.0 - s) * self.values[j] + s * self.values[(j + 1) % m]
    }

    /// `∫ |p - q| dx` on matching grids.
    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.dx()
    }
}

/// Discrete Fourier machinery for one grid size.
#[derive(Clone)]
pub struct Spectral {
    half_width: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("half_width", &self.half_width)
            .field("m", &self.wavenumbers.len())
            .finish()
    }
}

impl Spectral {
    pub fn new(half_width: f64, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let k0 = std::f64::consts::PI / half_width;
        // Nyquist mode carries +m/2; the multipliers used here are even in ξ.
        let wavenumbers = (0..m)
            .map(|k| if k <= m / 2 { k as f64 * k0 } else { (k as f64 - m as f64) * k0 })
            .collect();
        Self {
            half_width,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            wavenumbers,
        }
    }

    pub fn for_grid(grid: &DensityGrid) -> Self {
        Self::new(grid.half_width(), grid.len())
    }

    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }

    /// Wavenumbers `ξ_k = πk/L` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest resolved `|ξ|`.
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI * self.len() as f64 / (2.0 * self.half_width)
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn inverse(&self, mut coeffs: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut coeffs);
        let scale = 1.0 / self.len() as f64;
        coeffs.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies the real, even multiplier `symbol(ξ)` to grid values.
    pub fn apply(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut coeffs = self.forward(values);
        for (c, &xi) in coeffs.iter_mut().zip(&self.wavenumbers) {
            *c *= symbol(xi);
        }
        self.inverse(coeffs)
    }
}
