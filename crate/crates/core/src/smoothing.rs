//! Grid-binned kernel sums for large point clouds.
//!
//! `(1/n) Σ κ(x - yᵢ)` costs `O(n)` per query. For large clouds the samples
//! are deposited on a uniform grid with cloud-in-cell weights, convolved with
//! the sampled kernel by FFT and read back with cubic interpolation. The
//! deposit and the interpolation each contribute an `O(h²)` error.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Largest FFT length the binned path will allocate.
const MAX_FFT_LEN: usize = 1 << 23;

/// Kernel sum tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct BinnedField {
    origin: f64,
    spacing: f64,
    values: Vec<f64>,
}

impl BinnedField {
    /// Builds `(1/n) Σ κ(· - yᵢ)` on a grid of spacing `h` covering the samples.
    ///
    /// `radius` bounds the kernel support used in the convolution. Returns
    /// `None` when the grid would be unreasonably large.
    pub fn build(samples: &[f64], kernel: impl Fn(f64) -> f64, radius: f64, h: f64) -> Option<Self> {
        Self::build_covering(samples, kernel, radius, h, (f64::INFINITY, f64::NEG_INFINITY))
    }

    /// As [`build`](Self::build), with the grid also spanning `[span.0, span.1]`.
    pub fn build_covering(
        samples: &[f64],
        kernel: impl Fn(f64) -> f64,
        radius: f64,
        h: f64,
        span: (f64, f64),
    ) -> Option<Self> {
        if samples.is_empty() || !(h > 0.0) {
            return None;
        }
        let lo = samples.iter().copied().fold(span.0, f64::min);
        let hi = samples.iter().copied().fold(span.1, f64::max);
        let origin = lo - 3.0 * h;
        let cells_f = ((hi - lo) / h).ceil() + 7.0;
        if !(cells_f.is_finite() && cells_f < MAX_FFT_LEN as f64) {
            return None;
        }
        let cells = cells_f as usize;
        let reach = ((radius / h).ceil() as usize).min(cells);
        let len = (cells + reach + 1).next_power_of_two();
        if len > MAX_FFT_LEN {
            return None;
        }

        let weight = 1.0 / samples.len() as f64;
        let mut mass = vec![Complex::new(0.0, 0.0); len];
        for &y in samples {
            let t = (y - origin) / h;
            let j = t.floor();
            let frac = t - j;
            let j = j as usize;
            mass[j].re += weight * (1.0 - frac);
            mass[j + 1].re += weight * frac;
        }

        let mut kern = vec![Complex::new(0.0, 0.0); len];
        kern[0].re = kernel(0.0);
        for k in 1..=reach {
            let d = k as f64 * h;
            kern[k].re = kernel(d);
            kern[len - k].re = kernel(-d);
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        fwd.process(&mut mass);
        fwd.process(&mut kern);
        for (m, k) in mass.iter_mut().zip(&kern) {
            *m *= *k;
        }
        inv.process(&mut mass);
        let scale = 1.0 / len as f64;
        let values = mass[..cells].iter().map(|c| c.re * scale).collect();
        Some(Self {
            origin,
            spacing: h,
            values,
        })
    }

    /// Catmull-Rom interpolation of the tabulated sum; zero off the grid.
    pub fn at(&self, x: f64) -> f64 {
        let t = (x - self.origin) / self.spacing;
        let j = t.floor();
        if !(j >= 1.0 && (j as usize) + 2 < self.values.len()) {
            return 0.0;
        }
        let s = t - j;
        let j = j as usize;
        let (p0, p1, p2, p3) = (self.values[j - 1], self.values[j], self.values[j + 1], self.values[j + 2]);
        p1 + 0.5
            * s
            * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}
