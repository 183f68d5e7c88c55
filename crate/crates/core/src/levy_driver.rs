//! Lévy driving noise.
//!
//! Two families are supported: exact symmetric α-stable increments (sampled
//! with the Chambers-Mallows-Stuck transform) and drivers described by a Lévy
//! triplet `(a, b, β)`. Triplet drivers are assembled from a drift, a Brownian
//! part, compensated compound-Poisson jumps on `δ < |y| ≤ 1` and uncompensated
//! big jumps on `|y| > 1`. Jumps below the cutoff `δ` are either replaced by a
//! Gaussian with matching variance or dropped.
//!
//! Big jumps are returned individually in an [`IncrementRecord`] so that the
//! truncated driver `Z^N` (all jumps larger than `N` removed) can be formed
//! from the same draws.
//!
//! # Normalisation
//!
//! [`StableDriverSpec::scale`] is the constant `c` in `E exp(iξZ₁) = exp(-c|ξ|^α)`.
//! The Lévy measure of the same process is `K |y|^{-1-α} dy` with
//! `c = K π / (Γ(1+α) sin(πα/2))`; see [`stable_cf_constant`].

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Upper bound on the expected number of simulated jumps per unit time.
pub const MAX_JUMP_INTENSITY: f64 = 1e8;

/// CF constant `c` of the symmetric stable law with Lévy density `K|y|^{-1-α}`.
pub fn stable_cf_constant(alpha: f64, k: f64) -> f64 {
    k * PI / (statrs::function::gamma::gamma(1.0 + alpha) * (FRAC_PI_2 * alpha).sin())
}

/// Lévy density constant `K` of the symmetric stable law with CF constant `c`.
pub fn stable_levy_constant(alpha: f64, c: f64) -> f64 {
    c / stable_cf_constant(alpha, 1.0)
}

/// Symmetric α-stable driver with `E exp(iξZ_t) = exp(-c t |ξ|^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StableFields")]
pub struct StableDriverSpec {
    alpha: f64,
    scale: f64,
}

#[derive(Deserialize)]
struct StableFields {
    alpha: f64,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<StableFields> for StableDriverSpec {
    type Error = crate::Error;

    fn try_from(f: StableFields) -> Result<Self> {
        Self::new(f.alpha, f.scale)
    }
}

impl StableDriverSpec {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid("alpha", format!("{alpha} is outside (0, 2]")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", format!("{scale} must be positive")));
        }
        Ok(Self { alpha, scale })
    }

    /// Builds the spec from the Lévy density constant `K` (requires `α < 2`).
    pub fn from_levy_density(alpha: f64, k: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid("alpha", "a Lévy density needs alpha in (0, 2)"));
        }
        Self::new(alpha, stable_cf_constant(alpha, k))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `K` such that the Lévy measure is `K|y|^{-1-α}dy`; `None` for the Gaussian case.
    pub fn levy_density_constant(&self) -> Option<f64> {
        (self.alpha < 2.0).then(|| stable_levy_constant(self.alpha, self.scale))
    }

    /// Characteristic function of an increment over `dt`.
    pub fn characteristic_function(&self, xi: f64, dt: f64) -> f64 {
        (-self.scale * dt * xi.abs().powf(self.alpha)).exp()
    }

    /// Standard draw with CF `exp(-|ξ|^α)`.
    pub fn sample_standard<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        let w: f64 = Exp1.sample(rng);
        cms_symmetric(self.alpha, PI * (u - 0.5), w)
    }

    /// One increment over a step of length `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        debug_assert!(dt > 0.0);
        (self.scale * dt).powf(1.0 / self.alpha) * self.sample_standard(rng)
    }
}

/// Chambers-Mallows-Stuck map for the symmetric case, `v ∈ (-π/2, π/2)`, `w ~ Exp(1)`.
fn cms_symmetric(alpha: f64, v: f64, w: f64) -> f64 {
    if alpha == 1.0 {
        return v.tan();
    }
    let a = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Sample an increment of a stable driver.
pub fn sample_stable_increment<R: Rng + ?Sized>(spec: &StableDriverSpec, dt: f64, rng: &mut R) -> f64 {
    spec.sample_increment(dt, rng)
}

/// Lévy density `β₁` restricted to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmallJumpDensity {
    #[default]
    None,
    /// `K |y|^{-1-α}` on `0 < |y| ≤ 1`.
    Stable { k: f64, alpha: f64 },
    /// Constant density on `[-1, 1]`.
    Uniform { density: f64 },
}

impl SmallJumpDensity {
    pub fn density(&self, y: f64) -> f64 {
        let ay = y.abs();
        if ay > 1.0 {
            return 0.0;
        }
        match *self {
            SmallJumpDensity::None => 0.0,
            SmallJumpDensity::Stable { k, alpha } => {
                if ay == 0.0 {
                    f64::INFINITY
                } else {
                    k * ay.powf(-1.0 - alpha)
                }
            }
            SmallJumpDensity::Uniform { density } => density,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SmallJumpDensity::None => Ok(()),
            SmallJumpDensity::Stable { k, alpha } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(invalid("small_jumps.k", "must be positive"));
                }
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(invalid("small_jumps.alpha", "∫ y²β₁ diverges unless alpha ∈ (0, 2)"));
                }
                Ok(())
            }
            SmallJumpDensity::Uniform { density } => {
                if !(density >= 0.0 && density.is_finite()) {
                    return Err(invalid("small_jumps.density", "must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    /// `∫_{|y|≤1} y² β₁(dy)`.
    pub fn second_moment(&self) -> f64 {
        self.variance_below(1.0)
    }

    /// `∫_{|y|≤δ} y² β₁(dy)`.
    pub fn variance_below(&self, delta: f64) -> f64 {
        match *self {
            SmallJumpDensity::None => 0.0,
            SmallJumpDensity::Stable { k, alpha } => 2.0 * k * delta.powf(2.0 - alpha) / (2.0 - alpha),
            SmallJumpDensity::Uniform { density } => 2.0 * density * delta.powi(3) / 3.0,
        }
    }

    /// `∫_{δ<|y|≤1} β₁(dy)`.
    pub fn intensity_above(&self, delta: f64) -> f64 {
        match *self {
            SmallJumpDensity::None => 0.0,
            SmallJumpDensity::Stable { k, alpha } => 2.0 * k * (delta.powf(-alpha) - 1.0) / alpha,
            SmallJumpDensity::Uniform { density } => 2.0 * density * (1.0 - delta),
        }
    }

    /// `∫_{δ<|y|≤1} y β₁(dy)`; zero for the symmetric built-ins.
    pub fn mean_above(&self, _delta: f64) -> f64 {
        0.0
    }

    /// Draws from `β₁` conditioned on `δ < |y| ≤ 1`.
    fn sample_above<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let magnitude = match *self {
            SmallJumpDensity::None => 0.0,
            SmallJumpDensity::Stable { alpha, .. } => {
                let lo = delta.powf(-alpha);
                (lo - u * (lo - 1.0)).powf(-1.0 / alpha)
            }
            SmallJumpDensity::Uniform { .. } => delta + u * (1.0 - delta),
        };
        sign * magnitude
    }
}

/// A point mass of the big-jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    pub amplitude: f64,
    pub rate: f64,
}

/// Finite Lévy measure on `|y| > 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BigJumpMeasure {
    #[default]
    None,
    Atoms { atoms: Vec<JumpAtom> },
    /// `K |y|^{-1-α}` on `|y| > 1`.
    StableTail { k: f64, alpha: f64 },
}

impl BigJumpMeasure {
    fn validate(&self) -> Result<()> {
        match self {
            BigJumpMeasure::None => Ok(()),
            BigJumpMeasure::Atoms { atoms } => {
                for a in atoms {
                    if !(a.amplitude.abs() > 1.0 && a.amplitude.is_finite()) {
                        return Err(invalid("big_jumps.amplitude", "atoms must sit on |y| > 1"));
                    }
                    if !(a.rate >= 0.0 && a.rate.is_finite()) {
                        return Err(invalid("big_jumps.rate", "must be nonnegative"));
                    }
                }
                Ok(())
            }
            &BigJumpMeasure::StableTail { k, alpha } => {
                if !(k > 0.0 && k.is_finite() && alpha > 0.0 && alpha < 2.0) {
                    return Err(invalid("big_jumps", "stable tail needs k > 0 and alpha in (0, 2)"));
                }
                Ok(())
            }
        }
    }

    /// Total mass `β({|y|>1})`.
    pub fn total_rate(&self) -> f64 {
        match self {
            BigJumpMeasure::None => 0.0,
            BigJumpMeasure::Atoms { atoms } => atoms.iter().map(|a| a.rate).sum(),
            &BigJumpMeasure::StableTail { k, alpha } => 2.0 * k / alpha,
        }
    }

    /// `∫_{1<|y|≤N} y² β(dy)`, `N = ∞` allowed.
    pub fn second_moment_below(&self, level: f64) -> f64 {
        match self {
            BigJumpMeasure::None => 0.0,
            BigJumpMeasure::Atoms { atoms } => atoms
                .iter()
                .filter(|a| a.amplitude.abs() <= level)
                .map(|a| a.rate * a.amplitude * a.amplitude)
                .sum(),
            &BigJumpMeasure::StableTail { k, alpha } => {
                if level.is_infinite() {
                    f64::INFINITY
                } else if level <= 1.0 {
                    0.0
                } else {
                    2.0 * k * (level.powf(2.0 - alpha) - 1.0) / (2.0 - alpha)
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            BigJumpMeasure::None => 0.0,
            BigJumpMeasure::Atoms { atoms } => {
                let total = self.total_rate();
                let mut target = rng.random::<f64>() * total;
                for a in atoms {
                    if target < a.rate {
                        return a.amplitude;
                    }
                    target -= a.rate;
                }
                atoms.iter().rev().find(|a| a.rate > 0.0).map_or(0.0, |a| a.amplitude)
            }
            &BigJumpMeasure::StableTail { alpha, .. } => {
                let u: f64 = Open01.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * u.powf(-1.0 / alpha)
            }
        }
    }
}

/// Treatment of jumps with `|y| ≤ δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpScheme {
    /// Replace them by a centred Gaussian with the same variance.
    #[default]
    GaussianMatch,
    /// Drop them (their compensated sum has mean zero).
    Drop,
}

/// Lévy driver given by its triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TripletFields")]
pub struct LevyTripletSpec {
    gaussian_a: f64,
    drift_b: f64,
    small_jumps: SmallJumpDensity,
    big_jumps: BigJumpMeasure,
    small_jump_cutoff: f64,
    scheme: SmallJumpScheme,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletFields {
    #[serde(default)]
    gaussian_a: f64,
    #[serde(default)]
    drift_b: f64,
    #[serde(default)]
    small_jumps: SmallJumpDensity,
    #[serde(default)]
    big_jumps: BigJumpMeasure,
    #[serde(default = "default_cutoff")]
    small_jump_cutoff: f64,
    #[serde(default)]
    scheme: SmallJumpScheme,
}

fn default_cutoff() -> f64 {
    0.1
}

impl TryFrom<TripletFields> for LevyTripletSpec {
    type Error = crate::Error;

    fn try_from(f: TripletFields) -> Result<Self> {
        Self::new(f.gaussian_a, f.drift_b, f.small_jumps, f.big_jumps, f.small_jump_cutoff, f.scheme)
    }
}

impl LevyTripletSpec {
    pub fn new(
        gaussian_a: f64,
        drift_b: f64,
        small_jumps: SmallJumpDensity,
        big_jumps: BigJumpMeasure,
        small_jump_cutoff: f64,
        scheme: SmallJumpScheme,
    ) -> Result<Self> {
        if !(gaussian_a >= 0.0 && gaussian_a.is_finite()) {
            return Err(invalid("gaussian_a", "must be nonnegative"));
        }
        if !drift_b.is_finite() {
            return Err(invalid("drift_b", "must be finite"));
        }
        if !(small_jump_cutoff > 0.0 && small_jump_cutoff <= 1.0) {
            return Err(invalid("small_jump_cutoff", format!("{small_jump_cutoff} is outside (0, 1]")));
        }
        small_jumps.validate()?;
        big_jumps.validate()?;
        let spec = Self {
            gaussian_a,
            drift_b,
            small_jumps,
            big_jumps,
            small_jump_cutoff,
            scheme,
        };
        let activity = spec.levy_measure_activity();
        if !activity.is_finite() {
            return Err(invalid("jump measure", "∫(1∧y²)β(dy) is not finite"));
        }
        let intensity = spec.small_jumps.intensity_above(small_jump_cutoff) + spec.big_jumps.total_rate();
        if !(intensity.is_finite() && intensity <= MAX_JUMP_INTENSITY) {
            return Err(invalid(
                "small_jump_cutoff",
                format!("jump intensity {intensity:.3e} above cutoff {small_jump_cutoff} is not computable"),
            ));
        }
        Ok(spec)
    }

    /// Pure drift `b`.
    pub fn drift(b: f64) -> Result<Self> {
        Self::new(0.0, b, SmallJumpDensity::None, BigJumpMeasure::None, 1.0, SmallJumpScheme::Drop)
    }

    /// Stable Lévy measure `K|y|^{-1-α}` written as a triplet, so big jumps are recorded.
    pub fn stable_like(alpha: f64, k: f64, cutoff: f64) -> Result<Self> {
        Self::new(
            0.0,
            0.0,
            SmallJumpDensity::Stable { k, alpha },
            BigJumpMeasure::StableTail { k, alpha },
            cutoff,
            SmallJumpScheme::GaussianMatch,
        )
    }

    pub fn gaussian_a(&self) -> f64 {
        self.gaussian_a
    }

    pub fn drift_b(&self) -> f64 {
        self.drift_b
    }

    pub fn small_jumps(&self) -> &SmallJumpDensity {
        &self.small_jumps
    }

    pub fn big_jumps(&self) -> &BigJumpMeasure {
        &self.big_jumps
    }

    pub fn small_jump_cutoff(&self) -> f64 {
        self.small_jump_cutoff
    }

    pub fn scheme(&self) -> SmallJumpScheme {
        self.scheme
    }

    /// `∫ (1 ∧ y²) β(dy)`.
    pub fn levy_measure_activity(&self) -> f64 {
        self.small_jumps.second_moment() + self.big_jumps.total_rate()
    }

    /// Variance per unit time of the driver with jumps above `level` removed
    /// (as simulated, i.e. after the small-jump scheme). Infinite when the
    /// retained jumps are not square integrable.
    pub fn variance_rate(&self, level: f64) -> f64 {
        let small = match self.scheme {
            SmallJumpScheme::GaussianMatch => self.small_jumps.second_moment(),
            SmallJumpScheme::Drop => {
                self.small_jumps.second_moment() - self.small_jumps.variance_below(self.small_jump_cutoff)
            }
        };
        self.gaussian_a + small + self.big_jumps.second_moment_below(level)
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> IncrementRecord {
        debug_assert!(dt > 0.0);
        let mut total = self.drift_b * dt;
        if self.gaussian_a > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            total += (self.gaussian_a * dt).sqrt() * z;
        }
        if self.scheme == SmallJumpScheme::GaussianMatch {
            let v = self.small_jumps.variance_below(self.small_jump_cutoff);
            if v > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                total += (v * dt).sqrt() * z;
            }
        }

        let delta = self.small_jump_cutoff;
        let mid_rate = self.small_jumps.intensity_above(delta);
        if mid_rate > 0.0 {
            let count = poisson_count(mid_rate * dt, rng);
            let mut sum = 0.0;
            for _ in 0..count {
                sum += self.small_jumps.sample_above(delta, rng);
            }
            total += sum - dt * self.small_jumps.mean_above(delta);
        }

        let big_rate = self.big_jumps.total_rate();
        let mut big_jumps = Vec::new();
        if big_rate > 0.0 {
            let count = poisson_count(big_rate * dt, rng);
            for _ in 0..count {
                let offset = rng.random::<f64>() * dt;
                let amplitude = self.big_jumps.sample(rng);
                total += amplitude;
                big_jumps.push(Jump { offset, amplitude });
            }
        }
        IncrementRecord { total, big_jumps }
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    // Poisson::new only fails for non-positive or non-finite means, excluded by construction.
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

pub fn sample_triplet_increment<R: Rng + ?Sized>(spec: &LevyTripletSpec, dt: f64, rng: &mut R) -> IncrementRecord {
    spec.sample_increment(dt, rng)
}

/// A recorded big jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Time of the jump measured from the start of the step.
    pub offset: f64,
    pub amplitude: f64,
}

/// Driver increment over one step with its big jumps listed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncrementRecord {
    pub total: f64,
    pub big_jumps: Vec<Jump>,
}

impl IncrementRecord {
    pub fn continuous(total: f64) -> Self {
        Self {
            total,
            big_jumps: Vec::new(),
        }
    }

    /// Drift, Gaussian and small-jump part of the increment.
    pub fn retained(&self) -> f64 {
        self.total - self.big_jumps.iter().map(|j| j.amplitude).sum::<f64>()
    }

    /// The record of `Z^N`: jumps with `|y| > level` removed from both the
    /// total and the list.
    pub fn truncated(&self, level: f64) -> IncrementRecord {
        let mut total = self.total;
        let mut kept = Vec::with_capacity(self.big_jumps.len());
        for j in &self.big_jumps {
            if j.amplitude.abs() > level {
                total -= j.amplitude;
            } else {
                kept.push(*j);
            }
        }
        IncrementRecord { total, big_jumps: kept }
    }
}

/// Increment of the truncated driver `Z^N`.
pub fn truncate_increments(record: &IncrementRecord, level: f64) -> f64 {
    debug_assert!(level > 0.0);
    record.truncated(level).total
}

/// Any supported driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    Stable(StableDriverSpec),
    Triplet(LevyTripletSpec),
}

impl Driver {
    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> IncrementRecord {
        match self {
            Driver::Stable(s) => IncrementRecord::continuous(s.sample_increment(dt, rng)),
            Driver::Triplet(t) => t.sample_increment(dt, rng),
        }
    }

    /// Increment of the driver, truncated at `level` if given.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, dt: f64, level: Option<f64>, rng: &mut R) -> f64 {
        let record = self.sample(dt, rng);
        match level {
            Some(n) => truncate_increments(&record, n),
            None => record.total,
        }
    }

    /// Whether the driver exposes its big jumps for truncation.
    pub fn supports_truncation(&self) -> bool {
        matches!(self, Driver::Triplet(_))
    }

    /// Variance per unit time of the (possibly truncated) driver, `None` if infinite.
    pub fn variance_rate(&self, level: Option<f64>) -> Option<f64> {
        let v = match self {
            Driver::Stable(s) if s.alpha() == 2.0 => 2.0 * s.scale(),
            Driver::Stable(_) => f64::INFINITY,
            Driver::Triplet(t) => t.variance_rate(level.unwrap_or(f64::INFINITY)),
        };
        v.is_finite().then_some(v)
    }

    pub fn as_stable(&self) -> Option<&StableDriverSpec> {
        match self {
            Driver::Stable(s) => Some(s),
            Driver::Triplet(_) => None,
        }
    }
}
