//! Particle and spectral simulation of nonlinear (McKean-Vlasov) SDEs driven
//! by Lévy processes.
//!
//! The particle side approximates `X_t = X_0 + ∫₀ᵗ σ(X_{s-}, P_s) dZ_s`,
//! where `P_s` is the law of `X_s`, by `n` interacting particles. The PDE side
//! solves the nonlinear fractional Fokker-Planck equation
//! `∂ₜp = D^α(|σ(·,p)|^α p)` satisfied by the marginal densities when `Z` is
//! symmetric α-stable.

pub mod coefficient;
pub mod consistency;
pub mod empirical;
pub mod error;
pub mod frames;
pub mod fractional_fp;
pub mod grid;
pub mod levy_driver;
pub mod particles;
pub mod rng;
pub mod smoothing;
pub mod validation;
pub mod variation_checks;

pub use error::{Error, Result};
