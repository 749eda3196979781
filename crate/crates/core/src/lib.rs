//! Numerical solvers for the sensing-and-communication tradeoff of
//! integrated sensing and communication (ISAC) systems.
//!
//! The crate is organised by tradeoff object:
//!
//! * [`rate_exponent`]: rate / detection-error-exponent regions and beampatterns.
//! * [`cap_distortion`]: capacity-distortion boundaries via a two-cost
//!   Blahut-Arimoto fixed point.
//! * [`crb_rate`]: CRB-rate corner points (Gaussian vs semi-unitary signalling).
//! * [`elmmse`]: ergodic LMMSE channel estimation and precoder design.
//! * [`ranging_zzb`]: ranging CRB, Ziv-Zakai bound and ZZB-optimal spectra.
//!
//! Shared kernels live in [`numerics`]; channel constructors in [`channels`].

pub mod cap_distortion;
pub mod channels;
pub mod crb_rate;
pub mod curve;
pub mod elmmse;
mod error;
pub mod numerics;
pub mod ranging_zzb;
pub mod rate_exponent;

pub use error::{Error, Result};
pub use numerics::{CMatrix, HermitianMatrix, SeededRng, C64};
