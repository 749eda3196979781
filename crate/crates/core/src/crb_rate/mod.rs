//! Corner points of the CRB-rate region.
//!
//! The Bayesian Fisher information is an affine function of the sample
//! covariance `R_X = X X^H / T`, so the sensing cost of a signalling scheme is
//! governed by how random `R_X` is. Gaussian (capacity-achieving) signalling
//! has a Wishart `R_X`; semi-unitary signalling makes it deterministic.

mod bfim;
mod corners;
mod ensemble;
mod scenario;

pub use bfim::{crb_of_sample, phi_apply, trace_inverse, BfimMap};
pub use corners::{
    c0_nats, capacity_covariance, pcs_point, psc_kkt_residual, psc_point, psc_rate, CommModel, CrbObjective, PcsPoint,
    PscOptions, PscPoint, PscRate,
};
pub use ensemble::{
    compact_sqrt, mean_and_std_error, miller_chang_crb, sample_isac_signal, EnsembleKind, McEstimate, SignalEnsemble,
    SignalSource, RANK_TOL,
};
pub use scenario::{CrbScenario, ScenarioRanges};
