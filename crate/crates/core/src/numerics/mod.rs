//! Shared numerical kernels: Hermitian eigendecomposition, water-filling,
//! seeded random matrix sampling, quadrature and special functions.

mod hermitian;
mod psd_opt;
mod quadrature;
mod rng;
mod special;
mod waterfill;

pub use hermitian::{eig_hermitian, CMatrix, CVector, HermitianEigen, HermitianMatrix, C64};
pub use psd_opt::{minimize_over_psd, project_psd_trace, project_simplex, PgOptions, PgOutcome, PsdObjective};
pub use quadrature::{gauss_hermite, normal_expectation_rule, pairwise_sum, trapezoid_weights};
pub use rng::{haar_semiunitary, sample_gaussian_matrix, SeededRng};
pub use special::{gaussian_q, ln_gamma, standard_normal_pdf};
pub use waterfill::water_fill;

pub fn frobenius_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    frobenius_norm_sq(m).sqrt()
}

/// `log2 det(I + A)` for a Hermitian PSD `A`, via eigenvalues.
pub fn log2_det_identity_plus(a: &HermitianMatrix) -> f64 {
    a.eig().values.iter().map(|&l| (1.0 + l.max(0.0)).log2()).sum()
}
