use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::numerics::{sample_gaussian_matrix, CMatrix, HermitianMatrix};

/// Eigenvalues at or below this fraction of the largest make a BFIM singular.
const SINGULAR_TOL: f64 = 1e-12;

/// Affine map `Phi(A) = sum F_i A^T F_i^H + sum G_j A G_j^H + J_P` taking a
/// transmit (sample) covariance to the normalised Bayesian Fisher information.
#[derive(Debug, Clone, PartialEq)]
pub struct BfimMap {
    f_blocks: Vec<CMatrix>,
    g_blocks: Vec<CMatrix>,
    j_prior: HermitianMatrix,
    inputs: usize,
}

impl BfimMap {
    /// All blocks must be `K x M`; `j_prior` must be a `K x K` PSD matrix.
    pub fn new(f_blocks: Vec<CMatrix>, g_blocks: Vec<CMatrix>, j_prior: HermitianMatrix) -> Result<Self> {
        let k = j_prior.dim();
        if k == 0 {
            return invalid("BFIM needs at least one sensing parameter");
        }
        j_prior.check_psd()?;
        let inputs = f_blocks.iter().chain(&g_blocks).map(|b| b.ncols()).next();
        let Some(inputs) = inputs else {
            return invalid("BFIM needs at least one Jacobian block to fix the input dimension");
        };
        for b in f_blocks.iter().chain(&g_blocks) {
            if b.nrows() != k || b.ncols() != inputs {
                return Err(Error::DimensionMismatch(format!(
                    "Jacobian block is {}x{}, expected {k}x{inputs}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid("Jacobian block has non-finite entries");
            }
        }
        Ok(Self { f_blocks, g_blocks, j_prior, inputs })
    }

    /// Map with no signal-dependent terms; `inputs` fixes the domain size.
    pub fn prior_only(j_prior: HermitianMatrix, inputs: usize) -> Result<Self> {
        j_prior.check_psd()?;
        Ok(Self { f_blocks: Vec::new(), g_blocks: Vec::new(), j_prior, inputs })
    }

    /// Random instance: `r1` and `r2` standard complex Gaussian blocks plus a
    /// Wishart prior scaled to trace `prior_scale`.
    pub fn random<R: Rng + ?Sized>(
        k: usize,
        m: usize,
        r1: usize,
        r2: usize,
        prior_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 || m == 0 || r1 + r2 == 0 {
            return invalid("random BFIM needs K, M >= 1 and at least one block");
        }
        let f = (0..r1).map(|_| sample_gaussian_matrix(k, m, 1.0, rng)).collect::<Result<Vec<_>>>()?;
        let g = (0..r2).map(|_| sample_gaussian_matrix(k, m, 1.0, rng)).collect::<Result<Vec<_>>>()?;
        let c = sample_gaussian_matrix(k, k, 1.0, rng)?;
        let j = HermitianMatrix::gram(&c, k as f64).scale(prior_scale);
        Self::new(f, g, j)
    }

    pub fn params(&self) -> usize {
        self.j_prior.dim()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn j_prior(&self) -> &HermitianMatrix {
        &self.j_prior
    }

    pub fn f_blocks(&self) -> &[CMatrix] {
        &self.f_blocks
    }

    pub fn g_blocks(&self) -> &[CMatrix] {
        &self.g_blocks
    }

    fn check_input(&self, a: &HermitianMatrix) -> Result<()> {
        if a.dim() != self.inputs {
            return Err(Error::DimensionMismatch(format!("argument is {0}x{0}, map expects {1}x{1}", a.dim(), self.inputs)));
        }
        Ok(())
    }

    /// Signal-dependent part of the map (no prior term).
    pub fn apply_linear(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.check_input(a)?;
        let k = self.params();
        let at = a.transpose();
        let mut acc = CMatrix::zeros(k, k);
        for f in &self.f_blocks {
            acc += f * at.matrix() * f.adjoint();
        }
        for g in &self.g_blocks {
            acc += g * a.matrix() * g.adjoint();
        }
        Ok(HermitianMatrix::from_symmetrized(acc))
    }

    pub fn apply(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        Ok(&self.apply_linear(a)? + &self.j_prior)
    }

    /// Adjoint of the linear part under `<X, Y> = Re tr(X Y)`:
    /// `sum conj(F_i^H B F_i) + sum G_j^H B G_j`.
    pub fn adjoint(&self, b: &HermitianMatrix) -> HermitianMatrix {
        let m = self.inputs;
        let mut acc = CMatrix::zeros(m, m);
        for f in &self.f_blocks {
            acc += (f.adjoint() * b.matrix() * f).map(|z| z.conj());
        }
        for g in &self.g_blocks {
            acc += g.adjoint() * b.matrix() * g;
        }
        HermitianMatrix::from_symmetrized(acc)
    }
}

/// `Phi(A)`.
pub fn phi_apply(map: &BfimMap, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    map.apply(a)
}

/// `tr(J^{-1})` for a Hermitian information matrix, rejecting singular ones.
pub fn trace_inverse(j: &HermitianMatrix) -> Result<f64> {
    let eig = j.eig();
    let top = eig.values.first().copied().unwrap_or(0.0);
    let bottom = eig.values.last().copied().unwrap_or(0.0);
    if !(top > 0.0) || bottom <= SINGULAR_TOL * top {
        return Err(Error::SingularBfim);
    }
    Ok(eig.values.iter().map(|l| 1.0 / l).sum())
}

/// Per-realisation CRB `(s^2 / T) tr(Phi(X X^H / T)^{-1})`.
///
/// A singular information matrix is an error unless `ridge` is given, in
/// which case `ridge * I` is added before inversion.
pub fn crb_of_sample(map: &BfimMap, x: &CMatrix, noise_var: f64, ridge: Option<f64>) -> Result<f64> {
    if !(noise_var > 0.0) {
        return invalid(format!("sensing noise variance must be positive, got {noise_var}"));
    }
    if x.nrows() != map.inputs() {
        return Err(Error::DimensionMismatch(format!("signal has {} rows, map expects {}", x.nrows(), map.inputs())));
    }
    let t = x.ncols();
    if t == 0 {
        return invalid("signal block length must be positive");
    }
    let rx = HermitianMatrix::gram(x, t as f64);
    let mut phi = map.apply(&rx)?;
    if let Some(eps) = ridge {
        phi = &phi + &HermitianMatrix::scaled_identity(phi.dim(), eps);
    }
    Ok(noise_var / t as f64 * trace_inverse(&phi)?)
}
