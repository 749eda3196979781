use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::bfim::{crb_of_sample, BfimMap};
use crate::error::{invalid, Error, Result};
use crate::numerics::{haar_semiunitary, pairwise_sum, sample_gaussian_matrix, CMatrix, HermitianMatrix, SeededRng, C64};

/// Relative eigenvalue threshold used for every rank decision.
pub const RANK_TOL: f64 = 1e-8;

/// Random ISAC signal blocks of size `M x T`.
pub trait SignalSource: Sync {
    fn inputs(&self) -> usize;
    fn block_length(&self) -> usize;
    fn sample(&self, rng: &mut ChaCha20Rng) -> CMatrix;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    /// `X = S D`, `D` with i.i.d. unit complex Gaussian entries.
    GaussianCs,
    /// `X = sqrt(T) S Q`, `Q` Haar semi-unitary.
    SemiunitarySc,
}

/// Built-in signal families shaped by `S` (`M x r`, `S S^H = R`).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEnsemble {
    pub kind: EnsembleKind,
    pub shaping: CMatrix,
    pub block_length: usize,
}

/// Compact square-root factor `U_r Lambda_r^{1/2}` of a PSD covariance,
/// keeping eigenvalues above `RANK_TOL` times the largest.
pub fn compact_sqrt(cov: &HermitianMatrix) -> CMatrix {
    let eig = cov.eig();
    let m = cov.dim();
    let r = eig.rank(RANK_TOL);
    CMatrix::from_fn(m, r, |i, j| eig.vectors[(i, j)] * eig.values[j].sqrt())
}

impl SignalEnsemble {
    pub fn new(kind: EnsembleKind, cov: &HermitianMatrix, block_length: usize) -> Result<Self> {
        cov.check_psd()?;
        let shaping = compact_sqrt(cov);
        Self::from_shaping(kind, shaping, block_length)
    }

    pub fn from_shaping(kind: EnsembleKind, shaping: CMatrix, block_length: usize) -> Result<Self> {
        if block_length == 0 {
            return invalid("block length must be positive");
        }
        if kind == EnsembleKind::SemiunitarySc && block_length < shaping.ncols() {
            return invalid(format!(
                "semi-unitary signalling needs T >= rank ({} < {})",
                block_length,
                shaping.ncols()
            ));
        }
        Ok(Self { kind, shaping, block_length })
    }

    /// Statistical covariance `S S^H`.
    pub fn covariance(&self) -> HermitianMatrix {
        HermitianMatrix::gram(&self.shaping, 1.0)
    }
}

impl SignalSource for SignalEnsemble {
    fn inputs(&self) -> usize {
        self.shaping.nrows()
    }

    fn block_length(&self) -> usize {
        self.block_length
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> CMatrix {
        sample_isac_signal(self, rng)
    }
}

pub fn sample_isac_signal(ens: &SignalEnsemble, rng: &mut ChaCha20Rng) -> CMatrix {
    let (m, r, t) = (ens.shaping.nrows(), ens.shaping.ncols(), ens.block_length);
    if r == 0 {
        return CMatrix::zeros(m, t);
    }
    match ens.kind {
        EnsembleKind::GaussianCs => {
            let d = sample_gaussian_matrix(r, t, 1.0, rng).expect("unit variance is valid");
            &ens.shaping * d
        }
        EnsembleKind::SemiunitarySc => {
            let q = haar_semiunitary(r, t, rng).expect("T >= rank checked at construction");
            &ens.shaping * q * C64::new((t as f64).sqrt(), 0.0)
        }
    }
}

/// Monte Carlo Miller-Chang CRB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Draws whose information matrix was singular (excluded from the mean).
    pub singular_draws: usize,
    pub used_draws: usize,
}

/// Mean and standard error of `values`, using pairwise sums.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E_X[(s^2/T) tr(Phi(R_X)^{-1})]` over `n_mc` draws; draw `i` uses its own
/// stream so the estimate does not depend on the worker count.
pub fn miller_chang_crb(
    map: &BfimMap,
    source: &dyn SignalSource,
    noise_var: f64,
    n_mc: usize,
    rng: SeededRng,
) -> Result<McEstimate> {
    if n_mc < 2 {
        return invalid("Monte Carlo needs at least two draws");
    }
    if source.inputs() != map.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} antennas, map expects {}",
            source.inputs(),
            map.inputs()
        )));
    }
    let base = rng.fork("miller-chang");
    let draws: Vec<Result<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let x = source.sample(&mut base.stream(i as u64).rng());
            crb_of_sample(map, &x, noise_var, None)
        })
        .collect();
    let mut values = Vec::with_capacity(n_mc);
    let mut singular = 0;
    for d in draws {
        match d {
            Ok(v) => values.push(v),
            Err(Error::SingularBfim) => singular += 1,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::SingularBfim);
    }
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(McEstimate { mean, std_error, singular_draws: singular, used_draws: values.len() })
}
