use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::numerics::{haar_semiunitary, sample_gaussian_matrix, CMatrix, HermitianMatrix, C64};

/// Sensing side of the channel-estimation problem: `Y_s = H X + Z` with
/// `E{H^H H} = R_H`, `N_s` receive antennas and noise variance `s^2`.
#[derive(Debug, Clone)]
pub struct SensingProblem {
    r_h: HermitianMatrix,
    r_sqrt: HermitianMatrix,
    power: f64,
    noise_var: f64,
    rx_antennas: usize,
}

impl SensingProblem {
    pub fn new(r_h: HermitianMatrix, power: f64, noise_var: f64, rx_antennas: usize) -> Result<Self> {
        r_h.check_psd()?;
        if r_h.trace() <= 0.0 {
            return invalid("channel correlation must have a positive eigenvalue");
        }
        if !(power > 0.0 && power.is_finite()) {
            return invalid(format!("power budget must be positive, got {power}"));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return invalid(format!("sensing noise variance must be positive, got {noise_var}"));
        }
        if rx_antennas == 0 {
            return invalid("at least one receive antenna is required");
        }
        let r_sqrt = r_h.psd_sqrt();
        Ok(Self { r_h, r_sqrt, power, noise_var, rx_antennas })
    }

    /// Noise variance set from `snr_db = 10 log10(P / s^2)`.
    pub fn at_snr_db(r_h: HermitianMatrix, power: f64, snr_db: f64, rx_antennas: usize) -> Result<Self> {
        Self::new(r_h, power, power / 10f64.powf(snr_db / 10.0), rx_antennas)
    }

    pub fn r_h(&self) -> &HermitianMatrix {
        &self.r_h
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn rx_antennas(&self) -> usize {
        self.rx_antennas
    }

    pub fn tx_antennas(&self) -> usize {
        self.r_h.dim()
    }

    /// `1 / (s^2 N_s)`.
    pub fn gain(&self) -> f64 {
        1.0 / (self.noise_var * self.rx_antennas as f64)
    }

    /// Error for precoder `w` and codebook Gram matrix `a = S S^H`.
    pub fn xi(&self, w: &CMatrix, a: &HermitianMatrix) -> f64 {
        let k = self.r_sqrt.matrix() * w;
        let inner = self.inner_inverse(&k, a);
        (inner.matrix() * self.r_h.matrix()).trace().re
    }

    /// Error and its gradient `G` in `W`, normalised so that
    /// `xi(W + e D) = xi(W) + e Re tr(G^H D) + O(e^2)`.
    pub fn xi_and_gradient(&self, w: &CMatrix, a: &HermitianMatrix) -> (f64, CMatrix) {
        let l = self.r_sqrt.matrix();
        let k = l * w;
        let inv = self.inner_inverse(&k, a);
        let inv_r = inv.matrix() * self.r_h.matrix();
        let xi = inv_r.trace().re;
        let b = &inv_r * inv.matrix();
        let grad = (l * b * k * a.matrix()) * C64::new(-2.0 * self.gain(), 0.0);
        (xi, grad)
    }

    /// Batch mean of [`Self::xi_and_gradient`]; the products that do not
    /// depend on the draw are formed once.
    pub fn batch_xi_and_gradient(&self, w: &CMatrix, grams: &[HermitianMatrix]) -> (f64, CMatrix) {
        let l = self.r_sqrt.matrix();
        let k = l * w;
        let kh = k.adjoint();
        let m = k.nrows();
        let c = C64::new(self.gain(), 0.0);
        let mut xi = 0.0;
        let mut acc = CMatrix::zeros(m, m);
        for a in grams {
            let ka = &k * a.matrix();
            let n = CMatrix::identity(m, m) + &ka * &kh * c;
            let inv = HermitianMatrix::from_symmetrized(n).inverse_pd().expect("identity plus PSD is positive definite");
            let inv_r = inv.matrix() * self.r_h.matrix();
            xi += inv_r.trace().re;
            acc += inv_r * (inv.matrix() * ka);
        }
        let scale = 1.0 / grams.len() as f64;
        (xi * scale, l * acc * C64::new(-2.0 * self.gain() * scale, 0.0))
    }

    /// `(I + c K A K^H)^{-1}` with `K = R^{1/2} W`.
    fn inner_inverse(&self, k: &CMatrix, a: &HermitianMatrix) -> HermitianMatrix {
        let m = k.nrows();
        let n = CMatrix::identity(m, m) + (k * a.matrix() * k.adjoint()) * C64::new(self.gain(), 0.0);
        HermitianMatrix::from_symmetrized(n).inverse_pd().expect("identity plus PSD is positive definite")
    }
}

/// `R_H = N_s [rho^|i-j|]`, the exponential correlation model.
pub fn exponential_correlation(m: usize, rho: f64, rx_antennas: usize) -> Result<HermitianMatrix> {
    if !(0.0..1.0).contains(&rho.abs()) || m == 0 {
        return invalid(format!("correlation coefficient must satisfy |rho| < 1 (got {rho}) with M >= 1"));
    }
    let scale = rx_antennas as f64;
    Ok(HermitianMatrix::from_symmetrized(CMatrix::from_fn(m, m, |i, j| {
        C64::new(scale * rho.powi(i.abs_diff(j) as i32), 0.0)
    })))
}

/// LMMSE channel estimate `Y (X^H R X + s^2 N_s I)^{-1} X^H R`.
pub fn lmmse_estimate(ys: &CMatrix, x: &CMatrix, r_h: &HermitianMatrix, noise_var: f64, rx_antennas: usize) -> Result<CMatrix> {
    if !(noise_var > 0.0) {
        return invalid(format!("sensing noise variance must be positive, got {noise_var}"));
    }
    if x.nrows() != r_h.dim() || ys.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Y is {}x{}, X is {}x{}, R_H is {2}x{2}",
            ys.nrows(),
            ys.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let t = x.ncols();
    let xr = x.adjoint() * r_h.matrix();
    let inner = &xr * x + CMatrix::identity(t, t) * C64::new(noise_var * rx_antennas as f64, 0.0);
    let inv = HermitianMatrix::from_symmetrized(inner).inverse_pd().ok_or_else(|| Error::InvalidInput("LMMSE inner matrix is not positive definite".into()))?;
    Ok(ys * inv.matrix() * xr)
}

/// `tr[(R_H^{-1} + X X^H / (s^2 N_s))^{-1}]`, evaluated in the equivalent form
/// `tr[(I + c R^{1/2} X X^H R^{1/2})^{-1} R]` that needs no inverse of `R_H`.
pub fn lmmse_error(x: &CMatrix, r_h: &HermitianMatrix, noise_var: f64, rx_antennas: usize) -> Result<f64> {
    let problem = SensingProblem::new(r_h.clone(), 1.0, noise_var, rx_antennas)?;
    if x.nrows() != r_h.dim() {
        return Err(Error::DimensionMismatch(format!("X has {} rows, R_H is {1}x{1}", x.nrows(), r_h.dim())));
    }
    let m = x.nrows();
    Ok(problem.xi(&CMatrix::identity(m, m), &HermitianMatrix::gram(x, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    /// I.i.d. unit complex Gaussian symbols.
    Gaussian,
    /// `sqrt(T) Q` with `Q` Haar semi-unitary, so `S S^H = T I`.
    Semiunitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodebookSampler {
    pub kind: CodebookKind,
    pub m: usize,
    pub t: usize,
}

impl CodebookSampler {
    pub fn new(kind: CodebookKind, m: usize, t: usize) -> Result<Self> {
        if m == 0 || t == 0 {
            return invalid("codebook dimensions must be positive");
        }
        if kind == CodebookKind::Semiunitary && t < m {
            return invalid(format!("semi-unitary codebook needs T >= M (T = {t}, M = {m})"));
        }
        Ok(Self { kind, m, t })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        match self.kind {
            CodebookKind::Gaussian => sample_gaussian_matrix(self.m, self.t, 1.0, rng).expect("unit variance"),
            CodebookKind::Semiunitary => {
                haar_semiunitary(self.m, self.t, rng).expect("T >= M checked") * C64::new((self.t as f64).sqrt(), 0.0)
            }
        }
    }
}
