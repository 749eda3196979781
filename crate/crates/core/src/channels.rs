//! Channel objects and the SNR convention shared by every analysis.
//!
//! Arrays are uniform linear with half-wavelength spacing, and angles are
//! measured from broadside, so `a(0)` is the all-ones vector.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::numerics::{frobenius_norm_sq, CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteeringConfig {
    pub elements: usize,
}

impl SteeringConfig {
    pub fn new(elements: usize) -> Result<Self> {
        if elements == 0 {
            return invalid("array needs at least one element");
        }
        Ok(Self { elements })
    }

    pub fn steer(&self, theta: f64) -> CVector {
        steering_vector(theta, self.elements)
    }
}

/// `a(theta)_k = exp(j pi k sin theta)` for `k = 0..n`.
pub fn steering_vector(theta: f64, n: usize) -> CVector {
    let phase = PI * theta.sin();
    CVector::from_fn(n, |k, _| C64::from_polar(1.0, phase * k as f64))
}

fn check_channel(h: &CMatrix, noise_var: f64, what: &str) -> Result<()> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return invalid(format!("{what} channel must have at least one row and column"));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return invalid(format!("{what} channel has non-finite entries"));
    }
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return invalid(format!("{what} noise variance must be positive, got {noise_var}"));
    }
    Ok(())
}

/// Receive SNR `P ||H||_F^2 / sigma^2`.
pub fn snr(h: &CMatrix, noise_var: f64, power: f64) -> Result<f64> {
    if !(noise_var > 0.0) {
        return invalid(format!("noise variance must be positive, got {noise_var}"));
    }
    if !(power > 0.0) {
        return invalid(format!("power must be positive, got {power}"));
    }
    Ok(power * frobenius_norm_sq(h) / noise_var)
}

/// Communication link `Y_c = H_c X + Z_c`, `H_c` of size `N_c x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommChannel {
    h: CMatrix,
    noise_var: f64,
}

impl CommChannel {
    pub fn new(h: CMatrix, noise_var: f64) -> Result<Self> {
        check_channel(&h, noise_var, "communication")?;
        Ok(Self { h, noise_var })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn tx_antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn snr(&self, power: f64) -> Result<f64> {
        snr(&self.h, self.noise_var, power)
    }
}

/// Sensing return `Y_s = H_s X + Z_s`, `H_s` of size `N_s x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingChannel {
    h: CMatrix,
    noise_var: f64,
}

impl SensingChannel {
    pub fn new(h: CMatrix, noise_var: f64) -> Result<Self> {
        check_channel(&h, noise_var, "sensing")?;
        Ok(Self { h, noise_var })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn tx_antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn snr(&self, power: f64) -> Result<f64> {
        snr(&self.h, self.noise_var, power)
    }
}

/// Single-antenna user at `theta_c` and a point target at `theta_s`, both
/// seen by an `n`-element array: `H_c = alpha_c a^H(theta_c)` and
/// `H_s = alpha_s a(theta_s) a^H(theta_s)`.
pub fn point_target_channels(
    theta_c: f64,
    theta_s: f64,
    alpha_c: C64,
    alpha_s: C64,
    n: usize,
    noise_c: f64,
    noise_s: f64,
) -> Result<(CommChannel, SensingChannel)> {
    let cfg = SteeringConfig::new(n)?;
    let ac = cfg.steer(theta_c);
    let as_ = cfg.steer(theta_s);
    let hc = CMatrix::from_fn(1, n, |_, k| ac[k].conj() * alpha_c);
    let hs = &as_ * as_.adjoint() * alpha_s;
    let comm = CommChannel::new(hc, noise_c)?;
    let sens = SensingChannel::new(hs, noise_s)?;
    Ok((comm, sens))
}

/// Same transmit dimension on both links.
pub(crate) fn check_same_tx(comm: &CommChannel, sens: &SensingChannel) -> Result<usize> {
    if comm.tx_antennas() != sens.tx_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "communication channel has {} transmit antennas, sensing channel {}",
            comm.tx_antennas(),
            sens.tx_antennas()
        )));
    }
    Ok(comm.tx_antennas())
}
