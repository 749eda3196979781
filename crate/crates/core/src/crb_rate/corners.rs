use std::f64::consts::{LN_2, PI};

use super::bfim::{trace_inverse, BfimMap};
use super::ensemble::{miller_chang_crb, EnsembleKind, McEstimate, SignalEnsemble, RANK_TOL};
use crate::channels::CommChannel;
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    ln_gamma, minimize_over_psd, sample_gaussian_matrix, HermitianMatrix, PgOptions, PsdObjective, SeededRng,
};
use crate::rate_exponent::comm_optimal_covariance;

/// How the communication channel is modelled at the corner points.
#[derive(Debug, Clone)]
pub enum CommModel {
    /// Known deterministic channel.
    Fixed(CommChannel),
    /// `H_c = Z Sigma^{1/2}` with i.i.d. unit Gaussian `Z` (`rows x M`);
    /// expectations are sample averages over `samples` seeded draws.
    Ergodic { rows: usize, tx_cov: HermitianMatrix, noise_var: f64, samples: usize, rng: SeededRng },
}

impl CommModel {
    pub fn inputs(&self) -> usize {
        match self {
            CommModel::Fixed(c) => c.tx_antennas(),
            CommModel::Ergodic { tx_cov, .. } => tx_cov.dim(),
        }
    }

    /// Channel realisations over which rates are averaged.
    pub fn realizations(&self) -> Result<Vec<CommChannel>> {
        match self {
            CommModel::Fixed(c) => Ok(vec![c.clone()]),
            CommModel::Ergodic { rows, tx_cov, noise_var, samples, rng } => {
                if *samples == 0 || *rows == 0 {
                    return invalid("ergodic model needs at least one sample and one receive antenna");
                }
                tx_cov.check_psd()?;
                let root = tx_cov.psd_sqrt();
                let base = rng.fork("channel-draws");
                (0..*samples)
                    .map(|s| {
                        let z = sample_gaussian_matrix(*rows, tx_cov.dim(), 1.0, &mut base.stream(s as u64).rng())?;
                        CommChannel::new(z * root.matrix(), *noise_var)
                    })
                    .collect()
            }
        }
    }
}

/// Average `-log2 det(I + H R H^H / s^2)` over channel draws.
struct NegErgodicRate<'a> {
    channels: &'a [CommChannel],
}

impl PsdObjective for NegErgodicRate<'_> {
    fn value(&self, x: &HermitianMatrix) -> Option<f64> {
        let mut total = 0.0;
        for c in self.channels {
            let a = x.congruence(c.matrix()).scale(1.0 / c.noise_var());
            total += (&HermitianMatrix::identity(a.dim()) + &a).ln_det_pd()?;
        }
        Some(-total / (self.channels.len() as f64 * LN_2))
    }

    fn gradient(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let m = x.dim();
        let mut acc = HermitianMatrix::zeros(m);
        for c in self.channels {
            let h = c.matrix();
            let inner = &HermitianMatrix::identity(h.nrows()) + &x.congruence(h).scale(1.0 / c.noise_var());
            let inv = inner.inverse_pd().expect("I + PSD is positive definite");
            acc = &acc + &inv.congruence(&h.adjoint()).scale(1.0 / c.noise_var());
        }
        acc.scale(-1.0 / (self.channels.len() as f64 * LN_2))
    }
}

fn mean_rate_bits(cov: &HermitianMatrix, channels: &[CommChannel]) -> f64 {
    let total: f64 = channels
        .iter()
        .map(|c| crate::numerics::log2_det_identity_plus(&cov.congruence(c.matrix()).scale(1.0 / c.noise_var())))
        .sum();
    total / channels.len() as f64
}

/// Rate-maximising covariance under `tr R <= P`, and the rate it achieves.
pub fn capacity_covariance(comm: &CommModel, power: f64) -> Result<(HermitianMatrix, f64)> {
    if !(power > 0.0 && power.is_finite()) {
        return invalid(format!("power budget must be positive, got {power}"));
    }
    let channels = comm.realizations()?;
    let cov = match comm {
        CommModel::Fixed(c) => comm_optimal_covariance(c, power)?,
        CommModel::Ergodic { .. } => {
            let m = comm.inputs();
            let start = HermitianMatrix::scaled_identity(m, power / m as f64);
            let out = minimize_over_psd(&NegErgodicRate { channels: &channels }, &start, power, PgOptions::default());
            if !out.converged {
                return Err(Error::Diverged("ergodic rate maximisation hit its iteration cap".into()));
            }
            out.x
        }
    };
    let rate = mean_rate_bits(&cov, &channels);
    Ok((cov, rate))
}

/// Communication-optimal corner: Gaussian signalling on the capacity
/// covariance, with its Monte Carlo CRB and the two analytic bounds.
#[derive(Debug, Clone)]
pub struct PcsPoint {
    pub rate_bits: f64,
    pub cov_cs: HermitianMatrix,
    pub rank: usize,
    pub eps_mc: McEstimate,
    /// Jensen bound `(s^2/T) tr Phi(R_cs)^{-1}`.
    pub eps_lower: f64,
    /// Degrees-of-freedom-loss bound `eps_lower * T / (T - min(K, rank))`.
    pub eps_upper: f64,
    /// Monte Carlo mean within the bounds up to three standard errors.
    pub within_bounds: bool,
}

pub fn pcs_point(
    map: &BfimMap,
    comm: &CommModel,
    power: f64,
    noise_s: f64,
    t: usize,
    n_mc: usize,
    rng: SeededRng,
) -> Result<PcsPoint> {
    if comm.inputs() != map.inputs() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} transmit antennas, BFIM map expects {}",
            comm.inputs(),
            map.inputs()
        )));
    }
    if !(noise_s > 0.0) {
        return invalid(format!("sensing noise variance must be positive, got {noise_s}"));
    }
    let (cov_cs, rate_bits) = capacity_covariance(comm, power)?;
    let rank = cov_cs.eig().rank(RANK_TOL);
    let dof = map.params().min(rank);
    if t <= dof {
        return Err(Error::Undefined(format!("DoF-loss bound undefined: T = {t} <= min(K, M_CS) = {dof}")));
    }
    let eps_lower = noise_s / t as f64 * trace_inverse(&map.apply(&cov_cs)?)?;
    let eps_upper = eps_lower * t as f64 / (t - dof) as f64;
    let ens = SignalEnsemble::new(EnsembleKind::GaussianCs, &cov_cs, t)?;
    let eps_mc = miller_chang_crb(map, &ens, noise_s, n_mc, rng)?;
    let slack = 3.0 * eps_mc.std_error;
    let within_bounds = eps_mc.mean >= eps_lower - slack && eps_mc.mean <= eps_upper + slack;
    Ok(PcsPoint { rate_bits, cov_cs, rank, eps_mc, eps_lower, eps_upper, within_bounds })
}

/// `tr (Phi(R) + ridge I)^{-1}` and its gradient `-Phi*(Phi^{-2})`.
pub struct CrbObjective<'a> {
    pub map: &'a BfimMap,
    pub ridge: f64,
}

impl CrbObjective<'_> {
    fn information(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let phi = self.map.apply(x).expect("dimension checked by caller");
        if self.ridge > 0.0 {
            &phi + &HermitianMatrix::scaled_identity(phi.dim(), self.ridge)
        } else {
            phi
        }
    }
}

impl PsdObjective for CrbObjective<'_> {
    fn value(&self, x: &HermitianMatrix) -> Option<f64> {
        trace_inverse(&self.information(x)).ok()
    }

    fn gradient(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let inv = self.information(x).eig().map_values(|l| 1.0 / (l * l));
        self.map.adjoint(&inv).scale(-1.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PscOptions {
    pub restarts: usize,
    pub pg: PgOptions,
}

impl Default for PscOptions {
    fn default() -> Self {
        Self { restarts: 5, pg: PgOptions::default() }
    }
}

/// Sensing-optimal corner of the CRB-rate region.
#[derive(Debug, Clone)]
pub struct PscPoint {
    pub cov_sc: HermitianMatrix,
    /// `(s^2 / T) tr Phi(R_sc)^{-1}`.
    pub eps_min: f64,
    pub rank: usize,
    /// Normalised KKT residual of the returned covariance.
    pub kkt_residual: f64,
    /// Final objective `tr Phi^{-1}` of every restart, in restart order.
    pub restart_values: Vec<f64>,
    /// The start point had a singular BFIM and ridge continuation was used.
    pub ridge_continuation: bool,
    pub converged: bool,
}

impl PscPoint {
    /// Largest spread between restart objectives, relative to the best.
    pub fn restart_spread(&self) -> f64 {
        let lo = self.restart_values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.restart_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo.abs().max(f64::MIN_POSITIVE)
    }
}

fn random_start(m: usize, power: f64, rng: SeededRng) -> Result<HermitianMatrix> {
    let g = sample_gaussian_matrix(m, m, 1.0, &mut rng.rng())?;
    let w = HermitianMatrix::gram(&g, 1.0);
    Ok(w.scale(power / w.trace()))
}

/// Minimise from `start`, routing through a ridge path (`1e-6 -> 0`) when
/// the start point has a singular BFIM.
fn solve_from(map: &BfimMap, start: &HermitianMatrix, power: f64, pg: PgOptions) -> Result<(HermitianMatrix, f64, bool, bool)> {
    let plain = CrbObjective { map, ridge: 0.0 };
    if plain.value(start).is_some() {
        let out = minimize_over_psd(&plain, start, power, pg);
        return Ok((out.x, out.value, false, out.converged));
    }
    let mut x = start.clone();
    for ridge in [1e-6, 1e-8, 1e-10] {
        x = minimize_over_psd(&CrbObjective { map, ridge }, &x, power, pg).x;
    }
    if plain.value(&x).is_none() {
        return Err(Error::SingularBfim);
    }
    let out = minimize_over_psd(&plain, &x, power, pg);
    Ok((out.x, out.value, true, out.converged))
}

/// Drop eigenvalues below `RANK_TOL` of the largest.
fn clean_rank(cov: &HermitianMatrix) -> HermitianMatrix {
    let eig = cov.eig();
    let top = eig.values.first().copied().unwrap_or(0.0);
    eig.map_values(|l| if l > RANK_TOL * top { l } else { 0.0 })
}

/// KKT residual of `min tr Phi^{-1}` s.t. `R >= 0`, `tr R <= P`, normalised
/// by the multiplier term `nu tr R`.
pub fn psc_kkt_residual(map: &BfimMap, cov: &HermitianMatrix) -> f64 {
    let obj = CrbObjective { map, ridge: 0.0 };
    let g = obj.gradient(cov);
    let tr = cov.trace();
    let nu = if tr > 0.0 { -g.inner(cov) / tr } else { 0.0 };
    let z = &g + &HermitianMatrix::scaled_identity(cov.dim(), nu);
    let comp = (z.matrix() * cov.matrix()).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let dual = (-z.min_eigenvalue()).max(0.0) * tr;
    let scale = (nu.abs() * tr).max(g.frobenius_norm() * tr).max(f64::MIN_POSITIVE);
    comp.max(dual) / scale
}

pub fn psc_point(
    map: &BfimMap,
    power: f64,
    noise_s: f64,
    t: usize,
    opts: PscOptions,
    rng: SeededRng,
) -> Result<PscPoint> {
    if !(power > 0.0 && power.is_finite()) {
        return invalid(format!("power budget must be positive, got {power}"));
    }
    if !(noise_s > 0.0) || t == 0 {
        return invalid("sensing noise variance and block length must be positive");
    }
    let m = map.inputs();
    let base = rng.fork("psc-restarts");
    let mut best: Option<(HermitianMatrix, f64)> = None;
    let mut restart_values = Vec::new();
    let mut ridge_continuation = false;
    let mut converged = true;
    for k in 0..opts.restarts.max(1) {
        let start = if k == 0 {
            HermitianMatrix::scaled_identity(m, power / m as f64)
        } else {
            random_start(m, power, base.stream(k as u64))?
        };
        let (x, value, ridged, ok) = solve_from(map, &start, power, opts.pg)?;
        ridge_continuation |= ridged;
        converged &= ok;
        restart_values.push(value);
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((x, value));
        }
    }
    let (x, _) = best.expect("at least one restart");
    let cov_sc = clean_rank(&x);
    let eps_min = noise_s / t as f64 * trace_inverse(&map.apply(&cov_sc)?)?;
    Ok(PscPoint {
        rank: cov_sc.eig().rank(RANK_TOL),
        kkt_residual: psc_kkt_residual(map, &cov_sc),
        cov_sc,
        eps_min,
        restart_values,
        ridge_continuation,
        converged,
    })
}

/// Finite-`T` correction of the semi-unitary rate, in nats.
pub fn c0_nats(rank: usize, t: usize) -> f64 {
    if rank == 0 {
        return 0.0;
    }
    let (m, t) = (rank as f64, t as f64);
    m / t * ((t - m / 2.0) * (t / std::f64::consts::E).ln() - ln_gamma(t) + (2.0 * PI.sqrt()).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PscRate {
    pub rate_bits: f64,
    pub c0_nats: f64,
    pub rank: usize,
    /// Some `H_c R H_c^H` was rank deficient; its pseudo-determinant was used.
    pub pseudo_det: bool,
    /// Some nonzero eigenvalue of `H_c R H_c^H / s^2` was below 10, outside
    /// the high-SNR regime the expression assumes.
    pub low_snr: bool,
}

/// High-SNR rate of semi-unitary signalling on `cov_sc`, averaged over the
/// given channel realisations.
pub fn psc_rate(cov_sc: &HermitianMatrix, channels: &[CommChannel], t: usize) -> Result<PscRate> {
    if channels.is_empty() {
        return invalid("at least one channel realisation is required");
    }
    cov_sc.check_psd()?;
    let rank = cov_sc.eig().rank(RANK_TOL);
    if rank == 0 {
        return Ok(PscRate { rate_bits: 0.0, c0_nats: 0.0, rank, pseudo_det: false, low_snr: false });
    }
    if t < rank {
        return invalid(format!("semi-unitary signalling needs T >= rank ({t} < {rank})"));
    }
    let c0 = c0_nats(rank, t);
    let prefactor = 1.0 - rank as f64 / (2.0 * t as f64);
    let mut pseudo_det = false;
    let mut low_snr = false;
    let mut total = 0.0;
    for c in channels {
        if c.tx_antennas() != cov_sc.dim() {
            return Err(Error::DimensionMismatch("channel and covariance sizes differ".into()));
        }
        let a = cov_sc.congruence(c.matrix()).scale(1.0 / c.noise_var());
        let eig = a.eig();
        let top = eig.values[0];
        let nonzero: Vec<f64> = eig.values.iter().copied().filter(|&l| l > RANK_TOL * top && l > 0.0).collect();
        pseudo_det |= nonzero.len() < a.dim();
        low_snr |= nonzero.iter().any(|&l| l < 10.0);
        let log_det: f64 = nonzero.iter().map(|l| l.ln()).sum();
        total += prefactor * log_det + c0;
    }
    Ok(PscRate { rate_bits: total / channels.len() as f64 / LN_2, c0_nats: c0, rank, pseudo_det, low_snr })
}
