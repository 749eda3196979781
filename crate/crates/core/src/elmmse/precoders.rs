use super::estimator::{CodebookSampler, SensingProblem};
use crate::crb_rate::RANK_TOL;
use crate::error::Result;
use crate::numerics::{frobenius_norm_sq, water_fill, CMatrix, HermitianMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderKind {
    Waterfill,
    DataDependent,
    DataIndependent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderDesign {
    pub w: CMatrix,
    pub power: f64,
    pub kind: PrecoderKind,
    /// Objective the design was optimised for: the Jensen bound for
    /// water-filling, the per-instance error for data-dependent designs and
    /// the held-out training estimate for SGD.
    pub objective: f64,
    /// Set when an independent check disagreed with the design.
    pub flagged: bool,
}

/// Error of `w` when every draw has `S S^H = T I`, the Jensen lower bound on
/// the ergodic error for codebooks with `E{S S^H} = T I`.
pub fn jensen_bound(problem: &SensingProblem, w: &CMatrix, t: usize) -> f64 {
    problem.xi(w, &HermitianMatrix::scaled_identity(problem.tx_antennas(), t as f64))
}

/// `W = sqrt(s^2 N_s / T) Q [(mu I - Lambda^{-1})^+]^{1/2}` with `mu` set by
/// the power budget; minimises the Jensen bound.
pub fn waterfill_precoder(problem: &SensingProblem, t: usize) -> Result<PrecoderDesign> {
    let eig = problem.r_h().eig();
    let m = problem.tx_antennas();
    let r = eig.rank(RANK_TOL);
    let unit = 1.0 / (problem.gain() * t as f64);
    let levels = water_fill(&eig.values[..r], problem.power() / unit)?;
    let w = CMatrix::from_fn(m, m, |i, j| if j < r { eig.vectors[(i, j)] * (unit * levels[j]).sqrt() } else { C64::new(0.0, 0.0) });
    let objective = jensen_bound(problem, &w, t);
    Ok(PrecoderDesign { w, power: problem.power(), kind: PrecoderKind::Waterfill, objective, flagged: false })
}

/// Per-mode powers minimising `sum 1/(1/l_i + c a_i p_i)` under `sum p_i = P`.
fn paired_powers(lambda: &[f64], a: &[f64], c: f64, power: f64) -> Vec<f64> {
    let alloc = |tau: f64| -> Vec<f64> {
        lambda
            .iter()
            .zip(a)
            .map(|(&l, &ai)| ((tau * (c * ai).sqrt() - 1.0 / l) / (c * ai)).max(0.0))
            .collect()
    };
    let total = |tau: f64| alloc(tau).iter().sum::<f64>();
    let mut hi = 1.0;
    while total(hi) < power {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < power {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut p = alloc(hi);
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v *= power / s);
    }
    p
}

/// Projected gradient over the Frobenius ball `||W||_F^2 <= P` with
/// Barzilai-Borwein steps and Armijo backtracking.
pub fn minimize_xi_over_ball(problem: &SensingProblem, a: &HermitianMatrix, start: &CMatrix, max_iters: usize) -> (CMatrix, f64) {
    let radius = problem.power().sqrt();
    let project = |w: CMatrix| {
        let n = frobenius_norm_sq(&w).sqrt();
        if n > radius { w * C64::new(radius / n, 0.0) } else { w }
    };
    let mut w = project(start.clone());
    let (mut f, mut g) = problem.xi_and_gradient(&w, a);
    let mut step = radius / frobenius_norm_sq(&g).sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..max_iters {
        let mut accepted = None;
        let mut s = step;
        for _ in 0..60 {
            let cand = project(&w - &g * C64::new(s, 0.0));
            let d = &cand - &w;
            let fc = problem.xi(&cand, a);
            let decrease: f64 = g.iter().zip(d.iter()).map(|(gi, di)| (gi.conj() * di).re).sum();
            if fc <= f + 1e-4 * decrease {
                accepted = Some((cand, fc, d));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, fc, d)) = accepted else { break };
        let (_, gc) = problem.xi_and_gradient(&cand, a);
        let y = &gc - &g;
        let sy: f64 = d.iter().zip(y.iter()).map(|(di, yi)| (di.conj() * yi).re).sum();
        let ss = frobenius_norm_sq(&d);
        step = if sy > 0.0 { ss / sy } else { s * 2.0 };
        let moved = ss.sqrt() <= 1e-12 * radius;
        let rel = (f - fc).abs() <= 1e-15 * f.abs();
        w = cand;
        f = fc;
        g = gc;
        if moved || rel {
            break;
        }
    }
    (w, f)
}

/// Iteration cap of the projected-gradient cross-check.
pub const ORACLE_ITERS: usize = 400;

/// Minimiser of the per-instance error for a known codebook draw `s`.
///
/// The structured solution aligns `W S S^H W^H` with the eigenvectors of
/// `R_H`, pairs the strongest channel mode with the strongest codebook mode
/// and solves the remaining scalar power allocation by bisection. When
/// `certify` is set a projected-gradient run from the water-filling precoder
/// checks it; if the check finds a better point by more than `1e-6`
/// relative, that point is returned and the design is flagged.
pub fn data_dependent_precoder(problem: &SensingProblem, s: &CMatrix, certify: bool) -> Result<PrecoderDesign> {
    let a = HermitianMatrix::gram(s, 1.0);
    let r_eig = problem.r_h().eig();
    let a_eig = a.eig();
    let n = r_eig.rank(RANK_TOL).min(a_eig.rank(RANK_TOL));
    let m = problem.tx_antennas();
    let powers = paired_powers(&r_eig.values[..n], &a_eig.values[..n], problem.gain(), problem.power());
    let mut w = CMatrix::zeros(m, m);
    for (i, p) in powers.iter().enumerate() {
        let q = r_eig.vectors.column(i);
        let v = a_eig.vectors.column(i);
        w += q * v.adjoint() * C64::new(p.sqrt(), 0.0);
    }
    let mut objective = problem.xi(&w, &a);
    let mut flagged = false;
    if certify {
        let start = waterfill_precoder(problem, s.ncols())?.w;
        let (w_pg, f_pg) = minimize_xi_over_ball(problem, &a, &start, ORACLE_ITERS);
        if f_pg < objective * (1.0 - 1e-6) {
            flagged = true;
            w = w_pg;
            objective = f_pg;
        }
    }
    Ok(PrecoderDesign { w, power: problem.power(), kind: PrecoderKind::DataDependent, objective, flagged })
}

/// Draw-count and step settings of the offline SGD design.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub batch: usize,
    pub iterations: usize,
    /// Candidate step constants `c` of the schedule `c / sqrt(t)`, in units
    /// of `||W_0||_F / ||grad_0||_F` at the water-filling start.
    pub step_grid: Vec<f64>,
    /// Length of the pilot runs that pick the step constant.
    pub pilot_iterations: usize,
    /// Held-out draws used to pick the step constant and checkpoints.
    pub validation_draws: usize,
    pub checkpoint_every: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { batch: 16, iterations: 20_000, step_grid: vec![0.03, 0.1, 0.3], pilot_iterations: 2_000, validation_draws: 256, checkpoint_every: 500 }
    }
}

/// Outcome of the data-independent design, with the tuning that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    pub design: PrecoderDesign,
    pub step_constant: f64,
    /// Best held-out error of each pilot run, in step-grid order.
    pub validation_by_step: Vec<f64>,
    pub start_validation: f64,
}

pub(crate) fn sampler_is_consistent(problem: &SensingProblem, sampler: &CodebookSampler) -> bool {
    sampler.m == problem.tx_antennas()
}
