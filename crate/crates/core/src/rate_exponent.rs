//! Rate / detection-error-exponent regions.
//!
//! For a transmit covariance `R` the achievable pair is
//! `R = log2 det(I + H_c R H_c^H / s_c^2)` and `E = tr(H_s R H_s^H) / (4 s_s^2)`.
//! The boundary is traced by maximising `(1 - lambda) R + lambda E` over
//! `{R >= 0, tr R <= P}` for a grid of weights.

use rayon::prelude::*;

use crate::channels::{check_same_tx, point_target_channels, steering_vector, CommChannel, SensingChannel};
use crate::curve::{MetricKind, TradeoffCurve, TradeoffPoint};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    log2_det_identity_plus, minimize_over_psd, water_fill, CVector, HermitianMatrix, PgOptions, PsdObjective, C64,
};

/// Both right-hand sides of the region for covariance `cov`.
pub fn re_bound(cov: &HermitianMatrix, comm: &CommChannel, sens: &SensingChannel) -> Result<(f64, f64)> {
    let m = check_same_tx(comm, sens)?;
    if cov.dim() != m {
        return Err(Error::DimensionMismatch(format!("covariance is {0}x{0}, channels have {m} inputs", cov.dim())));
    }
    cov.check_psd()?;
    Ok(evaluate(cov, comm, sens))
}

fn evaluate(cov: &HermitianMatrix, comm: &CommChannel, sens: &SensingChannel) -> (f64, f64) {
    let rx_c = cov.congruence(comm.matrix()).scale(1.0 / comm.noise_var());
    let rate = log2_det_identity_plus(&rx_c);
    let exponent = 0.25 * cov.congruence(sens.matrix()).trace() / sens.noise_var();
    (rate, exponent.max(0.0))
}

/// `lambda` grid of `n` uniform points on `[0, 1]`.
pub fn uniform_lambda_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

fn check_lambdas(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return invalid("lambda grid is empty");
    }
    match grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        Some(l) => invalid(format!("lambda {l} outside [0, 1]")),
        None => Ok(()),
    }
}

/// Single-antenna user plus point target in front of an `elements`-array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTargetScenario {
    pub theta_c: f64,
    pub theta_s: f64,
    pub alpha_c: C64,
    pub alpha_s: C64,
    pub elements: usize,
    pub power: f64,
    pub noise_c: f64,
    pub noise_s: f64,
}

impl PointTargetScenario {
    pub fn channels(&self) -> Result<(CommChannel, SensingChannel)> {
        point_target_channels(
            self.theta_c,
            self.theta_s,
            self.alpha_c,
            self.alpha_s,
            self.elements,
            self.noise_c,
            self.noise_s,
        )
    }
}

/// Boundary sweep for the point-target scenario together with the beam
/// direction used at each weight.
#[derive(Debug, Clone)]
pub struct PointlikeSweep {
    pub curve: TradeoffCurve,
    pub beams: Vec<CVector>,
}

/// Unit beam maximising `(1 - lambda)|v^H a_c|^2 + lambda |v^H a_s|^2`.
pub fn pointlike_beam(theta_c: f64, theta_s: f64, elements: usize, lambda: f64) -> CVector {
    let ac = steering_vector(theta_c, elements);
    let as_ = steering_vector(theta_s, elements);
    let weighted = &HermitianMatrix::outer(&ac, 1.0 - lambda) + &HermitianMatrix::outer(&as_, lambda);
    weighted.eig().vectors.column(0).into_owned()
}

pub fn re_boundary_pointlike(scenario: &PointTargetScenario, lambda_grid: &[f64]) -> Result<PointlikeSweep> {
    check_lambdas(lambda_grid)?;
    if !(scenario.power > 0.0) {
        return invalid("power budget must be positive");
    }
    let (comm, sens) = scenario.channels()?;
    let results: Vec<(TradeoffPoint, CVector)> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let r = pointlike_beam(scenario.theta_c, scenario.theta_s, scenario.elements, lambda);
            let cov = HermitianMatrix::outer(&r, scenario.power);
            let (rate, exponent) = evaluate(&cov, &comm, &sens);
            let point = TradeoffPoint { rate, sensing_value: exponent, metric_kind: MetricKind::Exponent, control: lambda };
            (point, r)
        })
        .collect();
    let (points, beams) = results.into_iter().unzip();
    let curve = TradeoffCurve::new(points)
        .with_meta("scenario", "point_target")
        .with_meta("theta_c", scenario.theta_c)
        .with_meta("theta_s", scenario.theta_s);
    Ok(PointlikeSweep { curve, beams })
}

/// Capacity-achieving covariance: water-filling over the eigenmodes of
/// `H_c^H H_c / s_c^2`.
pub fn comm_optimal_covariance(comm: &CommChannel, power: f64) -> Result<HermitianMatrix> {
    let gram = HermitianMatrix::from_symmetrized(comm.matrix().adjoint() * comm.matrix()).scale(1.0 / comm.noise_var());
    let eig = gram.eig();
    let top = eig.values[0];
    let active: Vec<f64> = eig.values.iter().copied().filter(|&g| g > 1e-12 * top.max(f64::MIN_POSITIVE)).collect();
    if active.is_empty() {
        return invalid("communication channel is identically zero");
    }
    let mut alloc = water_fill(&active, power)?;
    alloc.resize(eig.values.len(), 0.0);
    let mut e = eig;
    e.values = alloc;
    Ok(e.reconstruct())
}

/// Exponent-optimal covariance: all power on the dominant eigenvector of
/// `H_s^H H_s`.
pub fn sensing_optimal_covariance(sens: &SensingChannel, power: f64) -> HermitianMatrix {
    let gram = HermitianMatrix::from_symmetrized(sens.matrix().adjoint() * sens.matrix());
    let u = gram.eig().vectors.column(0).into_owned();
    HermitianMatrix::outer(&u, power)
}

/// Negated scalarised objective, minimised by the PSD solver.
struct Scalarized<'a> {
    comm: &'a CommChannel,
    sens_gram: HermitianMatrix,
    lambda: f64,
}

impl PsdObjective for Scalarized<'_> {
    fn value(&self, x: &HermitianMatrix) -> Option<f64> {
        let rx = x.congruence(self.comm.matrix()).scale(1.0 / self.comm.noise_var());
        let rate = (&HermitianMatrix::identity(rx.dim()) + &rx).ln_det_pd()? / std::f64::consts::LN_2;
        let exponent = self.sens_gram.inner(x);
        Some(-((1.0 - self.lambda) * rate + self.lambda * exponent))
    }

    fn gradient(&self, x: &HermitianMatrix) -> HermitianMatrix {
        let h = self.comm.matrix();
        let s2 = self.comm.noise_var();
        let inner = &HermitianMatrix::identity(h.nrows()) + &x.congruence(h).scale(1.0 / s2);
        let inv = inner.inverse_pd().expect("I + PSD is positive definite");
        let d_rate = inv.congruence(&h.adjoint()).scale(1.0 / (s2 * std::f64::consts::LN_2));
        (&d_rate.scale(1.0 - self.lambda) + &self.sens_gram.scale(self.lambda)).scale(-1.0)
    }
}

/// Boundary for general channels, one projected-gradient solve per weight.
#[derive(Debug, Clone)]
pub struct GeneralSweep {
    pub curve: TradeoffCurve,
    pub covariances: Vec<HermitianMatrix>,
    /// `false` where the solver hit its iteration cap; the best iterate is kept.
    pub converged: Vec<bool>,
}

pub fn re_boundary_general(
    comm: &CommChannel,
    sens: &SensingChannel,
    power: f64,
    lambda_grid: &[f64],
    opts: PgOptions,
) -> Result<GeneralSweep> {
    let m = check_same_tx(comm, sens)?;
    check_lambdas(lambda_grid)?;
    if !(power > 0.0 && power.is_finite()) {
        return invalid(format!("power budget must be positive, got {power}"));
    }
    let sens_gram =
        HermitianMatrix::from_symmetrized(sens.matrix().adjoint() * sens.matrix()).scale(0.25 / sens.noise_var());
    let start = HermitianMatrix::scaled_identity(m, power / m as f64);

    let solved: Vec<_> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let obj = Scalarized { comm, sens_gram: sens_gram.clone(), lambda };
            let out = minimize_over_psd(&obj, &start, power, opts);
            let (rate, exponent) = evaluate(&out.x, comm, sens);
            let point = TradeoffPoint { rate, sensing_value: exponent, metric_kind: MetricKind::Exponent, control: lambda };
            (point, out.x, out.converged)
        })
        .collect();

    let mut points = Vec::with_capacity(solved.len());
    let mut covariances = Vec::with_capacity(solved.len());
    let mut converged = Vec::with_capacity(solved.len());
    for (p, x, c) in solved {
        points.push(p);
        covariances.push(x);
        converged.push(c);
    }
    Ok(GeneralSweep { curve: TradeoffCurve::new(points).with_meta("scenario", "general"), covariances, converged })
}

/// Array gain `|v^H a(theta)|^2` over a grid of angles.
pub fn beampattern(v: &CVector, theta_grid: &[f64]) -> Result<Vec<f64>> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return invalid(format!("beam vector must have unit norm, got {norm}"));
    }
    Ok(theta_grid
        .iter()
        .map(|&t| (v.adjoint() * steering_vector(t, v.len()))[(0, 0)].norm_sqr())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::CMatrix;
    use std::f64::consts::PI;

    fn scenario(theta_c: f64, theta_s: f64) -> PointTargetScenario {
        PointTargetScenario {
            theta_c,
            theta_s,
            alpha_c: C64::new(1.0, 0.0),
            alpha_s: C64::new(0.8, 0.3),
            elements: 10,
            power: 1.0,
            noise_c: 0.5,
            noise_s: 2.0,
        }
    }

    #[test]
    fn zero_covariance_gives_origin() {
        let (c, s) = scenario(0.2, 0.9).channels().unwrap();
        assert_eq!(re_bound(&HermitianMatrix::zeros(10), &c, &s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn scalar_link_is_shannon() {
        let comm = CommChannel::new(CMatrix::identity(1, 1), 1.0).unwrap();
        let sens = SensingChannel::new(CMatrix::identity(1, 1), 1.0).unwrap();
        let (r, e) = re_bound(&HermitianMatrix::from_real_diagonal(&[3.0]), &comm, &sens).unwrap();
        assert!((r - 2.0).abs() < 1e-15);
        assert!((e - 0.75).abs() < 1e-15);
    }

    #[test]
    fn endpoints_match_closed_forms() {
        let sc = scenario(0.2, -0.6);
        let (comm, sens) = sc.channels().unwrap();
        let sweep = re_boundary_pointlike(&sc, &[0.0, 1.0]).unwrap();
        let p0 = sweep.curve.points[0];
        let p1 = sweep.curve.points[1];
        assert!((p0.rate - (1.0 + comm.snr(sc.power).unwrap()).log2()).abs() < 1e-9);
        assert!((p1.sensing_value - sens.snr(sc.power).unwrap() / 4.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_psd_covariance() {
        let (c, s) = scenario(0.2, 0.9).channels().unwrap();
        let mut d = vec![0.1; 10];
        d[3] = -0.5;
        assert!(matches!(re_bound(&HermitianMatrix::from_real_diagonal(&d), &c, &s), Err(Error::NotPsd(_))));
    }

    #[test]
    fn beampattern_peaks_at_steering_angle() {
        let a = steering_vector(0.4, 6);
        let v = &a / C64::new(6f64.sqrt(), 0.0);
        let pattern = beampattern(&v, &[0.4, -1.0, 0.0, PI / 3.0]).unwrap();
        assert!((pattern[0] - 6.0).abs() < 1e-12);
        assert!(pattern.iter().all(|&g| (-1e-12..=6.0 + 1e-12).contains(&g)));
        let flat = beampattern(&CVector::from_element(1, C64::new(1.0, 0.0)), &[0.1, 1.2]).unwrap();
        assert!(flat.iter().all(|&g| (g - 1.0).abs() < 1e-15));
        assert!(beampattern(&a, &[0.0]).is_err());
    }
}
