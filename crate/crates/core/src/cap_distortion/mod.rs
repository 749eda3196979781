//! Capacity-distortion tradeoff via a two-cost Blahut-Arimoto fixed point.
//!
//! The input distribution lives on a finite grid; channel states (e.g. a
//! fading coefficient) enter through quadrature weights, and rates are the
//! state-conditional mutual information `I(X; Y | state)`.

mod blahut;
mod channel;

use rayon::prelude::*;

pub use blahut::{
    ba_solve, ba_step_posterior, ba_step_reweight, mutual_information_bits, BaOptions, BaSolution, CostPair,
    GriddedDistribution, Posterior, PowerConstraint,
};
pub use channel::{BandRow, DiscreteChannelSpec, SisoGrid, StateChannel};

use crate::curve::{MetricKind, TradeoffCurve, TradeoffPoint};
use crate::error::{invalid, Result};

/// MSE of the LMMSE estimate of a unit-variance fading coefficient observed
/// through one symbol of amplitude `x` in unit noise.
pub fn siso_sensing_cost(x: f64) -> f64 {
    1.0 / (1.0 + x * x)
}

/// Expected Hamming distortion of a detector, `1 - P_D + P_FA`.
pub fn hamming_detection_distortion(p_detect: f64, p_false_alarm: f64) -> Result<f64> {
    for (name, v) in [("P_D", p_detect), ("P_FA", p_false_alarm)] {
        if !(0.0..=1.0).contains(&v) {
            return invalid(format!("{name} must lie in [0, 1], got {v}"));
        }
    }
    Ok(1.0 - p_detect + p_false_alarm)
}

/// Default sensing-multiplier schedule: zero plus a log-spaced ladder up to
/// `1e4`, where the optimum is already binary.
pub fn default_mu_schedule() -> Vec<f64> {
    let mut s = vec![0.0];
    s.extend((0..=12).map(|k| 10f64.powf(-2.0 + k as f64 * 0.5)));
    s
}

#[derive(Debug, Clone)]
pub struct CdBoundary {
    /// Rate vs expected distortion, distortion ascending.
    pub curve: TradeoffCurve,
    /// Solver output per point, in curve order.
    pub solutions: Vec<BaSolution>,
}

impl CdBoundary {
    pub fn all_converged(&self) -> bool {
        self.solutions.iter().all(|s| s.converged)
    }
}

/// Trace the capacity-distortion boundary at power budget `budget`, one
/// Blahut-Arimoto solve per sensing multiplier.
pub fn cd_boundary(
    spec: &DiscreteChannelSpec,
    costs: &CostPair,
    budget: f64,
    mu_schedule: &[f64],
    opts: &BaOptions,
) -> Result<CdBoundary> {
    if mu_schedule.is_empty() {
        return invalid("multiplier schedule is empty");
    }
    let mut solutions = mu_schedule
        .par_iter()
        .map(|&mu| ba_solve(spec, costs, PowerConstraint::Budget(budget), mu, opts))
        .collect::<Result<Vec<_>>>()?;
    solutions.sort_by(|a, b| a.avg_distortion.total_cmp(&b.avg_distortion).then(b.mu.total_cmp(&a.mu)));
    let points = solutions
        .iter()
        .map(|s| TradeoffPoint {
            rate: s.rate_bits,
            sensing_value: s.avg_distortion,
            metric_kind: MetricKind::Distortion,
            control: s.mu,
        })
        .collect();
    let curve = TradeoffCurve::new(points).with_meta("budget", budget);
    Ok(CdBoundary { curve, solutions })
}
