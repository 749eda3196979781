use crate::error::{invalid, Result};

/// Bisection tolerance on the water level.
const MU_TOL: f64 = 1e-12;

/// Water-filling allocation `p_i = max(mu - 1/g_i, 0)` with `sum p_i = budget`.
///
/// The water level is bracketed by bisection; once the active set is known
/// the level is recomputed in closed form on that set so the budget holds to
/// rounding.
pub fn water_fill(gains: &[f64], budget: f64) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return invalid("water_fill: empty gain list");
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return invalid(format!("water_fill: gains must be positive and finite, got {g}"));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return invalid(format!("water_fill: budget must be positive, got {budget}"));
    }

    let floors: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    let filled = |mu: f64| floors.iter().map(|f| (mu - f).max(0.0)).sum::<f64>();

    let mut lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = lo + budget;
    while filled(hi) < budget {
        hi += budget;
    }
    while hi - lo > MU_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if filled(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut mu = 0.5 * (lo + hi);
    for _ in 0..gains.len() {
        let active: Vec<f64> = floors.iter().copied().filter(|&f| f < mu).collect();
        let exact = (budget + active.iter().sum::<f64>()) / active.len() as f64;
        let same_set = floors.iter().all(|&f| (f < mu) == (f < exact));
        mu = exact;
        if same_set {
            break;
        }
    }
    Ok(floors.iter().map(|f| (mu - f).max(0.0)).collect())
}
