//! Spectral projected gradient over `{X >= 0, tr X <= P}` (or `tr X = P`).

use super::hermitian::HermitianMatrix;

/// Smooth objective to be minimised over the PSD cone.
pub trait PsdObjective {
    /// Objective value, or `None` where it is undefined (e.g. a singular
    /// information matrix). Undefined points are rejected by the line search.
    fn value(&self, x: &HermitianMatrix) -> Option<f64>;
    /// Euclidean gradient with respect to the real inner product `Re tr(A B)`.
    fn gradient(&self, x: &HermitianMatrix) -> HermitianMatrix;
}

#[derive(Debug, Clone, Copy)]
pub struct PgOptions {
    pub max_iters: usize,
    /// Stop once an accepted step moves the iterate less than `x_tol * budget`
    /// in Frobenius norm.
    pub x_tol: f64,
    /// Project onto `tr X = budget` instead of `tr X <= budget`.
    pub trace_equality: bool,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self { max_iters: 5000, x_tol: 1e-10, trace_equality: false }
    }
}

#[derive(Debug, Clone)]
pub struct PgOutcome {
    pub x: HermitianMatrix,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection of `v` onto `{p >= 0, sum p = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - total) / (k as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Frobenius-nearest point of `{X >= 0, tr X <= budget}` (or `= budget`).
pub fn project_psd_trace(x: &HermitianMatrix, budget: f64, equality: bool) -> HermitianMatrix {
    let eig = x.eig();
    let clipped: Vec<f64> = eig.values.iter().map(|l| l.max(0.0)).collect();
    let values = if equality || clipped.iter().sum::<f64>() > budget {
        project_simplex(&eig.values, budget)
    } else {
        clipped
    };
    let mut e = eig;
    e.values = values;
    e.reconstruct()
}

/// Minimise `obj` from `x0` by projected gradient with Barzilai-Borwein step
/// lengths and an Armijo backtracking safeguard.
pub fn minimize_over_psd<O: PsdObjective + ?Sized>(
    obj: &O,
    x0: &HermitianMatrix,
    budget: f64,
    opts: PgOptions,
) -> PgOutcome {
    let project = |m: &HermitianMatrix| project_psd_trace(m, budget, opts.trace_equality);
    let mut x = project(x0);
    let Some(mut f) = obj.value(&x) else {
        return PgOutcome { value: f64::INFINITY, x, iterations: 0, converged: false };
    };
    let mut g = obj.gradient(&x);
    let gnorm = g.frobenius_norm();
    let mut step = if gnorm > 0.0 { budget / gnorm } else { 1.0 };
    let tol = opts.x_tol * budget.max(f64::MIN_POSITIVE);

    for it in 0..opts.max_iters {
        let mut accepted = None;
        let mut trial = step;
        for _ in 0..60 {
            let y = project(&(&x - &g.scale(trial)));
            let d = &y - &x;
            if d.frobenius_norm() <= tol {
                return PgOutcome { x, value: f, iterations: it, converged: true };
            }
            if let Some(fy) = obj.value(&y) {
                if fy <= f + 1e-4 * g.inner(&d) {
                    accepted = Some((y, fy, d));
                    break;
                }
            }
            trial *= 0.5;
        }
        let Some((y, fy, s)) = accepted else {
            // The line search cannot make progress at working precision.
            return PgOutcome { x, value: f, iterations: it, converged: true };
        };
        let gy = obj.gradient(&y);
        let yv = &gy - &g;
        let sy = s.inner(&yv);
        let ss = s.inner(&s);
        step = if sy > 0.0 { ss / sy } else { trial * 2.0 };
        let moved = ss.sqrt();
        x = y;
        f = fy;
        g = gy;
        if moved <= tol {
            return PgOutcome { x, value: f, iterations: it + 1, converged: true };
        }
    }
    PgOutcome { x, value: f, iterations: opts.max_iters, converged: false }
}
