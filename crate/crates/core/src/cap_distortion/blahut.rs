use nalgebra::DMatrix;

use super::channel::DiscreteChannelSpec;
use crate::error::{invalid, Error, Result};


/// Probability mass on the input grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDistribution {
    mass: Vec<f64>,
}

impl GriddedDistribution {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return invalid("distribution needs at least one point");
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return invalid("probability mass must be nonnegative and finite");
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return invalid(format!("probability mass sums to {total}"));
        }
        Ok(Self { mass })
    }

    pub fn uniform(n: usize) -> Self {
        Self { mass: vec![1.0 / n as f64; n] }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.mass.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Raw moment `E[X^k]` over `grid`.
    pub fn moment(&self, grid: &[f64], k: i32) -> f64 {
        self.mass.iter().zip(grid).map(|(p, x)| p * x.powi(k)).sum()
    }
}

/// Per-input power cost `b(x)` and sensing cost `c(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPair {
    pub power: Vec<f64>,
    pub sensing: Vec<f64>,
}

impl CostPair {
    pub fn evaluate(grid: &[f64], b: impl Fn(f64) -> f64, c: impl Fn(f64) -> f64) -> Result<Self> {
        let power: Vec<f64> = grid.iter().map(|&x| b(x)).collect();
        let sensing: Vec<f64> = grid.iter().map(|&x| c(x)).collect();
        if power.iter().chain(&sensing).any(|v| !v.is_finite()) {
            return invalid("costs must be finite on the input grid");
        }
        Ok(Self { power, sensing })
    }

    /// `b(x) = x^2` and the fading-coefficient MSE `c(x) = 1 / (1 + x^2)`.
    pub fn siso(grid: &[f64]) -> Self {
        Self {
            power: grid.iter().map(|x| x * x).collect(),
            sensing: grid.iter().map(|&x| super::siso_sensing_cost(x)).collect(),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self { power: vec![0.0; n], sensing: vec![0.0; n] }
    }
}

/// Backward channel `q(x | y, state)`: one `inputs x outputs` matrix per
/// state, each column a distribution over inputs.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub per_state: Vec<DMatrix<f64>>,
    /// `(state, output)` nodes with zero marginal; their column is uniform.
    pub flagged: Vec<(usize, usize)>,
}

/// Output marginal `p(y | state) = sum_x p(x) P(y | x, state)`.
fn output_marginal(spec: &DiscreteChannelSpec, state: usize, p: &[f64], out: &mut Vec<f64>) {
    let s = &spec.states[state];
    out.clear();
    out.resize(s.outputs, 0.0);
    for (row, &px) in s.rows.iter().zip(p) {
        if px == 0.0 {
            continue;
        }
        for (acc, &v) in out[row.start..row.start + row.values.len()].iter_mut().zip(&row.values) {
            *acc += px * v;
        }
    }
}

pub fn ba_step_posterior(p: &GriddedDistribution, spec: &DiscreteChannelSpec) -> Result<Posterior> {
    let n = spec.inputs();
    if p.mass.len() != n {
        return invalid(format!("distribution has {} points, channel has {n} inputs", p.mass.len()));
    }
    let mut py = Vec::new();
    let mut flagged = Vec::new();
    let mut per_state = Vec::with_capacity(spec.states.len());
    for (si, s) in spec.states.iter().enumerate() {
        output_marginal(spec, si, &p.mass, &mut py);
        let mut q = DMatrix::zeros(n, s.outputs);
        for (x, row) in s.rows.iter().enumerate() {
            for (k, &v) in row.values.iter().enumerate() {
                let y = row.start + k;
                if py[y] > 0.0 {
                    q[(x, y)] = p.mass[x] * v / py[y];
                }
            }
        }
        for (y, &m) in py.iter().enumerate() {
            if m <= 0.0 {
                flagged.push((si, y));
                q.column_mut(y).fill(1.0 / n as f64);
            }
        }
        per_state.push(q);
    }
    Ok(Posterior { per_state, flagged })
}

/// Normalised `exp(t)` computed with max subtraction.
fn softmax(t: &[f64]) -> Vec<f64> {
    let top = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut r: Vec<f64> = t.iter().map(|&v| if v == f64::NEG_INFINITY { 0.0 } else { (v - top).exp() }).collect();
    let s: f64 = r.iter().sum();
    r.iter_mut().for_each(|v| *v /= s);
    r
}

pub fn ba_step_reweight(
    q: &Posterior,
    spec: &DiscreteChannelSpec,
    lambda: f64,
    mu: f64,
    costs: &CostPair,
) -> Result<GriddedDistribution> {
    check_multipliers(lambda, mu)?;
    check_costs(spec, costs)?;
    let n = spec.inputs();
    let mut t = vec![0.0; n];
    for (s, qs) in spec.states.iter().zip(&q.per_state) {
        for (x, row) in s.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (k, &v) in row.values.iter().enumerate() {
                if v > 0.0 {
                    acc += v * qs[(x, row.start + k)].ln();
                }
            }
            t[x] += s.weight * acc;
        }
    }
    for x in 0..n {
        t[x] -= lambda * costs.power[x] + mu * costs.sensing[x];
        if t[x].is_nan() {
            t[x] = f64::NEG_INFINITY;
        }
    }
    if t.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::Diverged("every input has zero posterior weight".into()));
    }
    GriddedDistribution::new(softmax(&t))
}

fn check_multipliers(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0 && mu >= 0.0 && lambda.is_finite() && mu.is_finite()) {
        return invalid(format!("multipliers must be nonnegative, got lambda={lambda}, mu={mu}"));
    }
    Ok(())
}

fn check_costs(spec: &DiscreteChannelSpec, costs: &CostPair) -> Result<()> {
    if costs.power.len() != spec.inputs() || costs.sensing.len() != spec.inputs() {
        return invalid("cost vectors must match the input grid");
    }
    Ok(())
}

/// `sum_state w sum_y P(y|x) ln(P(y|x) / p(y))` per input, in nats.
/// Entries with zero input mass are left at zero.
fn information_density(spec: &DiscreteChannelSpec, p: &[f64], out: &mut [f64], py: &mut Vec<f64>) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (si, s) in spec.states.iter().enumerate() {
        output_marginal(spec, si, p, py);
        for v in py.iter_mut() {
            *v = if *v > 0.0 { v.ln() } else { 0.0 };
        }
        for (x, row) in s.rows.iter().enumerate() {
            if p[x] == 0.0 {
                continue;
            }
            let cross: f64 =
                row.values.iter().zip(&py[row.start..row.start + row.values.len()]).map(|(v, l)| v * l).sum();
            out[x] += s.weight * (s.neg_entropy[x] - cross);
        }
    }
}

/// Conditional mutual information `I(X; Y | state)` in bits.
pub fn mutual_information_bits(spec: &DiscreteChannelSpec, p: &GriddedDistribution) -> f64 {
    let mut d = vec![0.0; spec.inputs()];
    information_density(spec, &p.mass, &mut d, &mut Vec::new());
    p.expectation(&d) / std::f64::consts::LN_2
}

/// How the power cost enters the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerConstraint {
    /// Fixed multiplier on `E[b(X)]`.
    Multiplier(f64),
    /// Enforce `E[b(X)] <= B`, with the multiplier solved at every step.
    Budget(f64),
}

#[derive(Debug, Clone)]
pub struct BaOptions {
    /// Relative change of the objective that counts as converged.
    pub tol: f64,
    pub max_iters: usize,
    pub initial: Option<GriddedDistribution>,
    /// Largest over-relaxation factor tried on the tilt step; 1 gives the
    /// plain Blahut-Arimoto iteration.
    pub max_over_relaxation: f64,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 10_000, initial: None, max_over_relaxation: 16.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BaSolution {
    pub rate_bits: f64,
    pub avg_power: f64,
    pub avg_distortion: f64,
    pub distribution: GriddedDistribution,
    /// Power multiplier in effect at the final step (per nat).
    pub lambda: f64,
    /// Sensing multiplier (per nat).
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective `I - mu E[c] - lambda E[b]` (nats; the power term only for a
    /// fixed multiplier) after every reweighting step.
    pub objective_history: Vec<f64>,
}

impl BaSolution {
    /// Largest decrease between consecutive objective values.
    pub fn max_objective_drop(&self) -> f64 {
        self.objective_history.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

fn is_mirror_symmetric(v: &[f64]) -> bool {
    let n = v.len();
    (0..n / 2).all(|i| v[i] == v[n - 1 - i])
}

/// Exponential tilt `r ∝ exp(g - lambda b)` with `lambda >= 0` chosen so that
/// `E_r[b] <= budget`, with equality whenever the constraint binds.
fn tilt_to_budget(g: &[f64], b: &[f64], budget: f64) -> (Vec<f64>, f64) {
    let tilt = |l: f64| {
        let t: Vec<f64> = g.iter().zip(b).map(|(gi, bi)| gi - l * bi).collect();
        let r = softmax(&t);
        let e: f64 = r.iter().zip(b).map(|(ri, bi)| ri * bi).sum();
        (r, e)
    };
    let (r0, e0) = tilt(0.0);
    if e0 <= budget {
        return (r0, 0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while tilt(hi).1 > budget {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-14 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tilt(mid).1 > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (tilt(hi).0, hi)
}

/// Two-cost Blahut-Arimoto iteration.
///
/// Each sweep fuses the posterior and reweighting steps:
/// `ln r(x) = ln p(x) + D(x) - lambda b(x) - mu c(x) + const`, where `D` is the
/// state-averaged information density, which equals the expected log
/// posterior up to `ln p(x)`.
pub fn ba_solve(
    spec: &DiscreteChannelSpec,
    costs: &CostPair,
    power: PowerConstraint,
    mu: f64,
    opts: &BaOptions,
) -> Result<BaSolution> {
    check_costs(spec, costs)?;
    let fixed_lambda = match power {
        PowerConstraint::Multiplier(l) => l,
        PowerConstraint::Budget(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return invalid(format!("power budget must be positive, got {b}"));
            }
            0.0
        }
    };
    check_multipliers(fixed_lambda, mu)?;
    let n = spec.inputs();
    let mut p = match &opts.initial {
        Some(init) if init.mass.len() == n => init.mass.clone(),
        Some(_) => return invalid("initial distribution does not match the input grid"),
        None => vec![1.0 / n as f64; n],
    };

    let mirror = spec.mirror_symmetric && is_mirror_symmetric(&costs.power) && is_mirror_symmetric(&costs.sensing);
    let eval = |p: &[f64], d: &mut Vec<f64>, py: &mut Vec<f64>| {
        information_density(spec, p, d, py);
        let info: f64 = p.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
        let dist: f64 = p.iter().zip(&costs.sensing).map(|(a, b)| a * b).sum();
        let pow: f64 = p.iter().zip(&costs.power).map(|(a, b)| a * b).sum();
        info - mu * dist - fixed_lambda * pow
    };
    let step = |p: &[f64], d: &[f64], gamma: f64| -> (Vec<f64>, f64) {
        let g: Vec<f64> = (0..n)
            .map(|x| {
                if p[x] > 0.0 {
                    p[x].ln() + gamma * (d[x] - mu * costs.sensing[x])
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let (mut r, l) = match power {
            PowerConstraint::Multiplier(l) => {
                let t: Vec<f64> = g.iter().zip(&costs.power).map(|(gi, bi)| gi - gamma * l * bi).collect();
                (softmax(&t), l)
            }
            PowerConstraint::Budget(b) => {
                let (r, l) = tilt_to_budget(&g, &costs.power, b);
                (r, l / gamma)
            }
        };
        if mirror {
            // Averaging with the reflection cannot lower a concave objective
            // that is itself reflection invariant.
            for i in 0..n / 2 {
                let avg = 0.5 * (r[i] + r[n - 1 - i]);
                r[i] = avg;
                r[n - 1 - i] = avg;
            }
        }
        (r, l)
    };

    let mut d = vec![0.0; n];
    let mut py = Vec::new();
    let mut objective = eval(&p, &mut d, &mut py);
    let mut history: Vec<f64> = Vec::new();
    let mut lambda = fixed_lambda;
    let mut converged = false;
    let mut iterations = 0;
    // Over-relaxation factor for the tilt. gamma = 1 is the plain
    // Blahut-Arimoto update, whose objective never decreases; larger factors
    // are kept only while they also improve the objective.
    let mut gamma = 1.0;
    let mut d_trial = vec![0.0; n];
    for k in 1..=opts.max_iters {
        iterations = k;
        let (mut p_next, mut l_next) = step(&p, &d, gamma);
        let mut next = eval(&p_next, &mut d_trial, &mut py);
        let accept_fast = gamma > 1.0 && next.is_finite() && history.last().is_none_or(|&h| next >= h);
        if gamma > 1.0 && !accept_fast {
            gamma = 1.0;
            (p_next, l_next) = step(&p, &d, 1.0);
            next = eval(&p_next, &mut d_trial, &mut py);
        } else {
            gamma = (gamma * 2.0).min(opts.max_over_relaxation.max(1.0));
        }
        if !next.is_finite() {
            return Err(Error::Diverged(format!("objective became {next} at iteration {k}")));
        }
        p = p_next;
        lambda = l_next;
        std::mem::swap(&mut d, &mut d_trial);
        let prev = history.last().copied();
        history.push(next);
        objective = next;
        if let Some(prev) = prev {
            if (objective - prev).abs() <= opts.tol * objective.abs().max(1e-15) {
                converged = true;
                break;
            }
        }
    }
    let _ = objective;

    let distribution = GriddedDistribution::new(p)?;
    Ok(BaSolution {
        rate_bits: mutual_information_bits(spec, &distribution),
        avg_power: distribution.expectation(&costs.power),
        avg_distortion: distribution.expectation(&costs.sensing),
        distribution,
        lambda,
        mu,
        iterations,
        converged,
        objective_history: history,
    })
}
