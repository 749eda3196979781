use crate::error::{invalid, Result};
use crate::numerics::{normal_expectation_rule, standard_normal_pdf};

/// One row of a transition matrix, stored as its nonzero band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub start: usize,
    pub values: Vec<f64>,
}

/// Transition law `P(y | x)` for one channel state, rows indexed by input.
#[derive(Debug, Clone, PartialEq)]
pub struct StateChannel {
    pub state: f64,
    pub weight: f64,
    pub outputs: usize,
    pub rows: Vec<BandRow>,
    /// `sum_y P log P` per input (negative output entropy given x), nats.
    pub(crate) neg_entropy: Vec<f64>,
}

impl StateChannel {
    /// Dense row-stochastic matrix `rows[x][y]` for state value `state`.
    pub fn from_dense(state: f64, weight: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let outputs = rows.first().map_or(0, Vec::len);
        if outputs == 0 {
            return invalid("transition matrix needs at least one output");
        }
        let banded = rows
            .into_iter()
            .map(|r| {
                if r.len() != outputs {
                    return invalid("transition rows must all have the same length");
                }
                let first = r.iter().position(|&v| v != 0.0).unwrap_or(0);
                let last = r.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                Ok(BandRow { start: first, values: r[first..=last].to_vec() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bands(state, weight, outputs, banded)
    }

    pub fn from_bands(state: f64, weight: f64, outputs: usize, rows: Vec<BandRow>) -> Result<Self> {
        for (x, row) in rows.iter().enumerate() {
            if row.start + row.values.len() > outputs {
                return invalid(format!("row {x} extends past {outputs} outputs"));
            }
            if row.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return invalid(format!("row {x} has negative or non-finite probabilities"));
            }
            let total: f64 = row.values.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return invalid(format!("row {x} sums to {total}, expected 1"));
            }
        }
        if !(weight.is_finite() && weight > 0.0) {
            return invalid(format!("state weight must be positive, got {weight}"));
        }
        let neg_entropy = rows
            .iter()
            .map(|r| r.values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum())
            .collect();
        Ok(Self { state, weight, outputs, rows, neg_entropy })
    }
}

/// Input alphabet plus a weighted family of state-dependent transition laws.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannelSpec {
    pub input_grid: Vec<f64>,
    pub states: Vec<StateChannel>,
    /// Set when reflecting the input grid leaves every information quantity
    /// unchanged; the solver then keeps iterates reflection symmetric
    /// whenever the costs are symmetric too.
    pub mirror_symmetric: bool,
}

impl DiscreteChannelSpec {
    pub fn new(input_grid: Vec<f64>, states: Vec<StateChannel>) -> Result<Self> {
        if input_grid.is_empty() {
            return invalid("input grid is empty");
        }
        if input_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("input grid must be strictly increasing");
        }
        if states.is_empty() {
            return invalid("channel needs at least one state");
        }
        if let Some(s) = states.iter().find(|s| s.rows.len() != input_grid.len()) {
            return invalid(format!("state {} has {} rows for {} inputs", s.state, s.rows.len(), input_grid.len()));
        }
        let total: f64 = states.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return invalid(format!("state weights sum to {total}, expected 1"));
        }
        Ok(Self { input_grid, states, mirror_symmetric: false })
    }

    /// Stateless channel from a single row-stochastic matrix.
    pub fn memoryless(input_grid: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let state = StateChannel::from_dense(0.0, 1.0, rows)?;
        Self::new(input_grid, vec![state])
    }

    pub fn inputs(&self) -> usize {
        self.input_grid.len()
    }
}

/// Discretisation of the real SISO fading channel `Y = eta X + N`,
/// `eta, N ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SisoGrid {
    /// Average power budget `B` (linear).
    pub budget: f64,
    /// Odd number of input points spanning `[-span sqrt(B), span sqrt(B)]`.
    pub input_points: usize,
    pub input_span: f64,
    /// Gauss-Hermite nodes for the fading state (folded onto `eta > 0`).
    pub state_nodes: usize,
    /// Output grid step.
    pub output_step: f64,
    /// Noise support kept around each mean, in standard deviations.
    pub output_tail: f64,
}

impl SisoGrid {
    pub fn new(budget: f64) -> Self {
        Self { budget, input_points: 161, input_span: 4.0, state_nodes: 128, output_step: 0.2, output_tail: 9.0 }
    }

    pub fn build(&self) -> Result<DiscreteChannelSpec> {
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return invalid(format!("power budget must be positive, got {}", self.budget));
        }
        if self.input_points < 2 || self.input_points % 2 == 0 {
            return invalid("input_points must be odd and at least 3");
        }
        if !(self.input_span > 0.0 && self.output_step > 0.0 && self.output_tail > 0.0) {
            return invalid("input_span, output_step and output_tail must be positive");
        }
        if self.state_nodes == 0 {
            return invalid("state_nodes must be positive");
        }
        let half = (self.input_points / 2) as f64;
        let x_max = self.input_span * self.budget.sqrt();
        let input_grid: Vec<f64> = (0..self.input_points).map(|i| (i as f64 - half) * x_max / half).collect();

        // The law of (X, Y) under -eta is that of (X, -Y) under eta, so only
        // |eta| matters for every information quantity.
        let (nodes, weights) = normal_expectation_rule(self.state_nodes);
        let mut folded: Vec<(f64, f64)> = Vec::new();
        for (&eta, &w) in nodes.iter().zip(&weights) {
            if eta > 0.0 {
                folded.push((eta, 2.0 * w));
            } else if eta == 0.0 {
                folded.push((0.0, w));
            }
        }
        folded.retain(|&(_, w)| w > 1e-15);
        let total: f64 = folded.iter().map(|s| s.1).sum();

        let h = self.output_step;
        let states = folded
            .into_iter()
            .map(|(eta, w)| {
                let half_outputs = ((eta * x_max + self.output_tail) / h).ceil() as usize;
                let outputs = 2 * half_outputs + 1;
                let y0 = -(half_outputs as f64) * h;
                let rows = input_grid
                    .iter()
                    .map(|&x| {
                        let mean = eta * x;
                        let lo = (((mean - self.output_tail - y0) / h).ceil().max(0.0)) as usize;
                        let hi = ((((mean + self.output_tail - y0) / h).floor()) as usize).min(outputs - 1);
                        let mut values: Vec<f64> =
                            (lo..=hi).map(|k| standard_normal_pdf(y0 + k as f64 * h - mean)).collect();
                        let s: f64 = values.iter().sum();
                        values.iter_mut().for_each(|v| *v /= s);
                        BandRow { start: lo, values }
                    })
                    .collect();
                StateChannel::from_bands(eta, w / total, outputs, rows)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut spec = DiscreteChannelSpec::new(input_grid, states)?;
        // Y -> -Y maps the law under x onto the law under -x for every state.
        spec.mirror_symmetric = true;
        Ok(spec)
    }
}
