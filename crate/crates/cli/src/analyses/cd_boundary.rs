use isac_core::cap_distortion::{cd_boundary, BaOptions, CostPair, SisoGrid};
use isac_core::SeededRng;

use super::{Analysis, StageOutput};
use crate::config::{db_to_linear, Config};
use crate::output::Table;

/// Capacity-distortion boundary of the real SISO Rayleigh channel with
/// MMSE sensing distortion.
pub struct CdBoundaryAnalysis;

impl Analysis for CdBoundaryAnalysis {
    fn name(&self) -> &'static str {
        "cd-boundary"
    }

    fn run(&self, cfg: &Config, _rng: SeededRng) -> isac_core::Result<StageOutput> {
        let c = &cfg.cd_boundary;
        let budget = db_to_linear(c.budget_db);
        let grid = SisoGrid {
            budget,
            input_points: c.input_points,
            input_span: c.input_span,
            state_nodes: c.state_nodes,
            output_step: c.output_step,
            output_tail: c.output_tail,
        };
        let spec = grid.build()?;
        let costs = CostPair::siso(&spec.input_grid);
        let opts = BaOptions { tol: c.tol, max_iters: c.max_iters, initial: None, max_over_relaxation: c.max_over_relaxation };
        let boundary = cd_boundary(&spec, &costs, budget, &c.mu, &opts)?;

        let mut points = Table::new(
            "cd_boundary",
            &["point", "mu", "lambda", "rate_bits", "avg_power", "avg_distortion", "iterations", "converged"],
        );
        let mut masses = Table::new("cd_distributions", &["point", "mu", "x", "mass"]);
        let mut flagged = Vec::new();
        for (i, s) in boundary.solutions.iter().enumerate() {
            points.push(vec![
                i.into(),
                s.mu.into(),
                s.lambda.into(),
                s.rate_bits.into(),
                s.avg_power.into(),
                s.avg_distortion.into(),
                s.iterations.into(),
                s.converged.into(),
            ]);
            for (x, m) in spec.input_grid.iter().zip(s.distribution.mass()) {
                masses.push(vec![i.into(), s.mu.into(), (*x).into(), (*m).into()]);
            }
            if !s.converged {
                flagged.push(format!("mu = {} stopped after {} iterations", s.mu, s.iterations));
            }
        }
        Ok(StageOutput { tables: vec![points, masses], flagged })
    }
}
