use isac_core::rate_exponent::{beampattern, pointlike_beam, re_boundary_pointlike, uniform_lambda_grid, PointTargetScenario};
use isac_core::{SeededRng, C64};

use super::{Analysis, StageOutput};
use crate::config::{db_to_linear, Config};
use crate::output::Table;

pub struct ReRegionAnalysis;

impl Analysis for ReRegionAnalysis {
    fn name(&self) -> &'static str {
        "re-region"
    }

    fn run(&self, cfg: &Config, _rng: SeededRng) -> isac_core::Result<StageOutput> {
        let c = &cfg.re_region;
        let n = c.elements as f64;
        // ||H_c||_F^2 = N |alpha_c|^2 and ||H_s||_F^2 = N^2 |alpha_s|^2.
        let alpha_c = (db_to_linear(c.snr_c_db) * c.noise_c / (n * c.power)).sqrt();
        let alpha_s = (db_to_linear(c.snr_s_db) * c.noise_s / (n * n * c.power)).sqrt();
        let lambdas = uniform_lambda_grid(c.lambda_points);
        let thetas: Vec<f64> = (0..c.beam_points)
            .map(|k| -90.0 + 180.0 * k as f64 / (c.beam_points - 1) as f64)
            .collect();
        let theta_rad: Vec<f64> = thetas.iter().map(|t| t.to_radians()).collect();

        let mut region = Table::new("re_region", &["pair", "theta_c_deg", "theta_s_deg", "lambda", "rate_bits", "exponent"]);
        let mut beams = Table::new("beampattern", &["pair", "theta_c_deg", "theta_s_deg", "lambda", "theta_deg", "gain"]);
        for (pair, &[tc, ts]) in c.angle_pairs_deg.iter().enumerate() {
            let scenario = PointTargetScenario {
                theta_c: tc.to_radians(),
                theta_s: ts.to_radians(),
                alpha_c: C64::new(alpha_c, 0.0),
                alpha_s: C64::new(alpha_s, 0.0),
                elements: c.elements,
                power: c.power,
                noise_c: c.noise_c,
                noise_s: c.noise_s,
            };
            let sweep = re_boundary_pointlike(&scenario, &lambdas)?;
            for p in &sweep.curve.points {
                region.push(vec![pair.into(), tc.into(), ts.into(), p.control.into(), p.rate.into(), p.sensing_value.into()]);
            }
            for &lambda in &c.beam_lambdas {
                let v = pointlike_beam(scenario.theta_c, scenario.theta_s, c.elements, lambda);
                let gains = beampattern(&v, &theta_rad)?;
                for (t, g) in thetas.iter().zip(gains) {
                    beams.push(vec![pair.into(), tc.into(), ts.into(), lambda.into(), (*t).into(), g.into()]);
                }
            }
        }
        Ok(StageOutput { tables: vec![region, beams], flagged: Vec::new() })
    }
}
