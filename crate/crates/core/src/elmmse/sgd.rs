use super::estimator::{CodebookSampler, SensingProblem};
use super::precoders::{sampler_is_consistent, waterfill_precoder, PrecoderDesign, PrecoderKind, SgdConfig, SgdOutcome};
use crate::error::{invalid, Error, Result};
use crate::numerics::{frobenius_norm_sq, CMatrix, HermitianMatrix, SeededRng, C64};

fn mean_xi(problem: &SensingProblem, w: &CMatrix, grams: &[HermitianMatrix]) -> f64 {
    grams.iter().map(|a| problem.xi(w, a)).sum::<f64>() / grams.len() as f64
}

fn mean_gradient(problem: &SensingProblem, w: &CMatrix, grams: &[HermitianMatrix]) -> CMatrix {
    problem.batch_xi_and_gradient(w, grams).1
}

fn onto_sphere(w: CMatrix, power: f64) -> CMatrix {
    let n = frobenius_norm_sq(&w).sqrt();
    w * C64::new(power.sqrt() / n, 0.0)
}

/// Offline SGD on the empirical ergodic error, started from the
/// water-filling precoder and projected back onto `||W||_F^2 = P` after each
/// step. Step constants are compared on pilot runs of `pilot_iterations`
/// steps over a shared batch stream; the winner is then run for the full
/// iteration count. The checkpoint with the lowest held-out error is kept.
pub fn data_independent_precoder(
    problem: &SensingProblem,
    sampler: &CodebookSampler,
    config: &SgdConfig,
    rng: SeededRng,
) -> Result<SgdOutcome> {
    if !sampler_is_consistent(problem, sampler) {
        return Err(Error::DimensionMismatch("codebook and channel antenna counts differ".into()));
    }
    if config.batch == 0 || config.iterations == 0 || config.validation_draws == 0 || config.checkpoint_every == 0 {
        return invalid("SGD batch, iteration, validation and checkpoint counts must be positive");
    }
    if config.step_grid.is_empty() || config.step_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return invalid("SGD step grid must hold positive constants");
    }
    let power = problem.power();
    let w0 = waterfill_precoder(problem, sampler.t)?.w;
    let validation_rng = rng.fork("sgd-validation");
    let validation: Vec<HermitianMatrix> = (0..config.validation_draws)
        .map(|i| HermitianMatrix::gram(&sampler.sample(&mut validation_rng.stream(i as u64).rng()), 1.0))
        .collect();
    let start_validation = mean_xi(problem, &w0, &validation);
    let g0 = frobenius_norm_sq(&mean_gradient(problem, &w0, &validation)).sqrt();
    let unit = if g0 > 0.0 { power.sqrt() / g0 } else { 0.0 };

    let run = |c: f64, iterations: usize| -> Result<(CMatrix, f64)> {
        let mut batches = rng.fork("sgd-batches").rng();
        let mut w = w0.clone();
        let mut best = (w0.clone(), start_validation);
        let mut grams = Vec::with_capacity(config.batch);
        for t in 1..=iterations {
            grams.clear();
            for _ in 0..config.batch {
                grams.push(HermitianMatrix::gram(&sampler.sample(&mut batches), 1.0));
            }
            let g = mean_gradient(problem, &w, &grams);
            let step = c * unit / (t as f64).sqrt();
            w = onto_sphere(&w - g * C64::new(step, 0.0), power);
            if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Diverged(format!("SGD iterate became non-finite at step {t} (c = {c})")));
            }
            if t % config.checkpoint_every == 0 || t == iterations {
                let v = mean_xi(problem, &w, &validation);
                if !v.is_finite() {
                    return Err(Error::Diverged(format!("SGD objective became non-finite at step {t} (c = {c})")));
                }
                if v < best.1 {
                    best = (w.clone(), v);
                }
            }
        }
        Ok(best)
    };

    let pilot = config.pilot_iterations.clamp(1, config.iterations);
    let mut validation_by_step = Vec::with_capacity(config.step_grid.len());
    let mut winner: Option<(f64, f64)> = None;
    for &c in &config.step_grid {
        let (_, v) = run(c, pilot)?;
        validation_by_step.push(v);
        if winner.is_none_or(|(best, _)| v < best) {
            winner = Some((v, c));
        }
    }
    let (_, step_constant) = winner.expect("non-empty step grid");
    let (w, objective) = run(step_constant, config.iterations)?;
    Ok(SgdOutcome {
        design: PrecoderDesign { w, power, kind: PrecoderKind::DataIndependent, objective, flagged: false },
        step_constant,
        validation_by_step,
        start_validation,
    })
}

/// Batch-mean gradient on explicit draws; exposed for finite-difference checks.
pub fn batch_gradient(problem: &SensingProblem, w: &CMatrix, draws: &[CMatrix]) -> (f64, CMatrix) {
    let grams: Vec<HermitianMatrix> = draws.iter().map(|s| HermitianMatrix::gram(s, 1.0)).collect();
    (mean_xi(problem, w, &grams), mean_gradient(problem, w, &grams))
}

