//! Channel estimation with random ISAC signals: LMMSE error of `X = W S`
//! averaged over the data codebook `S`, and three ways to pick `W`.

mod estimator;
mod precoders;
mod sgd;

use rayon::prelude::*;

pub use estimator::{exponential_correlation, lmmse_error, lmmse_estimate, CodebookKind, CodebookSampler, SensingProblem};
pub use precoders::{
    data_dependent_precoder, jensen_bound, minimize_xi_over_ball, waterfill_precoder, PrecoderDesign, PrecoderKind,
    SgdConfig, SgdOutcome, ORACLE_ITERS,
};
pub use sgd::{batch_gradient, data_independent_precoder};

use crate::crb_rate::mean_and_std_error;
use crate::error::{invalid, Error, Result};
use crate::numerics::{CMatrix, HermitianMatrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElmmseEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// A precoder family. `prepare` runs any offline design once; `precoder`
/// then yields the matrix used with a particular codebook draw.
pub trait PrecodingScheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn prepare(&mut self, _problem: &SensingProblem, _sampler: &CodebookSampler, _rng: SeededRng) -> Result<()> {
        Ok(())
    }

    fn precoder(&self, problem: &SensingProblem, s: &CMatrix) -> Result<PrecoderDesign>;

    /// Step constant chosen during `prepare`, for schemes that tune one.
    fn tuned_step(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Default)]
pub struct Waterfilling {
    design: Option<PrecoderDesign>,
}

impl PrecodingScheme for Waterfilling {
    fn name(&self) -> &'static str {
        "wf"
    }

    fn prepare(&mut self, problem: &SensingProblem, sampler: &CodebookSampler, _rng: SeededRng) -> Result<()> {
        self.design = Some(waterfill_precoder(problem, sampler.t)?);
        Ok(())
    }

    fn precoder(&self, problem: &SensingProblem, s: &CMatrix) -> Result<PrecoderDesign> {
        match &self.design {
            Some(d) => Ok(d.clone()),
            None => waterfill_precoder(problem, s.ncols()),
        }
    }
}

#[derive(Debug, Default)]
pub struct DataDependent {
    pub certify: bool,
}

impl PrecodingScheme for DataDependent {
    fn name(&self) -> &'static str {
        "dd"
    }

    fn precoder(&self, problem: &SensingProblem, s: &CMatrix) -> Result<PrecoderDesign> {
        data_dependent_precoder(problem, s, self.certify)
    }
}

#[derive(Debug, Default)]
pub struct DataIndependent {
    pub config: SgdConfig,
    pub outcome: Option<SgdOutcome>,
}

impl PrecodingScheme for DataIndependent {
    fn name(&self) -> &'static str {
        "di"
    }

    fn prepare(&mut self, problem: &SensingProblem, sampler: &CodebookSampler, rng: SeededRng) -> Result<()> {
        self.outcome = Some(data_independent_precoder(problem, sampler, &self.config, rng)?);
        Ok(())
    }

    fn precoder(&self, _problem: &SensingProblem, _s: &CMatrix) -> Result<PrecoderDesign> {
        self.outcome
            .as_ref()
            .map(|o| o.design.clone())
            .ok_or_else(|| Error::InvalidInput("data-independent precoder used before training".into()))
    }

    fn tuned_step(&self) -> Option<f64> {
        self.outcome.as_ref().map(|o| o.step_constant)
    }
}

pub const SCHEME_NAMES: [&str; 3] = ["wf", "dd", "di"];

/// Look up a precoder family by its short name.
pub fn scheme_by_name(name: &str, sgd: &SgdConfig, certify: bool) -> Option<Box<dyn PrecodingScheme>> {
    match name {
        "wf" => Some(Box::new(Waterfilling::default())),
        "dd" => Some(Box::new(DataDependent { certify })),
        "di" => Some(Box::new(DataIndependent { config: sgd.clone(), outcome: None })),
        _ => None,
    }
}

fn draw_stream(rng: SeededRng) -> SeededRng {
    rng.fork("elmmse-draws")
}

/// Monte Carlo ergodic error of a fixed precoder.
pub fn elmmse(problem: &SensingProblem, w: &CMatrix, sampler: &CodebookSampler, n_mc: usize, rng: SeededRng) -> Result<ElmmseEstimate> {
    if n_mc < 2 {
        return invalid("Monte Carlo needs at least two draws");
    }
    if w.nrows() != problem.tx_antennas() || sampler.m != w.ncols() {
        return Err(Error::DimensionMismatch("precoder, channel and codebook sizes differ".into()));
    }
    let base = draw_stream(rng);
    let values: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|i| problem.xi(w, &HermitianMatrix::gram(&sampler.sample(&mut base.stream(i as u64).rng()), 1.0)))
        .collect();
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(ElmmseEstimate { mean, std_error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeEstimate {
    pub name: &'static str,
    pub estimate: ElmmseEstimate,
    /// Draws on which the scheme's design was flagged.
    pub flagged: usize,
    /// Per-draw errors, aligned across schemes of one evaluation.
    pub values: Vec<f64>,
}

/// Standard error of the mean difference between two schemes evaluated on
/// the same draws.
pub fn paired_std_error(a: &SchemeEstimate, b: &SchemeEstimate) -> f64 {
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    mean_and_std_error(&diff).1
}

/// Evaluate prepared schemes on common codebook draws.
pub fn evaluate_schemes(
    problem: &SensingProblem,
    sampler: &CodebookSampler,
    schemes: &[Box<dyn PrecodingScheme>],
    n_mc: usize,
    rng: SeededRng,
) -> Result<Vec<SchemeEstimate>> {
    if n_mc < 2 {
        return invalid("Monte Carlo needs at least two draws");
    }
    let base = draw_stream(rng);
    let per_draw: Vec<Result<Vec<(f64, bool)>>> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let s = sampler.sample(&mut base.stream(i as u64).rng());
            let a = HermitianMatrix::gram(&s, 1.0);
            schemes
                .iter()
                .map(|scheme| {
                    let d = scheme.precoder(problem, &s)?;
                    Ok((problem.xi(&d.w, &a), d.flagged))
                })
                .collect()
        })
        .collect();
    let per_draw: Vec<Vec<(f64, bool)>> = per_draw.into_iter().collect::<Result<_>>()?;
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(k, scheme)| {
            let values: Vec<f64> = per_draw.iter().map(|d| d[k].0).collect();
            let (mean, std_error) = mean_and_std_error(&values);
            SchemeEstimate {
                name: scheme.name(),
                estimate: ElmmseEstimate { mean, std_error },
                flagged: per_draw.iter().filter(|d| d[k].1).count(),
                values,
            }
        })
        .collect())
}

/// One SNR point of the precoder comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrSweepRow {
    pub snr_db: f64,
    pub estimates: Vec<SchemeEstimate>,
    pub sgd_step_constant: Option<f64>,
}

impl SnrSweepRow {
    pub fn get(&self, name: &str) -> Option<&ElmmseEstimate> {
        self.scheme(name).map(|e| &e.estimate)
    }

    pub fn scheme(&self, name: &str) -> Option<&SchemeEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }
}

/// Settings shared by every point of a precoder sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup {
    pub r_h: HermitianMatrix,
    pub power: f64,
    pub rx_antennas: usize,
    pub sampler: CodebookSampler,
    pub n_mc: usize,
    pub sgd: SgdConfig,
    pub certify: bool,
}

/// Compare the named schemes over an SNR grid. SNR points are independent
/// and run in parallel; each uses its own seed stream.
pub fn snr_sweep(setup: &SweepSetup, snrs_db: &[f64], names: &[&str], rng: SeededRng) -> Result<Vec<SnrSweepRow>> {
    snrs_db
        .par_iter()
        .enumerate()
        .map(|(k, &snr)| {
            let problem = SensingProblem::at_snr_db(setup.r_h.clone(), setup.power, snr, setup.rx_antennas)?;
            let point = rng.stream(k as u64);
            let mut schemes = Vec::with_capacity(names.len());
            for name in names {
                let mut scheme = scheme_by_name(name, &setup.sgd, setup.certify)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown precoding scheme '{name}'")))?;
                scheme.prepare(&problem, &setup.sampler, point.fork(name))?;
                schemes.push(scheme);
            }
            let estimates = evaluate_schemes(&problem, &setup.sampler, &schemes, setup.n_mc, point.fork("evaluation"))?;
            let sgd_step_constant = schemes.iter().find_map(|s| s.tuned_step());
            Ok(SnrSweepRow { snr_db: snr, estimates, sgd_step_constant })
        })
        .collect()
}

/// Ergodic error of the water-filling precoder with a Gaussian codebook
/// against its Jensen bound, for one block length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenRow {
    pub t: usize,
    pub estimate: ElmmseEstimate,
    pub bound: f64,
}

impl JensenRow {
    pub fn relative_gap(&self) -> f64 {
        (self.estimate.mean - self.bound) / self.bound
    }
}

pub fn jensen_gap_sweep(
    r_h: &HermitianMatrix,
    power: f64,
    snr_db: f64,
    rx_antennas: usize,
    block_lengths: &[usize],
    n_mc: usize,
    rng: SeededRng,
) -> Result<Vec<JensenRow>> {
    let problem = SensingProblem::at_snr_db(r_h.clone(), power, snr_db, rx_antennas)?;
    block_lengths
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let sampler = CodebookSampler::new(CodebookKind::Gaussian, problem.tx_antennas(), t)?;
            let design = waterfill_precoder(&problem, t)?;
            let estimate = elmmse(&problem, &design.w, &sampler, n_mc, rng.stream(k as u64))?;
            Ok(JensenRow { t, estimate, bound: design.objective })
        })
        .collect()
}
