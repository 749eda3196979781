//! Frequency-domain ranging: RMS bandwidth, the delay CRB, the Ziv-Zakai
//! bound, and a multi-start search for the spectrum minimising the ZZB.
//!
//! Ranges are in meters. Spectra live on a frequency grid in `[0, f_high]`
//! with trapezoid bin weights; the SNR is an explicit scalar so that the
//! spectrum only sets the shape of the autocorrelation.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::numerics::{gaussian_q, project_simplex, standard_normal_pdf, trapezoid_weights, SeededRng};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformPsd {
    freqs: Vec<f64>,
    power: Vec<f64>,
    weights: Vec<f64>,
}

impl WaveformPsd {
    /// `freqs` strictly increasing and nonnegative, `power >= 0` with
    /// positive total energy.
    pub fn new(freqs: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() || freqs.len() != power.len() {
            return invalid("PSD needs matching, non-empty frequency and power lists");
        }
        if freqs[0] < 0.0 || freqs.windows(2).any(|w| !(w[1] > w[0])) || freqs.iter().any(|f| !f.is_finite()) {
            return invalid("PSD frequencies must be finite, nonnegative and strictly increasing");
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return invalid("PSD values must be finite and nonnegative");
        }
        let weights = trapezoid_weights(&freqs);
        let psd = Self { freqs, power, weights };
        if !(psd.total_energy() > 0.0) {
            return invalid("PSD has zero energy");
        }
        Ok(psd)
    }

    /// Uniform grid of `n_bins` points on `[0, f_high]` with the given
    /// per-bin energies.
    pub fn from_energies(f_high: f64, energies: &[f64]) -> Result<Self> {
        let freqs = uniform_band(f_high, energies.len())?;
        let weights = trapezoid_weights(&freqs);
        let power = energies.iter().zip(&weights).map(|(e, w)| e / w).collect();
        Self::new(freqs, power)
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// Per-bin energies `power * df`.
    pub fn energies(&self) -> Vec<f64> {
        self.power.iter().zip(&self.weights).map(|(p, w)| p * w).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.energies().iter().sum()
    }

    /// Share of the energy at frequencies strictly above `f`.
    pub fn fraction_above(&self, f: f64) -> f64 {
        let e = self.energies();
        let above: f64 = self.freqs.iter().zip(&e).filter(|(fk, _)| **fk > f).map(|(_, ek)| ek).sum();
        above / e.iter().sum::<f64>()
    }
}

pub fn uniform_band(f_high: f64, n_bins: usize) -> Result<Vec<f64>> {
    if !(f_high > 0.0 && f_high.is_finite()) {
        return invalid(format!("f_high must be positive, got {f_high}"));
    }
    match n_bins {
        0 => invalid("at least one frequency bin is required"),
        1 => Ok(vec![f_high]),
        n => Ok((0..n).map(|k| f_high * k as f64 / (n - 1) as f64).collect()),
    }
}

pub fn rms_bandwidth(psd: &WaveformPsd) -> f64 {
    let e = psd.energies();
    let second: f64 = psd.freqs.iter().zip(&e).map(|(f, ek)| f * f * ek).sum();
    (second / e.iter().sum::<f64>()).sqrt()
}

/// Delay CRB in squared meters, `c^2 / (8 pi^2 beta^2 snr)`.
pub fn crb_delay(beta: f64, snr: f64, c: f64) -> Result<f64> {
    if !(beta > 0.0 && snr > 0.0 && c > 0.0) {
        return invalid("CRB needs positive bandwidth, SNR and propagation speed");
    }
    Ok(c * c / (8.0 * PI * PI * beta * beta * snr))
}

/// Normalised autocorrelation on a grid of range offsets (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct Acf {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

/// `1 - R(x)` for each offset, computed from `2 sin^2` so that it stays
/// accurate near the mainlobe peak.
fn one_minus_acf(psd: &WaveformPsd, x: f64, c: f64) -> f64 {
    let e = psd.energies();
    let total: f64 = e.iter().sum();
    let s: f64 = psd.freqs.iter().zip(&e).map(|(f, ek)| ek * 2.0 * (PI * f * x / c).sin().powi(2)).sum();
    s / total
}

pub fn acf_from_psd(psd: &WaveformPsd, lags: &[f64], c: f64) -> Acf {
    let values = lags.iter().map(|&x| if x == 0.0 { 1.0 } else { 1.0 - one_minus_acf(psd, x, c) }).collect();
    Acf { lags: lags.to_vec(), values }
}

/// Uniform offset grid `[0, eps_max]` with `points` nodes.
pub fn lag_grid(eps_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(eps_max > 0.0) || points < 2 {
        return invalid("lag grid needs eps_max > 0 and at least two points");
    }
    Ok((0..points).map(|j| eps_max * j as f64 / (points - 1) as f64).collect())
}

/// `int_0^eps_max x Q(sqrt(snr (1 - R(x)) / 2)) dx` by the trapezoid rule on
/// `x_grid` (which should span `[0, eps_max]`).
pub fn zzb(psd: &WaveformPsd, snr: f64, x_grid: &[f64], c: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return invalid(format!("SNR must be nonnegative, got {snr}"));
    }
    let w = trapezoid_weights(x_grid);
    Ok(x_grid
        .iter()
        .zip(&w)
        .map(|(&x, wx)| {
            let d = one_minus_acf(psd, x, c).max(0.0);
            wx * x * gaussian_q((snr * d / 2.0).sqrt())
        })
        .sum())
}

/// Grid sizes and physical constants of the ZZB search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZzbSetup {
    pub n_bins: usize,
    pub f_high: f64,
    pub eps_max: f64,
    pub lag_points: usize,
    pub c: f64,
}

impl ZzbSetup {
    /// 64 bins, 2048 lag points and `eps_max = 10 c / f_high`.
    pub fn with_band(f_high: f64) -> Self {
        Self { n_bins: 64, f_high, eps_max: 10.0 * SPEED_OF_LIGHT / f_high, lag_points: 2048, c: SPEED_OF_LIGHT }
    }
}

/// ZZB as a function of the bin energies `e` (on the unit simplex) with
/// the cosine table precomputed.
pub struct ZzbObjective {
    snr: f64,
    /// `x_j * w_j` for the trapezoid rule.
    x_weight: Vec<f64>,
    /// `1 - cos(2 pi f_k x_j / c)`, stored bin-major.
    table: Vec<Vec<f64>>,
}

impl ZzbObjective {
    pub fn new(setup: &ZzbSetup, snr: f64) -> Result<Self> {
        if !(snr >= 0.0 && snr.is_finite()) {
            return invalid(format!("SNR must be finite and nonnegative, got {snr}"));
        }
        let freqs = uniform_band(setup.f_high, setup.n_bins)?;
        let xs = lag_grid(setup.eps_max, setup.lag_points)?;
        let wx = trapezoid_weights(&xs);
        let x_weight = xs.iter().zip(&wx).map(|(x, w)| x * w).collect();
        let table = freqs
            .iter()
            .map(|f| xs.iter().map(|x| 2.0 * (PI * f * x / setup.c).sin().powi(2)).collect())
            .collect();
        Ok(Self { snr, x_weight, table })
    }

    fn distances(&self, e: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.x_weight.len()];
        for (ek, row) in e.iter().zip(&self.table) {
            if *ek != 0.0 {
                d.iter_mut().zip(row).for_each(|(dj, r)| *dj += ek * r);
            }
        }
        d
    }

    pub fn value(&self, e: &[f64]) -> f64 {
        self.distances(e)
            .iter()
            .zip(&self.x_weight)
            .map(|(d, xw)| xw * gaussian_q((self.snr * d.max(0.0) / 2.0).sqrt()))
            .sum()
    }

    pub fn value_and_gradient(&self, e: &[f64]) -> (f64, Vec<f64>) {
        let d = self.distances(e);
        let mut value = 0.0;
        // d/dD of x Q(sqrt(snr D / 2)) = -x phi(u) snr / (4 u)
        let slope: Vec<f64> = d
            .iter()
            .zip(&self.x_weight)
            .map(|(&dj, &xw)| {
                let u = (self.snr * dj.max(0.0) / 2.0).sqrt();
                value += xw * gaussian_q(u);
                if u > 1e-12 { -xw * standard_normal_pdf(u) * self.snr / (4.0 * u) } else { 0.0 }
            })
            .collect();
        let grad = self.table.iter().map(|row| row.iter().zip(&slope).map(|(r, s)| r * s).sum()).collect();
        (value, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub energies: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking
/// over the unit simplex.
pub fn minimize_on_simplex(obj: &ZzbObjective, start: &[f64], max_iters: usize, tol: f64) -> SimplexOutcome {
    let mut e = project_simplex(start, 1.0);
    let (mut f, mut g) = obj.value_and_gradient(&e);
    let mut step = 1.0 / g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for it in 1..=max_iters {
        let mut accepted = None;
        let mut s = step;
        for _ in 0..60 {
            let trial: Vec<f64> = e.iter().zip(&g).map(|(ei, gi)| ei - s * gi).collect();
            let cand = project_simplex(&trial, 1.0);
            let decrease: f64 = cand.iter().zip(&e).zip(&g).map(|((c, ei), gi)| gi * (c - ei)).sum();
            let fc = obj.value(&cand);
            if fc <= f + 1e-4 * decrease {
                accepted = Some((cand, fc));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            return SimplexOutcome { energies: e, value: f, iterations: it, converged: true };
        };
        let (_, gc) = obj.value_and_gradient(&cand);
        let ds: Vec<f64> = cand.iter().zip(&e).map(|(a, b)| a - b).collect();
        let ss: f64 = ds.iter().map(|v| v * v).sum();
        let sy: f64 = ds.iter().zip(gc.iter().zip(&g)).map(|(d, (a, b))| d * (a - b)).sum();
        step = if sy > 0.0 { ss / sy } else { 2.0 * s };
        let rel = (f - fc).abs() <= tol * f.abs();
        e = cand;
        f = fc;
        g = gc;
        if ss.sqrt() <= tol || rel {
            return SimplexOutcome { energies: e, value: f, iterations: it, converged: true };
        }
    }
    SimplexOutcome { energies: e, value: f, iterations: max_iters, converged: false }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZzbOptimum {
    pub psd: WaveformPsd,
    pub value: f64,
    pub restart_values: Vec<f64>,
    pub converged_restarts: usize,
    /// No restart met the stopping rule; the best iterate is returned anyway.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZzbSearch {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for ZzbSearch {
    fn default() -> Self {
        Self { restarts: 20, max_iters: 2000, tol: 1e-10 }
    }
}

/// Multi-start search for the unit-energy spectrum on `[0, f_high]` that
/// minimises the ZZB at `snr`. Restart `i` starts from a flat Dirichlet draw
/// on its own stream; restarts run in parallel.
pub fn zzb_optimal_psd(snr: f64, setup: &ZzbSetup, search: &ZzbSearch, rng: SeededRng) -> Result<ZzbOptimum> {
    if setup.n_bins < 2 {
        return invalid("ZZB search needs at least two frequency bins");
    }
    if search.restarts == 0 {
        return invalid("ZZB search needs at least one restart");
    }
    let obj = ZzbObjective::new(setup, snr)?;
    let base = rng.fork("zzb-restarts");
    let runs: Vec<SimplexOutcome> = (0..search.restarts)
        .into_par_iter()
        .map(|i| {
            // Normalised unit exponentials are a flat Dirichlet draw.
            let mut g = base.stream(i as u64).rng();
            let raw: Vec<f64> = (0..setup.n_bins).map(|_| Exp1.sample(&mut g)).collect();
            let total: f64 = raw.iter().sum();
            let start: Vec<f64> = raw.iter().map(|v| v / total).collect();
            minimize_on_simplex(&obj, &start, search.max_iters, search.tol)
        })
        .collect();
    let best = runs
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one restart");
    let converged_restarts = runs.iter().filter(|r| r.converged).count();
    Ok(ZzbOptimum {
        psd: WaveformPsd::from_energies(setup.f_high, &best.energies)?,
        value: best.value,
        restart_values: runs.iter().map(|r| r.value).collect(),
        converged_restarts,
        flagged: converged_restarts == 0,
    })
}
