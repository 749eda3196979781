use isac_core::elmmse::*;
use isac_core::numerics::{frobenius_norm_sq, haar_semiunitary, sample_gaussian_matrix, CMatrix, HermitianMatrix, C64};
use isac_core::SeededRng;
use proptest::prelude::*;
use rand::Rng;

fn direct_error(x: &CMatrix, r: &HermitianMatrix, noise: f64, ns: usize) -> f64 {
    let rinv = r.inverse_pd().unwrap();
    let info = &rinv + &HermitianMatrix::gram(x, noise * ns as f64);
    info.inverse_pd().unwrap().trace()
}

fn random_precoder(m: usize, power: f64, rng: &mut impl Rng) -> CMatrix {
    let w = sample_gaussian_matrix(m, m, 1.0, rng).unwrap();
    let n = frobenius_norm_sq(&w).sqrt();
    w * C64::new(power.sqrt() / n, 0.0)
}

fn random_correlation(m: usize, ns: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let a = sample_gaussian_matrix(m, m, 1.0, rng).unwrap();
    let g = HermitianMatrix::gram(&a, 1.0);
    g.scale(ns as f64 * m as f64 / g.trace())
}

#[test]
fn estimate_trivial_cases() {
    let r = exponential_correlation(2, 0.5, 1).unwrap();
    let ys = CMatrix::from_element(1, 3, C64::new(1.0, -0.5));
    let zero = lmmse_estimate(&ys, &CMatrix::zeros(2, 3), &r, 0.1, 1).unwrap();
    assert!(zero.iter().all(|z| z.norm() == 0.0));

    let x = CMatrix::from_element(2, 3, C64::new(0.3, 0.2));
    let far = lmmse_estimate(&ys, &x, &r, 1e14, 1).unwrap();
    assert!(far.iter().all(|z| z.norm() < 1e-12));

    let one = HermitianMatrix::identity(1);
    let xs = CMatrix::from_element(1, 1, C64::new(0.6, -0.8));
    let h = C64::new(1.3, 0.4);
    let y = CMatrix::from_element(1, 1, h * xs[(0, 0)]);
    let est = lmmse_estimate(&y, &xs, &one, 1e-12, 1).unwrap();
    assert!((est[(0, 0)] - h).norm() < 1e-9);

    assert!(lmmse_estimate(&ys, &x, &r, 0.0, 1).is_err());
    assert!(lmmse_estimate(&ys, &CMatrix::zeros(3, 3), &r, 0.1, 1).is_err());
}

#[test]
fn error_trivial_cases() {
    let r = exponential_correlation(3, 0.7, 2).unwrap();
    let xi0 = lmmse_error(&CMatrix::zeros(3, 4), &r, 0.5, 2).unwrap();
    assert!((xi0 - r.trace()).abs() < 1e-12);

    let (m, t, p, noise, ns) = (4usize, 8usize, 2.0, 0.3, 3usize);
    let q = haar_semiunitary(m, t, &mut SeededRng::new(1, 0).rng()).unwrap();
    let x = q * C64::new((p * t as f64 / m as f64).sqrt(), 0.0);
    let xi = lmmse_error(&x, &HermitianMatrix::identity(m), noise, ns).unwrap();
    let expected = m as f64 / (1.0 + p * t as f64 / (noise * ns as f64 * m as f64));
    assert!((xi - expected).abs() < 1e-12);
}

#[test]
fn stable_form_matches_direct_inverse_and_handles_singular_prior() {
    let mut rng = SeededRng::new(2, 0).rng();
    for _ in 0..5 {
        let r = random_correlation(4, 2, &mut rng);
        let x = sample_gaussian_matrix(4, 6, 1.0, &mut rng).unwrap();
        let a = lmmse_error(&x, &r, 0.4, 2).unwrap();
        let b = direct_error(&x, &r, 0.4, 2);
        assert!((a - b).abs() < 1e-10 * b);
    }
    let singular = HermitianMatrix::from_real_diagonal(&[2.0, 0.0]);
    let x = CMatrix::identity(2, 2);
    let xi = lmmse_error(&x, &singular, 1.0, 1).unwrap();
    assert!((xi - 2.0 / 3.0).abs() < 1e-14);
}

#[test]
fn monte_carlo_mse_matches_error_formula() {
    let (m, ns, t, noise) = (2usize, 2usize, 3usize, 0.5);
    let mut rng = SeededRng::new(3, 0).rng();
    let r = random_correlation(m, ns, &mut rng);
    let row_root = r.scale(1.0 / ns as f64).psd_sqrt();
    let x = sample_gaussian_matrix(m, t, 1.0, &mut rng).unwrap();
    let xi = lmmse_error(&x, &r, noise, ns).unwrap();
    let errs: Vec<f64> = (0..10_000)
        .map(|_| {
            let h = sample_gaussian_matrix(ns, m, 1.0, &mut rng).unwrap() * row_root.matrix();
            let z = sample_gaussian_matrix(ns, t, noise, &mut rng).unwrap();
            let est = lmmse_estimate(&(&h * &x + z), &x, &r, noise, ns).unwrap();
            frobenius_norm_sq(&(est - h))
        })
        .collect();
    let (mean, se) = isac_core::crb_rate::mean_and_std_error(&errs);
    assert!((mean - xi).abs() <= 3.0 * se, "{mean} vs {xi} (se {se})");
}

#[test]
fn semiunitary_codebook_has_zero_variance_at_the_jensen_bound() {
    let r = exponential_correlation(4, 0.9, 2).unwrap();
    let problem = SensingProblem::at_snr_db(r, 1.0, 5.0, 2).unwrap();
    let w = random_precoder(4, 1.0, &mut SeededRng::new(4, 0).rng());
    let sampler = CodebookSampler::new(CodebookKind::Semiunitary, 4, 6).unwrap();
    let est = elmmse(&problem, &w, &sampler, 50, SeededRng::new(4, 1)).unwrap();
    let bound = jensen_bound(&problem, &w, 6);
    assert!((est.mean - bound).abs() < 1e-12 * bound);
    assert!(est.std_error < 1e-13 * bound);

    let gauss = CodebookSampler::new(CodebookKind::Gaussian, 4, 6).unwrap();
    let est = elmmse(&problem, &w, &gauss, 400, SeededRng::new(4, 2)).unwrap();
    assert!(est.mean >= bound);
}

#[test]
fn long_gaussian_blocks_approach_the_jensen_bound() {
    let r = exponential_correlation(4, 0.9, 2).unwrap();
    let rows = jensen_gap_sweep(&r, 1.0, 10.0, 2, &[4, 16, 64, 256, 4096], 200, SeededRng::new(5, 0)).unwrap();
    assert!(rows.last().unwrap().relative_gap() < 0.01);
    for pair in rows.windows(2) {
        let se = pair[0].estimate.std_error / pair[0].bound + pair[1].estimate.std_error / pair[1].bound;
        assert!(pair[1].relative_gap() <= pair[0].relative_gap() + 3.0 * se);
    }
    assert!(rows.iter().all(|r| r.relative_gap() >= 0.0));
}

#[test]
fn waterfill_structure() {
    let problem = SensingProblem::new(HermitianMatrix::scaled_identity(3, 2.0), 1.5, 0.2, 2).unwrap();
    let d = waterfill_precoder(&problem, 5).unwrap();
    let g = HermitianMatrix::gram(&d.w, 1.0);
    assert!((g.matrix() - HermitianMatrix::scaled_identity(3, 0.5).matrix()).iter().all(|z| z.norm() < 1e-10));
    assert!((frobenius_norm_sq(&d.w) - 1.5).abs() < 1e-8);

    let v = CMatrix::from_column_slice(3, 1, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]);
    let rank1 = HermitianMatrix::outer(&v.column(0).into_owned(), 4.0);
    let problem = SensingProblem::new(rank1, 2.0, 0.5, 1).unwrap();
    let d = waterfill_precoder(&problem, 4).unwrap();
    let g = HermitianMatrix::gram(&d.w, 1.0);
    let expected = HermitianMatrix::outer(&v.column(0).into_owned(), 2.0);
    assert!((g.matrix() - expected.matrix()).iter().all(|z| z.norm() < 1e-10));
}

#[test]
fn waterfill_minimises_the_jensen_bound() {
    let mut rng = SeededRng::new(6, 0).rng();
    let r = random_correlation(4, 3, &mut rng);
    let problem = SensingProblem::at_snr_db(r, 2.0, 3.0, 3).unwrap();
    let d = waterfill_precoder(&problem, 8).unwrap();
    for _ in 0..1000 {
        let w = random_precoder(4, 2.0 * rng.random_range(0.1..1.0), &mut rng);
        assert!(d.objective <= jensen_bound(&problem, &w, 8) * (1.0 + 1e-12));
    }
}

#[test]
fn data_dependent_on_orthogonal_codebook_matches_waterfilling() {
    let r = exponential_correlation(4, 0.8, 2).unwrap();
    let problem = SensingProblem::at_snr_db(r, 1.0, 0.0, 2).unwrap();
    let s = haar_semiunitary(4, 7, &mut SeededRng::new(7, 0).rng()).unwrap() * C64::new(7f64.sqrt(), 0.0);
    let dd = data_dependent_precoder(&problem, &s, true).unwrap();
    let wf = waterfill_precoder(&problem, 7).unwrap();
    assert!((dd.objective - wf.objective).abs() < 1e-10 * wf.objective);
    assert!(!dd.flagged);
}

#[test]
fn data_dependent_scalar_case() {
    let (r, p, noise, ns) = (1.7, 2.5, 0.4, 3usize);
    let problem = SensingProblem::new(HermitianMatrix::scaled_identity(1, r), p, noise, ns).unwrap();
    let s = sample_gaussian_matrix(1, 5, 1.0, &mut SeededRng::new(8, 0).rng()).unwrap();
    let energy = frobenius_norm_sq(&s);
    let dd = data_dependent_precoder(&problem, &s, true).unwrap();
    assert!((frobenius_norm_sq(&dd.w) - p).abs() < 1e-10);
    let expected = 1.0 / (1.0 / r + p * energy / (noise * ns as f64));
    assert!((dd.objective - expected).abs() < 1e-12 * expected);
}

#[test]
fn data_dependent_is_certified_and_beats_alternatives() {
    let mut rng = SeededRng::new(9, 0).rng();
    for _ in 0..5 {
        let r = random_correlation(3, 2, &mut rng);
        let problem = SensingProblem::at_snr_db(r, 1.0, 5.0, 2).unwrap();
        let s = sample_gaussian_matrix(3, 3, 1.0, &mut rng).unwrap();
        let a = HermitianMatrix::gram(&s, 1.0);
        let dd = data_dependent_precoder(&problem, &s, true).unwrap();
        assert!(!dd.flagged);
        assert!((frobenius_norm_sq(&dd.w) - 1.0).abs() < 1e-8);
        let wf = waterfill_precoder(&problem, 3).unwrap();
        assert!(dd.objective <= problem.xi(&wf.w, &a) + 1e-8);
        for _ in 0..200 {
            let w = random_precoder(3, 1.0, &mut rng);
            assert!(dd.objective <= problem.xi(&w, &a) + 1e-8);
        }
        // Independent projected-gradient runs from random starts.
        for _ in 0..3 {
            let start = random_precoder(3, 1.0, &mut rng);
            let (_, f) = minimize_xi_over_ball(&problem, &a, &start, 3000);
            assert!(dd.objective <= f * (1.0 + 1e-6));
        }
    }
}

#[test]
fn batch_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(10, 0).rng();
    let r = random_correlation(3, 2, &mut rng);
    let problem = SensingProblem::at_snr_db(r, 1.0, 5.0, 2).unwrap();
    let draws: Vec<CMatrix> = (0..4).map(|_| sample_gaussian_matrix(3, 5, 1.0, &mut rng).unwrap()).collect();
    let w = random_precoder(3, 1.0, &mut rng);
    let (_, g) = batch_gradient(&problem, &w, &draws);
    for _ in 0..5 {
        let d = random_precoder(3, 1.0, &mut rng);
        let h = 1e-6;
        let fp = batch_gradient(&problem, &(&w + &d * C64::new(h, 0.0)), &draws).0;
        let fm = batch_gradient(&problem, &(&w - &d * C64::new(h, 0.0)), &draws).0;
        let fd = (fp - fm) / (2.0 * h);
        let analytic: f64 = g.iter().zip(d.iter()).map(|(gi, di)| (gi.conj() * di).re).sum();
        assert!((fd - analytic).abs() < 1e-4 * analytic.abs().max(1e-8), "{fd} vs {analytic}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn error_is_unitarily_invariant(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 0).rng();
        let r = random_correlation(3, 2, &mut rng);
        let problem = SensingProblem::at_snr_db(r, 1.0, 3.0, 2).unwrap();
        let w = random_precoder(3, 1.0, &mut rng);
        let s = sample_gaussian_matrix(3, 4, 1.0, &mut rng).unwrap();
        let v = haar_semiunitary(4, 4, &mut rng).unwrap();
        let a = problem.xi(&w, &HermitianMatrix::gram(&s, 1.0));
        let b = problem.xi(&w, &HermitianMatrix::gram(&(&s * v), 1.0));
        prop_assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn jensen_gap_is_nonnegative_per_precoder(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 1).rng();
        let r = random_correlation(3, 2, &mut rng);
        let problem = SensingProblem::at_snr_db(r, 1.0, 0.0, 2).unwrap();
        let w = random_precoder(3, 1.0, &mut rng);
        let sampler = CodebookSampler::new(CodebookKind::Gaussian, 3, 5).unwrap();
        let est = elmmse(&problem, &w, &sampler, 200, SeededRng::new(seed, 2)).unwrap();
        prop_assert!(est.mean + 3.0 * est.std_error >= jensen_bound(&problem, &w, 5));
    }
}

fn small_sgd(iterations: usize) -> SgdConfig {
    SgdConfig { iterations, pilot_iterations: iterations / 4, checkpoint_every: 100, validation_draws: 256, ..SgdConfig::default() }
}

#[test]
fn sgd_with_orthogonal_codebook_stays_at_waterfilling() {
    let r = exponential_correlation(3, 0.9, 2).unwrap();
    let problem = SensingProblem::at_snr_db(r, 1.0, 5.0, 2).unwrap();
    let sampler = CodebookSampler::new(CodebookKind::Semiunitary, 3, 4).unwrap();
    let out = data_independent_precoder(&problem, &sampler, &small_sgd(400), SeededRng::new(11, 0)).unwrap();
    let wf = waterfill_precoder(&problem, 4).unwrap();
    assert!((out.design.objective - wf.objective).abs() < 1e-4 * wf.objective);
    assert!((frobenius_norm_sq(&out.design.w) - 1.0).abs() < 1e-8);
}

#[test]
fn precoder_ordering_with_gaussian_codebook() {
    let r = exponential_correlation(4, 0.9, 2).unwrap();
    let setup = SweepSetup {
        r_h: r,
        power: 1.0,
        rx_antennas: 2,
        sampler: CodebookSampler::new(CodebookKind::Gaussian, 4, 4).unwrap(),
        n_mc: 400,
        sgd: small_sgd(2000),
        certify: false,
    };
    let rows = snr_sweep(&setup, &[10.0], &SCHEME_NAMES, SeededRng::new(12, 0)).unwrap();
    let row = &rows[0];
    let (wf, dd, di) = (row.scheme("wf").unwrap(), row.scheme("dd").unwrap(), row.scheme("di").unwrap());
    // Per-instance optimality on every draw.
    for k in 0..setup.n_mc {
        assert!(dd.values[k] <= wf.values[k] + 1e-9 && dd.values[k] <= di.values[k] + 1e-9);
    }
    assert!(di.estimate.mean <= wf.estimate.mean - 3.0 * paired_std_error(wf, di), "di {} wf {}", di.estimate.mean, wf.estimate.mean);
    assert!(row.sgd_step_constant.is_some());
}

#[test]
fn registry_and_rejections() {
    for name in SCHEME_NAMES {
        assert_eq!(scheme_by_name(name, &SgdConfig::default(), false).unwrap().name(), name);
    }
    assert!(scheme_by_name("zf", &SgdConfig::default(), false).is_none());
    assert!(CodebookSampler::new(CodebookKind::Semiunitary, 4, 3).is_err());
    let r = exponential_correlation(2, 0.5, 1).unwrap();
    assert!(SensingProblem::new(r.clone(), -1.0, 1.0, 1).is_err());
    assert!(SensingProblem::new(r.clone(), 1.0, 0.0, 1).is_err());
    let problem = SensingProblem::new(r, 1.0, 1.0, 1).unwrap();
    let sampler = CodebookSampler::new(CodebookKind::Gaussian, 2, 2).unwrap();
    assert!(elmmse(&problem, &CMatrix::identity(2, 2), &sampler, 1, SeededRng::new(0, 0)).is_err());
    assert!(exponential_correlation(2, 1.0, 1).is_err());
    let unused = DataIndependent::default();
    assert!(unused.precoder(&problem, &CMatrix::identity(2, 2)).is_err());
}
