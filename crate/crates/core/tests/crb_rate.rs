use isac_core::channels::CommChannel;
use isac_core::crb_rate::*;
use isac_core::Error;
use isac_core::numerics::{
    sample_gaussian_matrix, CMatrix, HermitianMatrix, PgOptions, PsdObjective, SeededRng, C64,
};
use proptest::prelude::*;
use rand::Rng;

fn random_hermitian(m: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let a = sample_gaussian_matrix(m, m, 1.0, rng).unwrap();
    HermitianMatrix::from_symmetrized(&a + a.adjoint())
}

fn random_feasible(m: usize, power: f64, rng: &mut impl Rng) -> HermitianMatrix {
    let a = sample_gaussian_matrix(m, m, 1.0, rng).unwrap();
    let w = HermitianMatrix::gram(&a, 1.0);
    let fill = rng.random_range(0.05..1.0);
    w.scale(fill * power / w.trace())
}

/// Term-by-term evaluation of the affine map, one entry at a time.
fn naive_phi(map: &BfimMap, a: &HermitianMatrix) -> CMatrix {
    let k = map.params();
    let m = map.inputs();
    let am = a.matrix();
    let mut out = map.j_prior().matrix().clone();
    for p in 0..k {
        for q in 0..k {
            let mut s = C64::new(0.0, 0.0);
            for f in map.f_blocks() {
                for i in 0..m {
                    for j in 0..m {
                        s += f[(p, i)] * am[(j, i)] * f[(q, j)].conj();
                    }
                }
            }
            for g in map.g_blocks() {
                for i in 0..m {
                    for j in 0..m {
                        s += g[(p, i)] * am[(i, j)] * g[(q, j)].conj();
                    }
                }
            }
            out[(p, q)] += s;
        }
    }
    out
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(5))]
    #[test]
    fn phi_is_affine(seed in any::<u64>(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let mut rng = SeededRng::new(seed, 0).rng();
        let k = rng.random_range(1..=4);
        let m = rng.random_range(1..=5);
        let map = BfimMap::random(k, m, 2, 2, 0.5, &mut rng).unwrap();
        let a = random_hermitian(m, &mut rng);
        let b = random_hermitian(m, &mut rng);
        let j = map.j_prior();
        let lhs = &phi_apply(&map, &(&a.scale(alpha) + &b.scale(beta))).unwrap() - j;
        let rhs = &(&phi_apply(&map, &a).unwrap() - j).scale(alpha) + &(&phi_apply(&map, &b).unwrap() - j).scale(beta);
        let scale = 1.0 + max_abs(rhs.matrix());
        prop_assert!(max_abs(&(lhs.matrix() - rhs.matrix())) <= 1e-11 * scale);
    }

    #[test]
    fn adjoint_matches_inner_product(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed, 1).rng();
        let map = BfimMap::random(3, 4, 2, 1, 0.1, &mut rng).unwrap();
        let a = random_hermitian(4, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let lhs = map.apply_linear(&a).unwrap().inner(&b);
        let rhs = a.inner(&map.adjoint(&b));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}

#[test]
fn phi_matches_naive_summation() {
    let mut rng = SeededRng::new(11, 0).rng();
    for _ in 0..5 {
        let map = BfimMap::random(3, 4, 2, 3, 0.2, &mut rng).unwrap();
        let a = random_hermitian(4, &mut rng);
        let fast = phi_apply(&map, &a).unwrap();
        assert!(max_abs(&(fast.matrix() - naive_phi(&map, &a))) < 1e-12 * (1.0 + max_abs(fast.matrix())));
    }
}

#[test]
fn phi_trivial_cases() {
    let mut rng = SeededRng::new(3, 0).rng();
    let j = HermitianMatrix::from_real_diagonal(&[0.5, 2.0]);
    let prior = BfimMap::prior_only(j.clone(), 3).unwrap();
    let a = random_hermitian(3, &mut rng);
    assert_eq!(phi_apply(&prior, &a).unwrap(), j);

    let id = BfimMap::new(vec![], vec![CMatrix::identity(3, 3)], HermitianMatrix::zeros(3)).unwrap();
    let out = phi_apply(&id, &a).unwrap();
    assert!(max_abs(&(out.matrix() - a.matrix())) < 1e-15);

    assert!(matches!(phi_apply(&id, &HermitianMatrix::identity(2)), Err(Error::DimensionMismatch(_))));
    let bad = BfimMap::new(vec![CMatrix::zeros(2, 3)], vec![CMatrix::zeros(3, 3)], HermitianMatrix::zeros(2));
    assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
}

#[test]
fn crb_of_sample_scalar_and_scaling() {
    let map = BfimMap::new(vec![], vec![CMatrix::identity(1, 1)], HermitianMatrix::zeros(1)).unwrap();
    let mut rng = SeededRng::new(5, 0).rng();
    let x = sample_gaussian_matrix(1, 7, 2.0, &mut rng).unwrap();
    let energy: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    let rho = energy / 7.0;
    let crb = crb_of_sample(&map, &x, 0.3, None).unwrap();
    assert!((crb - 0.3 / (7.0 * rho)).abs() < 1e-14);

    // Repeating the block keeps R_X and doubles T.
    let doubled = CMatrix::from_fn(1, 14, |_, j| x[(0, j % 7)]);
    let crb2 = crb_of_sample(&map, &doubled, 0.3, None).unwrap();
    assert!((crb2 - crb / 2.0).abs() < 1e-14 * crb);

    let delta = 4.0;
    let prior = BfimMap::prior_only(HermitianMatrix::scaled_identity(3, delta), 2).unwrap();
    let x = sample_gaussian_matrix(2, 5, 1.0, &mut rng).unwrap();
    let v = crb_of_sample(&prior, &x, 2.0, None).unwrap();
    assert!((v - 2.0 / 5.0 * 3.0 / delta).abs() < 1e-14);
}

#[test]
fn singular_information_is_reported_unless_ridged() {
    let map = BfimMap::new(vec![], vec![CMatrix::from_row_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])], HermitianMatrix::zeros(2)).unwrap();
    let x = CMatrix::from_element(1, 4, C64::new(1.0, 0.0));
    assert!(matches!(crb_of_sample(&map, &x, 1.0, None), Err(Error::SingularBfim)));
    let ridged = crb_of_sample(&map, &x, 1.0, Some(1e-3)).unwrap();
    assert!((ridged - 0.25 * (1.0 / 1.001 + 1.0 / 1e-3)).abs() < 1e-9);
    assert!(matches!(
        psc_point(&map, 1.0, 1.0, 4, PscOptions::default(), SeededRng::new(0, 0)),
        Err(Error::SingularBfim)
    ));
}

#[test]
fn semiunitary_signals_reproduce_the_covariance_exactly() {
    let mut rng = SeededRng::new(8, 0).rng();
    let cov = random_feasible(4, 5.0, &mut rng);
    let ens = SignalEnsemble::new(EnsembleKind::SemiunitarySc, &cov, 9).unwrap();
    for s in 0..5 {
        let x = sample_isac_signal(&ens, &mut SeededRng::new(s, 3).rng());
        let rx = HermitianMatrix::gram(&x, 9.0);
        assert!(max_abs(&(rx.matrix() - cov.matrix())) < 1e-12 * cov.trace());
    }
    assert!(SignalEnsemble::new(EnsembleKind::SemiunitarySc, &cov, 3).is_err());
}

#[test]
fn gaussian_signals_match_the_covariance_on_average() {
    let mut rng = SeededRng::new(9, 0).rng();
    let cov = random_feasible(3, 4.0, &mut rng);
    let ens = SignalEnsemble::new(EnsembleKind::GaussianCs, &cov, 4).unwrap();
    let draws: Vec<CMatrix> = (0..10_000)
        .map(|i| HermitianMatrix::gram(&sample_isac_signal(&ens, &mut SeededRng::new(1, i).rng()), 4.0).into_inner())
        .collect();
    for r in 0..3 {
        for c in 0..3 {
            for part in [|z: C64| z.re, |z: C64| z.im] {
                let vals: Vec<f64> = draws.iter().map(|d| part(d[(r, c)])).collect();
                let (mean, se) = mean_and_std_error(&vals);
                let target = part(cov.matrix()[(r, c)]);
                assert!((mean - target).abs() <= 3.0 * se + 1e-12, "entry ({r},{c}): {mean} vs {target} (se {se})");
            }
        }
    }
}

#[test]
fn zero_shaping_gives_zero_signal() {
    let ens = SignalEnsemble::from_shaping(EnsembleKind::GaussianCs, CMatrix::zeros(3, 2), 5).unwrap();
    let x = sample_isac_signal(&ens, &mut SeededRng::new(0, 0).rng());
    assert_eq!(x, CMatrix::zeros(3, 5));
    let ens = SignalEnsemble::new(EnsembleKind::SemiunitarySc, &HermitianMatrix::zeros(2), 1).unwrap();
    assert_eq!(sample_isac_signal(&ens, &mut SeededRng::new(0, 0).rng()), CMatrix::zeros(2, 1));
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(21, 0).rng();
    let map = BfimMap::random(3, 4, 1, 2, 0.1, &mut rng).unwrap();
    let obj = CrbObjective { map: &map, ridge: 0.0 };
    for _ in 0..10 {
        let x = &random_feasible(4, 10.0, &mut rng) + &HermitianMatrix::scaled_identity(4, 0.05);
        let dir = random_hermitian(4, &mut rng);
        let dir = dir.scale(1.0 / dir.frobenius_norm());
        let h = 1e-5;
        let fd = (obj.value(&(&x + &dir.scale(h))).unwrap() - obj.value(&(&x - &dir.scale(h))).unwrap()) / (2.0 * h);
        let analytic = obj.gradient(&x).inner(&dir);
        assert!((fd - analytic).abs() < 1e-5 * analytic.abs().max(1e-3), "fd {fd} vs {analytic}");
    }
}

#[test]
fn psc_scalar_case() {
    let j0 = 0.7;
    let map = BfimMap::new(vec![], vec![CMatrix::identity(1, 1)], HermitianMatrix::scaled_identity(1, j0)).unwrap();
    let p = psc_point(&map, 3.0, 0.5, 8, PscOptions::default(), SeededRng::new(1, 0)).unwrap();
    assert!((p.cov_sc.trace() - 3.0).abs() < 1e-9);
    assert!((p.eps_min - 0.5 / 8.0 / (3.0 + j0)).abs() < 1e-12);
    assert_eq!(p.rank, 1);
}

#[test]
fn psc_isotropic_map_spreads_power_evenly() {
    let m = 4;
    let map = BfimMap::new(vec![], vec![CMatrix::identity(m, m)], HermitianMatrix::zeros(m)).unwrap();
    let p = psc_point(&map, 8.0, 1.0, 16, PscOptions::default(), SeededRng::new(2, 0)).unwrap();
    let target = HermitianMatrix::scaled_identity(m, 2.0);
    assert!(max_abs(&(p.cov_sc.matrix() - target.matrix())) < 1e-6);
    assert!((p.eps_min - 1.0 / 16.0 * m as f64 / 2.0).abs() < 1e-9);

    // Diagonal read-out: only the diagonal is pinned down.
    let diag: Vec<CMatrix> = (0..m).map(|i| CMatrix::from_fn(1, m, |_, j| C64::new(f64::from(u8::from(i == j)), 0.0))).collect();
    let rows: Vec<CMatrix> = diag.iter().enumerate().map(|(i, d)| CMatrix::from_fn(m, m, |r, c| if r == i { d[(0, c)] } else { C64::new(0.0, 0.0) })).collect();
    let map = BfimMap::new(vec![], rows, HermitianMatrix::zeros(m)).unwrap();
    let p = psc_point(&map, 8.0, 1.0, 16, PscOptions::default(), SeededRng::new(2, 0)).unwrap();
    for i in 0..m {
        assert!((p.cov_sc.matrix()[(i, i)].re - 2.0).abs() < 1e-6);
    }
}

#[test]
fn psc_beats_random_feasible_covariances() {
    let mut rng = SeededRng::new(31, 0).rng();
    let map = BfimMap::random(2, 3, 1, 1, 0.1, &mut rng).unwrap();
    let (noise, t, power) = (0.8, 10, 5.0);
    let p = psc_point(&map, power, noise, t, PscOptions::default(), SeededRng::new(31, 1)).unwrap();
    assert!(p.kkt_residual < 1e-6, "kkt {}", p.kkt_residual);
    for _ in 0..1000 {
        let r = random_feasible(3, power, &mut rng);
        let v = noise / t as f64 * trace_inverse(&phi_apply(&map, &r).unwrap()).unwrap();
        assert!(p.eps_min <= v * (1.0 + 1e-9));
    }
}

#[test]
fn psc_restarts_agree_on_random_instances() {
    for seed in 0..8 {
        let sc = CrbScenario::random(&ScenarioRanges::default(), 16, SeededRng::new(seed, 0)).unwrap();
        let p = psc_point(&sc.map, sc.power, sc.noise_s, 16, PscOptions::default(), SeededRng::new(seed, 1)).unwrap();
        assert!(p.converged);
        assert_eq!(p.restart_values.len(), 5);
        assert!(p.restart_spread() < 1e-8, "seed {seed}: spread {}", p.restart_spread());
        assert!(p.kkt_residual < 1e-6, "seed {seed}: kkt {}", p.kkt_residual);
        assert!(!p.ridge_continuation);
    }
}

#[test]
fn semiunitary_ensemble_attains_eps_min_with_zero_variance() {
    let sc = CrbScenario::random(&ScenarioRanges::default(), 12, SeededRng::new(77, 0)).unwrap();
    let p = psc_point(&sc.map, sc.power, sc.noise_s, 12, PscOptions::default(), SeededRng::new(77, 1)).unwrap();
    let ens = SignalEnsemble::new(EnsembleKind::SemiunitarySc, &p.cov_sc, 12).unwrap();
    let mc = miller_chang_crb(&sc.map, &ens, sc.noise_s, 64, SeededRng::new(77, 2)).unwrap();
    assert!((mc.mean - p.eps_min).abs() < 1e-12 * p.eps_min);
    assert!(mc.std_error < 1e-13 * p.eps_min);
}

#[test]
fn c0_examples() {
    let direct = -0.5 + (2.0 * std::f64::consts::PI.sqrt()).ln();
    assert!((c0_nats(1, 1) - direct).abs() < 1e-14);
    assert_eq!(c0_nats(0, 10), 0.0);
    for m in [1, 4] {
        assert!(c0_nats(m, 2048).abs() < c0_nats(m, 64).abs() / 10.0, "M = {m}");
    }
    // For M >= 2 a ln(T)/T term slows the decay; M = 2 lands just short of 10x.
    let ratio = c0_nats(2, 64) / c0_nats(2, 2048);
    assert!((ratio - 9.5278).abs() < 1e-3, "{ratio}");
}

#[test]
fn psc_rate_flags_and_zero_rank() {
    let h = CommChannel::new(CMatrix::identity(2, 2), 0.01).unwrap();
    let zero = psc_rate(&HermitianMatrix::zeros(2), std::slice::from_ref(&h), 8).unwrap();
    assert_eq!(zero.rate_bits, 0.0);
    assert_eq!(zero.c0_nats, 0.0);

    let full = psc_rate(&HermitianMatrix::scaled_identity(2, 5.0), std::slice::from_ref(&h), 8).unwrap();
    assert!(!full.pseudo_det && !full.low_snr);
    let expected = ((1.0 - 2.0 / 16.0) * 2.0 * 500f64.ln() + c0_nats(2, 8)) / std::f64::consts::LN_2;
    assert!((full.rate_bits - expected).abs() < 1e-12);

    let rank1 = psc_rate(&HermitianMatrix::from_real_diagonal(&[5.0, 0.0]), std::slice::from_ref(&h), 8).unwrap();
    assert!(rank1.pseudo_det);
    assert_eq!(rank1.rank, 1);

    let noisy = CommChannel::new(CMatrix::identity(2, 2), 1.0).unwrap();
    assert!(psc_rate(&HermitianMatrix::scaled_identity(2, 5.0), &[noisy], 8).unwrap().low_snr);
    assert!(psc_rate(&HermitianMatrix::scaled_identity(2, 5.0), &[h], 1).is_err());
}

#[test]
fn pcs_bounds_ratio_and_rejection() {
    let sc = CrbScenario::random(&ScenarioRanges::default(), 8, SeededRng::new(4, 0)).unwrap();
    let comm = CommModel::Fixed(sc.comm.clone());
    let p = pcs_point(&sc.map, &comm, sc.power, sc.noise_s, 8, 500, SeededRng::new(4, 1)).unwrap();
    let dof = sc.map.params().min(p.rank);
    assert!((p.eps_upper / p.eps_lower - 8.0 / (8 - dof) as f64).abs() < 1e-12);
    assert!(p.within_bounds);

    let map = BfimMap::random(3, 3, 1, 1, 0.1, &mut SeededRng::new(5, 0).rng()).unwrap();
    let comm = CommModel::Fixed(CommChannel::new(CMatrix::identity(3, 3), 1e-3).unwrap());
    assert!(matches!(pcs_point(&map, &comm, 3.0, 1.0, 3, 10, SeededRng::new(0, 0)), Err(Error::Undefined(_))));
    assert!(pcs_point(&map, &comm, 3.0, 1.0, 4, 10, SeededRng::new(0, 0)).is_ok());
}

#[test]
fn high_snr_capacity_covariance_has_channel_rank() {
    let mut rng = SeededRng::new(6, 0).rng();
    for rows in 1..=4 {
        let h = sample_gaussian_matrix(rows, 5, 1.0, &mut rng).unwrap();
        let comm = CommModel::Fixed(CommChannel::new(h, 1e-6).unwrap());
        let (cov, _) = capacity_covariance(&comm, 10.0).unwrap();
        assert_eq!(cov.eig().rank(RANK_TOL), rows);
    }
}

#[test]
fn gaussian_mc_approaches_jensen_bound_for_long_blocks() {
    let sc = CrbScenario::random(&ScenarioRanges::default(), 4096, SeededRng::new(12, 0)).unwrap();
    let comm = CommModel::Fixed(sc.comm.clone());
    let p = pcs_point(&sc.map, &comm, sc.power, sc.noise_s, 4096, 200, SeededRng::new(12, 1)).unwrap();
    assert!(p.eps_mc.mean >= p.eps_lower - 3.0 * p.eps_mc.std_error);
    assert!((p.eps_mc.mean - p.eps_lower) / p.eps_lower < 0.01);
}

#[test]
fn jensen_sandwich_on_random_instances() {
    for seed in 0..20 {
        let t = [8, 32][seed as usize % 2];
        let sc = CrbScenario::random(&ScenarioRanges::default(), t, SeededRng::new(seed, 0)).unwrap();
        let comm = CommModel::Fixed(sc.comm.clone());
        let p = pcs_point(&sc.map, &comm, sc.power, sc.noise_s, t, 1000, SeededRng::new(seed, 1)).unwrap();
        assert!(p.within_bounds, "seed {seed}: {} not in [{}, {}] (se {})", p.eps_mc.mean, p.eps_lower, p.eps_upper, p.eps_mc.std_error);
    }
}

#[test]
fn ergodic_model_and_worker_independence() {
    let map = BfimMap::random(2, 3, 1, 1, 0.1, &mut SeededRng::new(13, 0).rng()).unwrap();
    let comm = CommModel::Ergodic {
        rows: 2,
        tx_cov: HermitianMatrix::identity(3),
        noise_var: 0.5,
        samples: 64,
        rng: SeededRng::new(13, 1),
    };
    let (cov, rate) = capacity_covariance(&comm, 6.0).unwrap();
    assert!((cov.trace() - 6.0).abs() < 1e-8);
    let iso = HermitianMatrix::scaled_identity(3, 2.0);
    let chans = comm.realizations().unwrap();
    let iso_rate: f64 = chans
        .iter()
        .map(|c| isac_core::numerics::log2_det_identity_plus(&iso.congruence(c.matrix()).scale(1.0 / c.noise_var())))
        .sum::<f64>()
        / chans.len() as f64;
    assert!(rate >= iso_rate - 1e-9);

    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| pcs_point(&map, &comm, 6.0, 1.0, 16, 300, SeededRng::new(13, 2)).unwrap().eps_mc.mean)
    };
    assert_eq!(run(1).to_bits(), run(4).to_bits());
}

#[test]
fn pg_options_are_respected() {
    let map = BfimMap::random(2, 2, 1, 1, 0.1, &mut SeededRng::new(14, 0).rng()).unwrap();
    let opts = PscOptions { restarts: 1, pg: PgOptions { max_iters: 1, ..PgOptions::default() } };
    let p = psc_point(&map, 1.0, 1.0, 4, opts, SeededRng::new(0, 0)).unwrap();
    assert_eq!(p.restart_values.len(), 1);
}
