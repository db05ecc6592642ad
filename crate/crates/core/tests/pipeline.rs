use exactcomp_core::linalg::{max_abs, singular_values};
use exactcomp_core::io::{mask_flags, mask_matrix, read_matrix, write_matrix, MatrixFile};
use exactcomp_core::perturbation::{basic_e_bounds_check, resolvent_series_check, series_fixture, NoiseModel};
use exactcomp_core::problem::{gen_ground_truth, gen_noise, observe, sample_mask, NoiseSpec, SampleMask};
use exactcomp_core::recovery::{
    ar2_recover, ar_recover_baseline, baseline_coherence, exact_recovery_verdict, RecoveryConfig,
};

#[test]
fn files_round_trip_into_exact_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gen_ground_truth(40, 30, 2, 2, 0.5, 21).unwrap();
    let mask = sample_mask(40, 30, 1.0, 21).unwrap();
    let z = gen_noise(40, 30, NoiseSpec::zero(), 21).unwrap();
    let obs = observe(&gt, &mask, &z).unwrap();
    let (op, mp) = (dir.path().join("observed.txt"), dir.path().join("mask.txt"));
    write_matrix(&op, &MatrixFile::new(obs.observed.clone()).with("eps0", 0.5)).unwrap();
    write_matrix(&mp, &MatrixFile::new(mask_matrix(40, 30, &mask.mask))).unwrap();

    let observed = read_matrix(&op).unwrap();
    assert_eq!(observed.data, obs.observed);
    let flags = mask_flags(&read_matrix(&mp).unwrap().data).unwrap();
    let back = SampleMask::from_flags(40, 30, 1.0, flags).unwrap();
    let eps0: f64 = observed.parse("eps0").unwrap();
    let res = ar2_recover(&observed.data, back.omega_size, &RecoveryConfig::new(eps0, 4, gt.k_a, 0.0)).unwrap();
    assert!(exact_recovery_verdict(&res.a_out, &gt).unwrap().is_exact());
}

#[test]
fn ar2_and_baseline_agree_on_noiseless_full_observation() {
    for seed in 0..4 {
        let gt = gen_ground_truth(60, 45, 3, 2, 1.0, seed).unwrap();
        let res = ar2_recover(&gt.a, 60 * 45, &RecoveryConfig::new(1.0, 3, gt.k_a, 0.0)).unwrap();
        let mu = baseline_coherence(&gt.factors, 3);
        let base = ar_recover_baseline(&gt.a, 1.0, mu, 3, 1.0).unwrap();
        assert_eq!(base.s, 3, "seed {seed}");
        assert_eq!(res.a_out, base.a_out, "seed {seed}");
        assert_eq!(res.a_out, gt.a);
    }
}

#[test]
fn basic_noise_facts_at_n_600() {
    let gt = gen_ground_truth(300, 300, 3, 2, 1.0, 5).unwrap();
    let rep = basic_e_bounds_check(&gt, NoiseModel { varsigma: 1.0, m_param: 1.0 }, 100, 5).unwrap();
    assert!(rep.norm_frequency >= 0.99, "{}", rep.norm_frequency);
    assert!(rep.bernstein_frequency >= 0.95, "{}", rep.bernstein_frequency);
    assert_eq!(rep.cross_frequency, 1.0);
}

#[test]
fn first_moment_series_converges_to_low_rank_change() {
    let (gt, e) = series_fixture(1.0, 0.1, &[0, 1], 77).unwrap();
    let c = resolvent_series_check(&gt, &e, &[0, 1], 1, 40, None).unwrap();
    assert!(c.exact_norm > 0.0);
    assert!(c.relative_errors[39] < 1e-8, "{}", c.relative_errors[39]);
    assert!(c.relative_errors[0] > c.relative_errors[5]);
}

/// This rank-three integer matrix stalls the SVD in its original
/// orientation; the transposed retry must still give an exact factorization.
#[test]
fn stalled_svd_falls_back_to_the_transpose() {
    let gt = gen_ground_truth(500, 500, 3, 2, 1.0, 18035093637052006805).unwrap();
    assert_eq!(gt.factors.rank, 3);
    let back = gt.factors.low_rank(3);
    assert!(max_abs(&(&back - &gt.a)) < 1e-9);
    let sigma = singular_values(&gt.a).unwrap();
    assert!(sigma.iter().zip(gt.sigma()).all(|(x, y)| (x - y).abs() <= 1e-9 * sigma[0]));
}
