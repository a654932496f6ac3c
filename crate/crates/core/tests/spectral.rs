use num_complex::Complex64;
use proptest::prelude::*;

use idp_lab::base_systems::WindowSpec;
use idp_lab::presets;
use idp_lab::process::{sample_trajectory, SampleOptions};
use idp_lab::spectral::{
    atom_at_zero, autocov_empirical, levy_sigma, rajchman_diagnostic, Transform,
};
use idp_lab::suspension::{sample_configuration, EventSet, TestFunction};

#[test]
fn atom_is_found_only_for_the_finite_invariant_spec() {
    for (spec, expected) in [
        (presets::finite_invariant().unwrap(), true),
        (presets::moving_average().unwrap(), false),
    ] {
        let batch = sample_trajectory(&spec, &SampleOptions::new(64, 0.5, 2000, 3)).unwrap();
        let est = autocov_empirical(&batch, Transform::CharExp { lambda: 1.0 }, 30).unwrap();
        let atom = atom_at_zero(&est, 0.05, 3.0).unwrap();
        assert_eq!(atom.detected, expected, "{atom:?}");
    }
}

#[test]
fn atom_test_needs_enough_lags() {
    let batch = sample_trajectory(
        &presets::moving_average().unwrap(),
        &SampleOptions::new(16, 0.5, 200, 3),
    )
    .unwrap();
    let est = autocov_empirical(&batch, Transform::Identity, 10).unwrap();
    assert!(atom_at_zero(&est, 0.05, 3.0).is_err());
}

#[test]
fn empirical_autocovariance_needs_enough_replicates() {
    let batch = sample_trajectory(
        &presets::moving_average().unwrap(),
        &SampleOptions::new(16, 0.5, 50, 3),
    )
    .unwrap();
    assert!(autocov_empirical(&batch, Transform::Identity, 5).is_err());
}

#[test]
fn moving_average_levy_coefficients_vanish_past_the_pulse() {
    let spec = presets::moving_average().unwrap();
    let w = WindowSpec::new(64, 0.5).unwrap();
    let sigma = levy_sigma(&spec, &w, 1.0, 30, 5000, 9).unwrap();
    for k in 2..=30 {
        assert!(sigma.get(k).norm() < 1e-12, "lag {k}: {}", sigma.get(k));
    }
    let r = rajchman_diagnostic(&sigma, 0.05, 3.0);
    assert!(r.decay_pass && r.continuity_pass);
}

#[test]
fn zero_frequency_gives_identically_zero_coefficients() {
    let batch = sample_trajectory(
        &presets::null_recurrent_walk().unwrap(),
        &SampleOptions::new(32, 0.5, 200, 4),
    )
    .unwrap();
    let est = autocov_empirical(&batch, Transform::CharExp { lambda: 0.0 }, 10).unwrap();
    assert!(est
        .coefficients
        .iter()
        .all(|c| *c == Complex64::new(0.0, 0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimates_are_hermitian(seed in any::<u64>(), lambda in -3.0f64..3.0, k in 1i64..10) {
        let batch = sample_trajectory(&presets::null_recurrent_walk().unwrap(), &SampleOptions::new(16, 0.5, 100, seed)).unwrap();
        let est = autocov_empirical(&batch, Transform::CharExp { lambda }, 10).unwrap();
        prop_assert_eq!(est.get(-k), est.get(k).conj());
        prop_assert_eq!(est.se(-k), est.se(k));
        prop_assert!(est.get(0).im.abs() < 1e-12);
        prop_assert!(est.get(0).re >= -1e-12);
    }

    #[test]
    fn charlier_recursion_matches_enumeration(
        seed in any::<u64>(),
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
        c in -1.0f64..1.0,
        n in 1usize..=4,
    ) {
        let spec = presets::moving_average().unwrap();
        let base = spec.singles()[0].base.clone().unwrap();
        let w = WindowSpec::new(5, 0.5).unwrap();
        let conf = sample_configuration(&base, &w, seed).unwrap();
        prop_assume!(conf.len() <= 10);
        let f = TestFunction::real(a, EventSet::exceed(&[0]))
            .plus(Complex64::new(b, c), EventSet::exceed(&[1, 3]))
            .plus(Complex64::new(c, 0.0), EventSet::whole_window());
        let fast = conf.multiple_integral(&base, &f, n).unwrap();
        let brute = conf.multiple_integral_brute(&base, &f, n).unwrap();
        prop_assert!((fast - brute).norm() <= 1e-10 * brute.norm().max(1.0), "{} vs {}", fast, brute);
    }
}
