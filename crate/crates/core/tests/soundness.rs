use detdecoy::baselines::{
    infinite_decoy_oracle, one_decoy_bounds, two_decoy_bounds, DecoyIntensities,
};
use detdecoy::bounds::{estimate, BoundVariant};
use detdecoy::infomodel::{secure_key_capacity, InfoModelParams};
use detdecoy::physmodel::ExperimentParams;
use detdecoy::pipeline::capacity_from_bounds;
use detdecoy::simulator::{
    expected_intensity_observation, expected_observables, tamper_sequence, Attack, NoiseModel,
};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn params(mu: f64, distance_km: f64, eta_det: f64, dimension: u32) -> ExperimentParams {
    ExperimentParams {
        mu,
        distance_km,
        eta_alice: eta_det,
        eta_bob: eta_det,
        dimension,
        ..Default::default()
    }
}

fn eta_det() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.045, 0.5, 0.93])
}

fn dimension() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![4u32, 8, 32])
}

fn attack() -> impl Strategy<Value = Attack> {
    prop::sample::select(Attack::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 128,
        rng_seed: RngSeed::Fixed(0x5eed_0002),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn detector_decoy_sound_on_honest_channel(
        mu in 0.01f64..0.3,
        distance in 0.0f64..200.0,
        eta in eta_det(),
        d in dimension(),
    ) {
        let p = params(mu, distance, eta, d);
        let noise = NoiseModel::default();
        let obs = expected_observables(&p, None, &noise).unwrap();
        let est = estimate(&obs, &p, BoundVariant::Rederived).unwrap();
        let truth = infinite_decoy_oracle(&p, None).unwrap();
        prop_assert!(est.f_lb <= truth.f_eta1);
        prop_assert!(est.beta1_lb <= truth.beta1);
        prop_assert!(est.zeta_t_ub >= noise.zeta_t);
        prop_assert!(est.zeta_w_ub >= noise.zeta_w);
    }

    #[test]
    fn detector_decoy_sound_under_attack(
        distance in 0.0f64..150.0,
        attack in attack(),
        strength in 0.0f64..1.0,
        delta_omega in prop::option::of(0.0f64..3.0),
        variant in prop::sample::select(vec![BoundVariant::Rederived, BoundVariant::PaperLiteral]),
    ) {
        let p = params(0.1, distance, 0.93, 8);
        let noise = NoiseModel { delta_omega, ..Default::default() };
        let beta = tamper_sequence(attack, strength, &p).unwrap();
        let obs = expected_observables(&p, Some(&beta), &noise).unwrap();
        let est = estimate(&obs, &p, variant).unwrap();
        let truth = infinite_decoy_oracle(&p, Some(&beta)).unwrap();
        prop_assert!(est.f_lb <= truth.f_eta1 + 1e-15, "{} > {}", est.f_lb, truth.f_eta1);
        prop_assert!(est.zeta_t_ub >= noise.zeta_t - 1e-12);
        prop_assert!(est.zeta_w_ub >= noise.zeta_w - 1e-12);
    }

    #[test]
    fn decoy_baselines_sound_and_ordered(
        mu in 0.05f64..0.3,
        distance in 0.0f64..200.0,
        eta in eta_det(),
        nu1_frac in 0.05f64..0.45,
    ) {
        let p = params(mu, distance, eta, 8);
        let noise = NoiseModel::default();
        let at = |s: f64| expected_intensity_observation(&p, None, &noise, s).unwrap();
        let nu1 = nu1_frac * mu;
        let two = two_decoy_bounds(&[at(mu), at(nu1), at(0.0)], &DecoyIntensities::two(mu, nu1, 0.0), &p).unwrap();
        let one = one_decoy_bounds(&[at(mu), at(nu1)], &DecoyIntensities::one(mu, nu1), &p).unwrap();
        let truth = infinite_decoy_oracle(&p, None).unwrap();
        prop_assert!(one.f_lb <= two.f_lb + 1e-15);
        prop_assert!(two.f_lb <= truth.f_eta1);
        for est in [&one, &two] {
            prop_assert!(est.zeta_t_ub >= noise.zeta_t - 1e-12);
            prop_assert!(est.zeta_w_ub >= noise.zeta_w - 1e-12);
        }
    }

    #[test]
    fn decoy_baselines_sound_under_attack(
        distance in 0.0f64..150.0,
        attack in attack(),
        strength in 0.0f64..1.0,
    ) {
        let p = params(0.1, distance, 0.93, 8);
        let noise = NoiseModel::default();
        let beta = tamper_sequence(attack, strength, &p).unwrap();
        let at = |s: f64| expected_intensity_observation(&p, Some(&beta), &noise, s).unwrap();
        let dec = DecoyIntensities::two(0.1, 0.02, 0.0);
        let two = two_decoy_bounds(&[at(0.1), at(0.02), at(0.0)], &dec, &p).unwrap();
        let one = one_decoy_bounds(&[at(0.1), at(0.05)], &DecoyIntensities::one(0.1, 0.05), &p).unwrap();
        let truth = infinite_decoy_oracle(&p, Some(&beta)).unwrap();
        for est in [&one, &two] {
            prop_assert!(est.f_lb <= truth.f_eta1 + 1e-15);
            prop_assert!(est.zeta_t_ub >= noise.zeta_t - 1e-12);
        }
    }

    #[test]
    fn capacity_from_sound_bounds_never_exceeds_truth(
        distance in 0.0f64..150.0,
        attack in attack(),
        strength in 0.0f64..1.0,
        d in dimension(),
    ) {
        let p = params(0.1, distance, 0.93, d);
        let noise = NoiseModel::default();
        let beta = tamper_sequence(attack, strength, &p).unwrap();
        let obs = expected_observables(&p, Some(&beta), &noise).unwrap();
        let est = estimate(&obs, &p, BoundVariant::Rederived).unwrap();
        let model = InfoModelParams::from(&p);
        let truth = infinite_decoy_oracle(&p, Some(&beta)).unwrap();
        let ideal = secure_key_capacity(truth.f_eta1, noise.zeta_t, noise.zeta_w, &model).unwrap();
        if let Some(bound) = capacity_from_bounds(&est, &model).unwrap() {
            prop_assert!(bound.delta_i <= ideal.delta_i + 1e-9, "{} > {}", bound.delta_i, ideal.delta_i);
        }
    }
}
