use detdecoy::bounds::{
    beta1_lower_bound_raw, click_ratio, decomposition, multiphoton_coefficient, BoundVariant,
};
use detdecoy::physmodel::{
    alpha_click, beta_click, poisson_pn, series_cap, ClickModel, ExperimentParams, TAIL_TOLERANCE,
};
use detdecoy::simulator::{expected_observables, NoiseModel};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed_0001),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn model(eta_alice: f64, eta_bob: f64, eta_channel: f64, p_dark: f64) -> ClickModel {
    ClickModel {
        eta_alice,
        eta_bob,
        eta_channel,
        p_dark,
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn postselection_nondecreasing_in_every_input(
        mu in 0.001f64..1.0,
        eta in 0.0f64..1.0,
        ea in 0.0f64..1.0,
        eb in 0.0f64..1.0,
        et in 0.0f64..1.0,
        pd in 0.0f64..0.01,
        bump in 0.001f64..0.5,
        which in 0usize..6,
    ) {
        let base = model(ea, eb, et, pd);
        let p0 = base.postselection(mu, eta, None).unwrap();
        let up = |x: f64| (x + bump).min(1.0);
        let (mut m, mut mu2, mut eta2) = (base, mu, eta);
        match which {
            0 => mu2 = mu + bump,
            1 => eta2 = up(eta),
            2 => m.eta_alice = up(ea),
            3 => m.eta_bob = up(eb),
            4 => m.eta_channel = up(et),
            _ => m.p_dark = (pd + bump * 0.01).min(0.5),
        }
        let p1 = m.postselection(mu2, eta2, None).unwrap();
        prop_assert!(p1 >= p0 * (1.0 - 1e-14), "{p0} -> {p1}");
    }

    #[test]
    fn stronger_attenuator_setting_postselects_more(
        mu in 0.001f64..1.0,
        eta1 in 0.05f64..1.0,
        frac in 0.0f64..1.0,
        distance in 0.0f64..200.0,
    ) {
        let p = ExperimentParams { mu, eta1, eta2: eta1 * frac * 0.999, distance_km: distance, ..Default::default() };
        let obs = expected_observables(&p, None, &NoiseModel::default()).unwrap();
        prop_assert!(obs.p_eta1 >= obs.p_eta2);
    }

    #[test]
    fn truncated_series_matches_brute_force(
        mu in 0.001f64..3.0,
        eta in 0.0f64..1.0,
        et in 1e-4f64..1.0,
        pd in 0.0f64..1e-3,
    ) {
        let m = model(0.93, 0.93, et, pd);
        let fast = m.postselection(mu, eta, None).unwrap();
        let brute: f64 = (0..500u32)
            .map(|n| poisson_pn(mu, n) * alpha_click(n, eta, 0.93, pd) * beta_click(n, 0.93, et, pd))
            .sum();
        prop_assert!((fast - brute).abs() <= TAIL_TOLERANCE + 1e-13 * brute, "{fast} vs {brute}");
        prop_assert!(series_cap(mu) >= 50);
    }

    #[test]
    fn ratio_condition_peaks_at_two(
        eta1 in 0.01f64..1.0,
        frac in 0.01f64..0.99,
        ea in 0.01f64..1.0,
        n in 2u32..80,
    ) {
        let eta2 = eta1 * frac;
        let pd = 0.0;
        let r2 = click_ratio(2, eta1, eta2, ea, pd);
        let rn = click_ratio(n, eta1, eta2, ea, pd);
        prop_assert!(rn <= r2 * (1.0 + 1e-12));
    }

    #[test]
    fn rederived_variant_never_looser(
        mu in 0.01f64..0.5,
        distance in 0.0f64..200.0,
        eta2 in 0.2f64..0.8,
        dark_rate in 0.0f64..1e5,
    ) {
        let p = ExperimentParams { mu, eta2, distance_km: distance, dark_rate, ..Default::default() };
        let obs = expected_observables(&p, None, &NoiseModel::default()).unwrap();
        let re = beta1_lower_bound_raw(&obs, &p, BoundVariant::Rederived).unwrap();
        let lit = beta1_lower_bound_raw(&obs, &p, BoundVariant::PaperLiteral).unwrap();
        prop_assert!(re >= lit);
    }

    #[test]
    fn two_pair_coefficient_cancels(
        eta1 in 0.05f64..1.0,
        frac in 0.05f64..0.95,
        ea in 0.05f64..1.0,
        pd in 0.0f64..1e-4,
    ) {
        let p = ExperimentParams {
            eta1,
            eta2: eta1 * frac,
            eta_alice: ea,
            dark_rate: pd / ExperimentParams::default().frame_duration(),
            ..Default::default()
        };
        prop_assert!(multiphoton_coefficient(&p, 2).unwrap().abs() < 1e-14);
    }
}

#[test]
fn decomposition_matches_direct_sum() {
    // With the n = 2 term gone, the two-setting difference equals
    // c0 beta_0 + c1 beta_1 + sum_{n>=3} coefficient * beta_n.
    let p = ExperimentParams {
        distance_km: 25.0,
        dark_rate: 1e5,
        ..Default::default()
    };
    let dec = decomposition(&p).unwrap();
    let m = p.click_model();
    let mu = p.mu;
    let lhs = mu.exp()
        * (m.postselection(mu, p.eta1, None).unwrap() / dec.a1
            - m.postselection(mu, p.eta2, None).unwrap() / dec.a2);
    let mut rhs = dec.c0 * m.beta(0, None) + dec.c1 * m.beta(1, None);
    let mut weight = mu;
    for n in 2..80u32 {
        weight *= mu / f64::from(n);
        rhs += weight * multiphoton_coefficient(&p, n).unwrap() * m.beta(n, None);
    }
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs(), "{lhs} vs {rhs}");
}
