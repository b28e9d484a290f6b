use detdecoy::baselines::DecoyIntensities;
use detdecoy::physmodel::ExperimentParams;
use detdecoy::simulator::{
    run_frames, run_scenario, tamper_sequence, Attack, NoiseModel, SettingCounts, SimScenario,
    SourceMode,
};

fn scenario(n_frames: u64, seed: u64) -> SimScenario {
    let params = ExperimentParams {
        distance_km: 20.0,
        ..Default::default()
    };
    SimScenario::new(params, n_frames, seed)
}

#[test]
fn postselection_matches_series_within_five_sigma() {
    let run = run_scenario(&scenario(10_000_000, 11)).unwrap();
    for (est, truth) in run.estimates.iter().zip(&run.truth.settings) {
        let z = (est.p - truth.p) / est.p_se;
        assert!(z.abs() < 5.0, "eta = {}: z = {z}", truth.eta);
        // default multipliers are identical for every frame, so omega is exact
        assert_eq!(est.omega_t_se, 0.0);
        assert!((est.omega_t - truth.omega_t).abs() < 1e-12);
    }
}

#[test]
fn omega_converges_with_distinct_multipliers() {
    let mut s = scenario(2_000_000, 12);
    s.noise.delta_omega = Some(3.0);
    let run = run_scenario(&s).unwrap();
    for (est, truth) in run.estimates.iter().zip(&run.truth.settings) {
        for (value, se, exact) in [
            (est.omega_t, est.omega_t_se, truth.omega_t),
            (est.omega_w, est.omega_w_se, truth.omega_w),
        ] {
            assert!(se > 0.0);
            assert!(((value - exact) / se).abs() < 5.0, "eta = {}", truth.eta);
        }
    }
}

#[test]
fn unit_multipliers_give_unit_omega() {
    let mut s = scenario(200_000, 3);
    s.noise = NoiseModel {
        zeta_t: 0.0,
        zeta_w: 0.0,
        delta_omega: Some(1.0),
    };
    let run = run_scenario(&s).unwrap();
    for est in &run.estimates {
        assert_eq!(est.omega_t, 1.0);
        assert_eq!(est.omega_w, 1.0);
    }
}

#[test]
fn vacuum_setting_only_sees_dark_coincidences() {
    let params = ExperimentParams {
        // p_d close to 0.1 with the default frame
        dark_rate: 2.5e8,
        ..Default::default()
    };
    let pd = params.p_dark();
    let mut s = SimScenario::new(params, 3_000_000, 5);
    s.source = SourceMode::SourceDecoy(DecoyIntensities::two(0.1, 0.03, 0.0));
    let run = run_scenario(&s).unwrap();
    let vacuum = &run.estimates[2];
    let expected = pd * pd * s.sift_prob;
    let se = (expected * (1.0 - expected) / run.counts[2].frames as f64).sqrt();
    assert!((vacuum.sifted_rate - expected).abs() < 5.0 * se);
    assert_eq!(run.counts[2].frames_by_n[0], run.counts[2].frames);
    assert_eq!(run.counts[2].single_postselected, 0);
}

#[test]
fn error_shrinks_like_inverse_root_n() {
    let rms = |n: u64| -> f64 {
        let seeds = 16;
        let total: f64 = (0..seeds)
            .map(|seed| {
                let run = run_scenario(&scenario(n, 1000 + seed)).unwrap();
                (run.estimates[0].p - run.truth.settings[0].p).powi(2)
            })
            .sum();
        (total / seeds as f64).sqrt()
    };
    let ratio = rms(100_000) / rms(400_000);
    // expected 2 for 1/sqrt(N)
    assert!((1.0..=4.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn bit_identical_across_chunkings_and_threads() {
    let s = scenario(150_001, 99);
    let whole = run_frames(&s, 0, s.n_frames).unwrap();
    let mut pieces = vec![SettingCounts::default(); 2];
    for (a, b) in [(0, 7), (7, 40_000), (40_000, 131_072), (131_072, 150_001)] {
        for (total, c) in pieces.iter_mut().zip(run_frames(&s, a, b).unwrap()) {
            total.frames += c.frames;
            total.coincidences += c.coincidences;
            total.postselected += c.postselected;
            total.single_postselected += c.single_postselected;
            for k in 0..c.frames_by_n.len() {
                total.frames_by_n[k] += c.frames_by_n[k];
                total.alice_clicks_by_n[k] += c.alice_clicks_by_n[k];
            }
        }
    }
    assert_eq!(whole, pieces);

    let reference = run_scenario(&s).unwrap();
    assert_eq!(reference.counts, whole);
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let run = pool.install(|| run_scenario(&s)).unwrap();
        assert_eq!(run, reference, "threads = {threads}");
    }
}

#[test]
fn eve_cannot_touch_alice() {
    let honest = scenario(300_000, 17);
    let baseline = run_scenario(&honest).unwrap();
    for attack in Attack::ALL {
        let mut s = honest.clone();
        s.tamper_beta = Some(tamper_sequence(attack, 1.0, &s.params).unwrap());
        let run = run_scenario(&s).unwrap();
        for (a, b) in run.counts.iter().zip(&baseline.counts) {
            assert_eq!(a.frames_by_n, b.frames_by_n, "{attack}");
            assert_eq!(a.alice_clicks_by_n, b.alice_clicks_by_n, "{attack}");
        }
        assert_ne!(run.counts, baseline.counts, "{attack} should change Bob's side");
    }
}

#[test]
fn truth_is_analytic() {
    let mut s = scenario(1, 0);
    s.tamper_beta = Some(tamper_sequence(Attack::BoostMultiphoton, 0.4, &s.params).unwrap());
    let a = run_scenario(&s).unwrap().truth;
    let b = detdecoy::simulator::exact_truth(&s).unwrap();
    assert_eq!(a, b);
    let obs = detdecoy::simulator::expected_observables(
        &s.params,
        s.tamper_beta.as_deref(),
        &s.noise,
    )
    .unwrap();
    assert_eq!(obs.p_eta1, a.settings[0].p);
    assert_eq!(obs.omega_w_eta2, a.settings[1].omega_w);
}
