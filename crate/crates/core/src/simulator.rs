//! Frame-level Monte Carlo with hidden ground truth.
//!
//! Every frame draws a source/attenuator setting, a pair number, Alice's and
//! Bob's clicks and the basis match, in that order, from five uniforms. The
//! uniforms of frame `i` come from a fixed position of a single ChaCha stream,
//! so the outcome of each frame depends only on `(seed, i)`. Frames are
//! processed in chunks, possibly in parallel, and the integer tallies are
//! summed; the result is bit-identical for any chunking or thread count.
//!
//! Eve acts only through Bob's click probabilities (`tamper_beta`) and the
//! excess-noise factors. Alice's detection is never touched.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{DecoyIntensities, IntensityObservation};
use crate::bounds::{ChannelObservables, ObservableErrors};
use crate::error::{check_probability, domain, Error, Result};
use crate::physmodel::{beta_click, series_cap, ClickModel, ExperimentParams};

/// Length of generated `beta_n` tables; later entries repeat the last one.
pub const BETA_TABLE_LEN: usize = 64;
/// Photon-number buckets kept in the per-setting tallies; the last bucket
/// collects everything at or above it.
pub const N_BUCKETS: usize = 16;

const CHUNK_FRAMES: u64 = 1 << 15;
/// Five `f64` draws per frame, two 32-bit words each.
const WORDS_PER_FRAME: u128 = 10;

/// Excess noise injected into the noise multipliers.
///
/// Postselected single-pair frames carry the multiplier `1 + zeta_x`; every
/// other postselected frame carries `delta_omega_x`, which defaults to
/// `1 + zeta_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub zeta_t: f64,
    pub zeta_w: f64,
    pub delta_omega: Option<f64>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        let zeta = zeta_from_broadening(30e-12, 10e-12);
        Self {
            zeta_t: zeta,
            zeta_w: zeta,
            delta_omega: None,
        }
    }
}

/// Excess-noise factor for a correlation-time broadening `delta_sigma`:
/// `((sigma_cor + delta_sigma) / sigma_cor)^2 - 1`.
pub fn zeta_from_broadening(sigma_cor: f64, delta_sigma: f64) -> f64 {
    ((sigma_cor + delta_sigma) / sigma_cor).powi(2) - 1.0
}

impl NoiseModel {
    pub fn delta_omega_t(&self) -> f64 {
        self.delta_omega.unwrap_or(1.0 + self.zeta_t)
    }

    pub fn delta_omega_w(&self) -> f64 {
        self.delta_omega.unwrap_or(1.0 + self.zeta_w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("zeta_t", self.zeta_t), ("zeta_w", self.zeta_w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(name, format!("{v} must be >= 0")));
            }
        }
        if let Some(d) = self.delta_omega {
            if !(d.is_finite() && d >= 0.0) {
                return Err(domain("delta_omega", format!("{d} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Expected multiplier for a postselected population with single-pair
    /// fraction `f`.
    pub fn omega(&self, f: f64) -> (f64, f64) {
        (
            f * (1.0 + self.zeta_t) + self.delta_omega_t() * (1.0 - f),
            f * (1.0 + self.zeta_w) + self.delta_omega_w() * (1.0 - f),
        )
    }
}

/// How Alice varies her statistics between frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SourceMode {
    /// Fixed intensity, attenuator switched between `eta1` and `eta2`.
    DetectorDecoy,
    /// Attenuator fixed at `eta1`, source intensity switched between signal
    /// and decoys (drawn with equal probability).
    SourceDecoy(DecoyIntensities),
}

/// One frame configuration: source intensity and attenuator transmittance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Setting {
    pub mu: f64,
    pub eta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub params: ExperimentParams,
    /// Bob click probabilities `beta_n` indexed from `n = 0`, replacing the
    /// honest channel; `None` means honest.
    pub tamper_beta: Option<Vec<f64>>,
    pub noise: NoiseModel,
    /// Probability that both parties chose the same basis.
    pub sift_prob: f64,
    /// Probability of the `eta1` setting in detector-decoy mode.
    pub eta1_fraction: f64,
    pub source: SourceMode,
    pub n_frames: u64,
    pub seed: u64,
}

impl SimScenario {
    pub fn new(params: ExperimentParams, n_frames: u64, seed: u64) -> Self {
        Self {
            params,
            tamper_beta: None,
            noise: NoiseModel::default(),
            sift_prob: 0.5,
            eta1_fraction: 0.5,
            source: SourceMode::DetectorDecoy,
            n_frames,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.noise.validate()?;
        if self.n_frames == 0 {
            return Err(domain("n_frames", "must be > 0"));
        }
        if !(self.sift_prob > 0.0 && self.sift_prob <= 1.0) {
            return Err(domain("sift_prob", "must be in (0, 1]"));
        }
        if !(self.eta1_fraction > 0.0 && self.eta1_fraction < 1.0) {
            return Err(domain("eta1_fraction", "must be in (0, 1)"));
        }
        if let Some(beta) = &self.tamper_beta {
            if beta.is_empty() {
                return Err(domain("tamper_beta", "empty sequence"));
            }
            for &b in beta {
                check_probability("tamper_beta", b)?;
            }
            let p_dark = self.params.p_dark();
            if beta[0] < p_dark {
                return Err(domain(
                    "tamper_beta",
                    format!("beta_0 = {} below the dark-count floor {p_dark}", beta[0]),
                ));
            }
        }
        if let SourceMode::SourceDecoy(d) = &self.source {
            d.validate_two()?;
        }
        Ok(())
    }

    pub fn settings(&self) -> Vec<Setting> {
        let p = &self.params;
        match self.source {
            SourceMode::DetectorDecoy => vec![
                Setting {
                    mu: p.mu,
                    eta: p.eta1,
                    weight: self.eta1_fraction,
                },
                Setting {
                    mu: p.mu,
                    eta: p.eta2,
                    weight: 1.0 - self.eta1_fraction,
                },
            ],
            SourceMode::SourceDecoy(d) => [d.mu_signal, d.nu1, d.nu2]
                .into_iter()
                .map(|mu| Setting {
                    mu,
                    eta: p.eta1,
                    weight: 1.0 / 3.0,
                })
                .collect(),
        }
    }

    fn beta(&self) -> Option<&[f64]> {
        self.tamper_beta.as_deref()
    }
}

/// Exact expectations at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingTruth {
    pub mu: f64,
    pub eta: f64,
    /// Postselection probability before sifting.
    pub p: f64,
    /// Single-pair fraction of postselected frames.
    pub f: f64,
    pub omega_t: f64,
    pub omega_w: f64,
}

/// Hidden ground truth of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTruth {
    pub beta: Vec<f64>,
    pub settings: Vec<SettingTruth>,
    pub zeta_t: f64,
    pub zeta_w: f64,
    pub delta_omega_t: f64,
    pub delta_omega_w: f64,
}

impl SimTruth {
    pub fn beta1(&self) -> f64 {
        self.beta[1]
    }

    /// Truth at the key-generating setting (`eta1`, or the signal intensity).
    pub fn key_setting(&self) -> &SettingTruth {
        &self.settings[0]
    }
}

/// Exact postselection, single-pair fraction and multiplier expectations at
/// a given intensity and attenuator setting.
pub fn setting_truth(
    params: &ExperimentParams,
    beta_seq: Option<&[f64]>,
    noise: &NoiseModel,
    mu: f64,
    eta: f64,
) -> Result<SettingTruth> {
    let model = params.click_model();
    let p = model.postselection(mu, eta, beta_seq)?;
    let single = mu * (-mu).exp() * model.alpha(1, eta) * model.beta(1, beta_seq);
    let f = if p > 0.0 { single / p } else { 0.0 };
    let (omega_t, omega_w) = noise.omega(f);
    Ok(SettingTruth {
        mu,
        eta,
        p,
        f,
        omega_t,
        omega_w,
    })
}

pub fn exact_truth(scenario: &SimScenario) -> Result<SimTruth> {
    scenario.validate()?;
    let model = scenario.params.click_model();
    let settings = scenario
        .settings()
        .iter()
        .map(|s| setting_truth(&scenario.params, scenario.beta(), &scenario.noise, s.mu, s.eta))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimTruth {
        beta: model.beta_table(scenario.beta(), BETA_TABLE_LEN),
        settings,
        zeta_t: scenario.noise.zeta_t,
        zeta_w: scenario.noise.zeta_w,
        delta_omega_t: scenario.noise.delta_omega_t(),
        delta_omega_w: scenario.noise.delta_omega_w(),
    })
}

/// Noise-free detector-decoy observables of a scenario.
pub fn expected_observables(
    params: &ExperimentParams,
    beta_seq: Option<&[f64]>,
    noise: &NoiseModel,
) -> Result<ChannelObservables> {
    let s1 = setting_truth(params, beta_seq, noise, params.mu, params.eta1)?;
    let s2 = setting_truth(params, beta_seq, noise, params.mu, params.eta2)?;
    Ok(ChannelObservables {
        p_eta1: s1.p,
        p_eta2: s2.p,
        omega_t_eta1: s1.omega_t,
        omega_t_eta2: s2.omega_t,
        omega_w_eta1: s1.omega_w,
        omega_w_eta2: s2.omega_w,
        se: None,
    })
}

/// Noise-free statistics at source intensity `intensity` with the attenuator
/// at `eta1`.
pub fn expected_intensity_observation(
    params: &ExperimentParams,
    beta_seq: Option<&[f64]>,
    noise: &NoiseModel,
    intensity: f64,
) -> Result<IntensityObservation> {
    let s = setting_truth(params, beta_seq, noise, intensity, params.eta1)?;
    Ok(IntensityObservation {
        p: s.p,
        omega_t: s.omega_t,
        omega_w: s.omega_w,
    })
}

/// Integer tallies for one setting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SettingCounts {
    pub frames: u64,
    /// Both parties clicked, before sifting.
    pub coincidences: u64,
    /// Coincidences that survived sifting.
    pub postselected: u64,
    /// Postselected frames with exactly one pair.
    pub single_postselected: u64,
    pub frames_by_n: [u64; N_BUCKETS],
    pub alice_clicks_by_n: [u64; N_BUCKETS],
}

impl SettingCounts {
    fn merge(&mut self, other: &Self) {
        self.frames += other.frames;
        self.coincidences += other.coincidences;
        self.postselected += other.postselected;
        self.single_postselected += other.single_postselected;
        for k in 0..N_BUCKETS {
            self.frames_by_n[k] += other.frames_by_n[k];
            self.alice_clicks_by_n[k] += other.alice_clicks_by_n[k];
        }
    }
}

/// Monte Carlo estimates at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SettingEstimate {
    /// Postselection probability corrected for sifting.
    pub p: f64,
    pub p_se: f64,
    /// Sifted coincidences per frame, without the sifting correction.
    pub sifted_rate: f64,
    pub omega_t: f64,
    pub omega_t_se: f64,
    pub omega_w: f64,
    pub omega_w_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRun {
    pub counts: Vec<SettingCounts>,
    pub estimates: Vec<SettingEstimate>,
    pub truth: SimTruth,
    pub sift_prob: f64,
}

impl SimRun {
    /// Detector-decoy observables with standard errors.
    pub fn channel_observables(&self) -> Result<ChannelObservables> {
        if self.estimates.len() != 2 {
            return Err(Error::Unsupported(
                "channel observables need a detector-decoy scenario".into(),
            ));
        }
        let (a, b) = (&self.estimates[0], &self.estimates[1]);
        Ok(ChannelObservables {
            p_eta1: a.p.min(1.0),
            p_eta2: b.p.min(1.0),
            omega_t_eta1: a.omega_t,
            omega_t_eta2: b.omega_t,
            omega_w_eta1: a.omega_w,
            omega_w_eta2: b.omega_w,
            se: Some(ObservableErrors {
                p_eta1: a.p_se,
                p_eta2: b.p_se,
                omega_t_eta1: a.omega_t_se,
                omega_t_eta2: b.omega_t_se,
                omega_w_eta1: a.omega_w_se,
                omega_w_eta2: b.omega_w_se,
            }),
        })
    }

    /// Per-intensity observations `[signal, nu1, nu2]` of a source-decoy run.
    pub fn decoy_observations(&self) -> Result<[IntensityObservation; 3]> {
        if self.estimates.len() != 3 {
            return Err(Error::Unsupported(
                "decoy observations need a source-decoy scenario".into(),
            ));
        }
        let obs = |e: &SettingEstimate| IntensityObservation {
            p: e.p.min(1.0),
            omega_t: e.omega_t,
            omega_w: e.omega_w,
        };
        Ok([
            obs(&self.estimates[0]),
            obs(&self.estimates[1]),
            obs(&self.estimates[2]),
        ])
    }

    /// Standard errors `[p, omega_t, omega_w]` per setting.
    pub fn standard_errors(&self) -> Vec<[f64; 3]> {
        self.estimates
            .iter()
            .map(|e| [e.p_se, e.omega_t_se, e.omega_w_se])
            .collect()
    }
}

struct FrameTables {
    cum_weights: Vec<f64>,
    /// Poisson CDF per setting.
    cdf: Vec<Vec<f64>>,
    /// Alice click probability per setting and pair number.
    alpha: Vec<Vec<f64>>,
    beta: Vec<f64>,
    sift_prob: f64,
}

impl FrameTables {
    fn new(scenario: &SimScenario, settings: &[Setting], model: &ClickModel) -> Self {
        let max_mu = settings.iter().map(|s| s.mu).fold(0.0, f64::max);
        let len = series_cap(max_mu).max(BETA_TABLE_LEN);
        let mut acc = 0.0;
        let cum_weights = settings
            .iter()
            .map(|s| {
                acc += s.weight;
                acc
            })
            .collect();
        let cdf = settings
            .iter()
            .map(|s| {
                let mut w = (-s.mu).exp();
                let mut c = 0.0;
                (0..len)
                    .map(|n| {
                        c += w;
                        w *= s.mu / (n + 1) as f64;
                        c
                    })
                    .collect()
            })
            .collect();
        let alpha = settings
            .iter()
            .map(|s| (0..len as u32).map(|n| model.alpha(n, s.eta)).collect())
            .collect();
        Self {
            cum_weights,
            cdf,
            alpha,
            beta: model.beta_table(scenario.beta(), len),
            sift_prob: scenario.sift_prob,
        }
    }

    fn pick_setting(&self, u: f64) -> usize {
        let last = self.cum_weights.len() - 1;
        let total = self.cum_weights[last];
        self.cum_weights
            .iter()
            .position(|&c| u * total < c)
            .unwrap_or(last)
    }

    fn pick_pairs(&self, setting: usize, u: f64) -> usize {
        let cdf = &self.cdf[setting];
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    }
}

fn simulate_chunk(
    tables: &FrameTables,
    seed: u64,
    start: u64,
    end: u64,
) -> Vec<SettingCounts> {
    let mut counts = vec![SettingCounts::default(); tables.cum_weights.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(start) * WORDS_PER_FRAME);
    for _ in start..end {
        let u_setting: f64 = rng.gen();
        let u_pairs: f64 = rng.gen();
        let u_alice: f64 = rng.gen();
        let u_bob: f64 = rng.gen();
        let u_sift: f64 = rng.gen();

        let s = tables.pick_setting(u_setting);
        let n = tables.pick_pairs(s, u_pairs);
        let bucket = n.min(N_BUCKETS - 1);
        let c = &mut counts[s];
        c.frames += 1;
        c.frames_by_n[bucket] += 1;
        let alice = u_alice < tables.alpha[s][n];
        if alice {
            c.alice_clicks_by_n[bucket] += 1;
        }
        let bob = u_bob < tables.beta[n];
        if alice && bob {
            c.coincidences += 1;
            if u_sift < tables.sift_prob {
                c.postselected += 1;
                if n == 1 {
                    c.single_postselected += 1;
                }
            }
        }
    }
    counts
}

fn estimate_setting(c: &SettingCounts, sift_prob: f64, noise: &NoiseModel) -> SettingEstimate {
    let frames = c.frames.max(1) as f64;
    let rate = c.postselected as f64 / frames;
    let (omega_t, omega_t_se) = omega_estimate(c, 1.0 + noise.zeta_t, noise.delta_omega_t());
    let (omega_w, omega_w_se) = omega_estimate(c, 1.0 + noise.zeta_w, noise.delta_omega_w());
    SettingEstimate {
        p: rate / sift_prob,
        p_se: (rate * (1.0 - rate) / frames).sqrt() / sift_prob,
        sifted_rate: rate,
        omega_t,
        omega_t_se,
        omega_w,
        omega_w_se,
    }
}

/// Mean multiplier over postselected frames and its binomial standard error.
fn omega_estimate(c: &SettingCounts, single: f64, other: f64) -> (f64, f64) {
    if c.postselected == 0 {
        return (0.0, 0.0);
    }
    let k = c.postselected as f64;
    let k1 = c.single_postselected as f64;
    let f = k1 / k;
    let mean = (k1 * single + (k - k1) * other) / k;
    (mean, (single - other).abs() * (f * (1.0 - f) / k).sqrt())
}

/// Runs the frame loop and returns estimates together with the hidden truth.
pub fn run_scenario(scenario: &SimScenario) -> Result<SimRun> {
    let truth = exact_truth(scenario)?;
    let settings = scenario.settings();
    let model = scenario.params.click_model();
    let tables = FrameTables::new(scenario, &settings, &model);

    let n_chunks = scenario.n_frames.div_ceil(CHUNK_FRAMES);
    let partial: Vec<Vec<SettingCounts>> = (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK_FRAMES;
            let end = (start + CHUNK_FRAMES).min(scenario.n_frames);
            simulate_chunk(&tables, scenario.seed, start, end)
        })
        .collect();
    let mut counts = vec![SettingCounts::default(); settings.len()];
    for chunk in &partial {
        for (total, c) in counts.iter_mut().zip(chunk) {
            total.merge(c);
        }
    }
    let estimates = counts
        .iter()
        .map(|c| estimate_setting(c, scenario.sift_prob, &scenario.noise))
        .collect();
    Ok(SimRun {
        counts,
        estimates,
        truth,
        sift_prob: scenario.sift_prob,
    })
}

/// Tallies for an arbitrary frame range; used to check that the result does
/// not depend on how frames are split into chunks.
pub fn run_frames(scenario: &SimScenario, start: u64, end: u64) -> Result<Vec<SettingCounts>> {
    scenario.validate()?;
    let settings = scenario.settings();
    let model = scenario.params.click_model();
    let tables = FrameTables::new(scenario, &settings, &model);
    Ok(simulate_chunk(&tables, scenario.seed, start, end))
}

/// Canned eavesdropping strategies acting on Bob's click probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    /// Blocks single pairs and forwards multi-pair pulses over a lossless line.
    PnsSuppressSingle,
    /// Pulls every `beta_n` toward the dark-count floor.
    UniformLoss,
    /// Leaves single pairs alone and forwards multi-pair pulses losslessly.
    BoostMultiphoton,
}

impl Attack {
    pub const ALL: [Attack; 3] = [
        Attack::PnsSuppressSingle,
        Attack::UniformLoss,
        Attack::BoostMultiphoton,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Attack::PnsSuppressSingle => "pns-suppress-single",
            Attack::UniformLoss => "uniform-loss",
            Attack::BoostMultiphoton => "boost-multiphoton",
        }
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attack {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attack::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAttack(s.to_string()))
    }
}

/// `beta_n` table (from `n = 0`) for an attack of strength `s` in `[0, 1]`.
/// Strength 0 is the honest channel; every entry stays in `[p_d, 1]`.
pub fn tamper_sequence(attack: Attack, strength: f64, params: &ExperimentParams) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(domain("strength", format!("{strength} is not in [0, 1]")));
    }
    let p_dark = params.p_dark();
    let honest = |n: u32| beta_click(n, params.eta_bob, params.eta_channel(), p_dark);
    let lossless = |n: u32| beta_click(n, params.eta_bob, 1.0, p_dark);
    let mix = |a: f64, b: f64| (1.0 - strength) * a + strength * b;
    let seq = (0..BETA_TABLE_LEN as u32)
        .map(|n| match (attack, n) {
            (_, 0) => p_dark,
            (Attack::PnsSuppressSingle, 1) => mix(honest(1), p_dark),
            (Attack::PnsSuppressSingle | Attack::BoostMultiphoton, _) if n >= 2 => {
                mix(honest(n), lossless(n))
            }
            (Attack::UniformLoss, _) => p_dark + (1.0 - strength) * (honest(n) - p_dark),
            _ => honest(n),
        })
        .map(|b| b.clamp(p_dark, 1.0))
        .collect();
    Ok(seq)
}

/// Looks an attack up by name.
pub fn attack_library(name: &str, strength: f64, params: &ExperimentParams) -> Result<Vec<f64>> {
    tamper_sequence(name.parse()?, strength, params)
}
