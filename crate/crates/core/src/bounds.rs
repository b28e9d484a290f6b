//! Detector-decoy estimation chain.
//!
//! Alice switches her attenuator between `eta1` and `eta2`. Because her click
//! probabilities `alpha_n(eta)` are out of Eve's reach, the two postselection
//! probabilities give two linear constraints on Bob's unknown `beta_n`.
//! Dividing each by `alpha_2(eta)` makes the `n = 2` terms cancel exactly;
//! every `n >= 3` term then carries a nonpositive coefficient, which yields a
//! lower bound on `beta_1`. The excess-noise bounds follow from the averaged
//! noise multipliers by dropping the (nonnegative) multiphoton contribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Error, Result};
use crate::physmodel::{series_cap, ExperimentParams};

/// Largest photon number checked for the sign of the multiphoton coefficients.
const RATIO_CHECK_MIN_TERMS: usize = 64;

/// Observables measured at the two attenuator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelObservables {
    pub p_eta1: f64,
    pub p_eta2: f64,
    pub omega_t_eta1: f64,
    pub omega_t_eta2: f64,
    pub omega_w_eta1: f64,
    pub omega_w_eta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<ObservableErrors>,
}

/// Standard errors of each field of [`ChannelObservables`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableErrors {
    pub p_eta1: f64,
    pub p_eta2: f64,
    pub omega_t_eta1: f64,
    pub omega_t_eta2: f64,
    pub omega_w_eta1: f64,
    pub omega_w_eta2: f64,
}

impl ObservableErrors {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            p_eta1: self.p_eta1 * k,
            p_eta2: self.p_eta2 * k,
            omega_t_eta1: self.omega_t_eta1 * k,
            omega_t_eta2: self.omega_t_eta2 * k,
            omega_w_eta1: self.omega_w_eta1 * k,
            omega_w_eta2: self.omega_w_eta2 * k,
        }
    }

    fn as_array(&self) -> [f64; 6] {
        [
            self.p_eta1,
            self.p_eta2,
            self.omega_t_eta1,
            self.omega_t_eta2,
            self.omega_w_eta1,
            self.omega_w_eta2,
        ]
    }
}

impl ChannelObservables {
    pub fn validate(&self) -> Result<()> {
        check_probability("p_eta1", self.p_eta1)?;
        check_probability("p_eta2", self.p_eta2)?;
        for (name, v) in [
            ("omega_t_eta1", self.omega_t_eta1),
            ("omega_t_eta2", self.omega_t_eta2),
            ("omega_w_eta1", self.omega_w_eta1),
            ("omega_w_eta2", self.omega_w_eta2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(name, format!("{v} must be >= 0")));
            }
        }
        if let Some(se) = &self.se {
            if se.as_array().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(domain("se", "standard errors must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// `P(eta1) < P(eta2)` cannot happen in expectation but can under finite
    /// statistics; it is reported, not rejected.
    pub fn ordering_violated(&self) -> bool {
        self.p_eta1 < self.p_eta2
    }

    fn with_values(&self, v: [f64; 6]) -> Self {
        Self {
            p_eta1: v[0],
            p_eta2: v[1],
            omega_t_eta1: v[2],
            omega_t_eta2: v[3],
            omega_w_eta1: v[4],
            omega_w_eta2: v[5],
            se: self.se,
        }
    }

    fn values(&self) -> [f64; 6] {
        [
            self.p_eta1,
            self.p_eta2,
            self.omega_t_eta1,
            self.omega_t_eta2,
            self.omega_w_eta1,
            self.omega_w_eta2,
        ]
    }
}

/// Sign convention for the vacuum term of the single-photon bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    /// Subtracts `c0 * p_d`; `c0 < 0`, so this is the tight bound.
    #[default]
    Rederived,
    /// Adds `c0 * p_d` as in the originally printed expression. Still a valid
    /// lower bound, only looser.
    PaperLiteral,
}

impl std::str::FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rederived" | "re-derived" => Ok(Self::Rederived),
            "paper-literal" | "literal" => Ok(Self::PaperLiteral),
            other => Err(domain("variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// Which raw bounds fell outside `[0, 1]` and were clamped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clamping {
    pub beta1: bool,
    pub f: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimates {
    pub beta1_lb: f64,
    pub beta0_lb: f64,
    pub f_lb: f64,
    /// `+inf` when the single-photon bound vanished and no noise bound exists.
    pub zeta_t_ub: f64,
    pub zeta_w_ub: f64,
    pub variant: BoundVariant,
    pub clamped: Clamping,
    /// Bounds before clamping, with `f_raw` evaluated at `beta1_raw`.
    pub beta1_raw: f64,
    pub f_raw: f64,
}

impl BoundEstimates {
    pub fn zeta_bounded(&self) -> bool {
        self.zeta_t_ub.is_finite() && self.zeta_w_ub.is_finite()
    }
}

/// Coefficients of `beta_0` and `beta_1` in the difference
/// `e^mu P(eta1) / A1 - e^mu P(eta2) / A2`, where `A_i = alpha_2(eta_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// Vacuum coefficient, negative for `eta1 > eta2`.
    pub c0: f64,
    /// Single-photon coefficient, positive for `eta1 > eta2`.
    pub c1: f64,
    pub a1: f64,
    pub a2: f64,
}

struct Geometry {
    mu: f64,
    eta1: f64,
    eta2: f64,
    eta_alice: f64,
    p_dark: f64,
}

impl Geometry {
    fn from_params(params: &ExperimentParams) -> Result<Self> {
        if params.eta1 == params.eta2 {
            return Err(Error::DegenerateSettings(params.eta1));
        }
        params.validate()?;
        Ok(Self {
            mu: params.mu,
            eta1: params.eta1,
            eta2: params.eta2,
            eta_alice: params.eta_alice,
            p_dark: params.p_dark(),
        })
    }

    fn alpha(&self, n: u32, eta: f64) -> f64 {
        crate::physmodel::alpha_click(n, eta, self.eta_alice, self.p_dark)
    }

    /// `alpha_n(eta1) / A1 - alpha_n(eta2) / A2` without the Poisson weight.
    fn coefficient(&self, n: u32) -> f64 {
        self.alpha(n, self.eta1) / self.alpha(2, self.eta1)
            - self.alpha(n, self.eta2) / self.alpha(2, self.eta2)
    }
}

/// Coefficient of `mu^n / n! * beta_n` in the two-setting difference.
/// Exactly zero at `n = 2`; nonpositive for `n >= 3` inside the validity region.
pub fn multiphoton_coefficient(params: &ExperimentParams, n: u32) -> Result<f64> {
    Ok(Geometry::from_params(params)?.coefficient(n))
}

/// `[1-(1-eta1 ea)^n(1-pd)] / [1-(1-eta2 ea)^n(1-pd)]`, the click-ratio whose
/// maximum over `n >= 2` must sit at `n = 2`.
pub fn click_ratio(n: u32, eta1: f64, eta2: f64, eta_alice: f64, p_dark: f64) -> f64 {
    crate::physmodel::alpha_click(n, eta1, eta_alice, p_dark)
        / crate::physmodel::alpha_click(n, eta2, eta_alice, p_dark)
}

/// Validates the settings and returns the vacuum and single-photon coefficients.
pub fn decomposition(params: &ExperimentParams) -> Result<Decomposition> {
    let g = Geometry::from_params(params)?;
    let a1 = g.alpha(2, g.eta1);
    let a2 = g.alpha(2, g.eta2);
    if a2 <= 0.0 || params.eta_alice <= 0.0 {
        return Err(Error::DegenerateSettings(params.eta2));
    }
    let n_max = series_cap(g.mu).max(RATIO_CHECK_MIN_TERMS) as u32;
    if let Some(n) = (3..=n_max).find(|&n| g.coefficient(n) > 0.0) {
        return Err(Error::RatioCondition { n: n as usize });
    }
    let c0 = g.p_dark / a1 - g.p_dark / a2;
    let c1 = g.mu * g.coefficient(1);
    if !(c1 > 0.0) {
        return Err(Error::Invariant(format!(
            "single-photon coefficient c1 = {c1} must be positive"
        )));
    }
    Ok(Decomposition { c0, c1, a1, a2 })
}

/// Unclamped lower bound on `beta_1`.
pub fn beta1_lower_bound_raw(
    obs: &ChannelObservables,
    params: &ExperimentParams,
    variant: BoundVariant,
) -> Result<f64> {
    let dec = decomposition(params)?;
    obs.validate()?;
    let p_dark = params.p_dark();
    let lhs = params.mu.exp() * (obs.p_eta1 / dec.a1 - obs.p_eta2 / dec.a2);
    let vacuum = dec.c0 * p_dark;
    let numerator = match variant {
        BoundVariant::Rederived => lhs - vacuum,
        BoundVariant::PaperLiteral => lhs + vacuum,
    };
    Ok(numerator / dec.c1)
}

/// Lower bound on Bob's single-photon click probability, clamped to `[0, 1]`.
pub fn beta1_lower_bound(
    obs: &ChannelObservables,
    params: &ExperimentParams,
    variant: BoundVariant,
) -> Result<f64> {
    beta1_lower_bound_raw(obs, params, variant).map(|b| b.clamp(0.0, 1.0))
}

fn f_from_beta1(obs: &ChannelObservables, params: &ExperimentParams, beta1: f64) -> Result<f64> {
    if obs.p_eta1 <= 0.0 {
        return Err(Error::NoPostselection(format!("eta1 = {}", params.eta1)));
    }
    let alpha1 = crate::physmodel::alpha_click(1, params.eta1, params.eta_alice, params.p_dark());
    Ok(alpha1 * beta1 * params.mu * (-params.mu).exp() / obs.p_eta1)
}

/// Lower bound on the fraction of postselected events at `eta1` that come from
/// single pairs, clamped to `[0, 1]`.
pub fn f_lower_bound(
    obs: &ChannelObservables,
    params: &ExperimentParams,
    variant: BoundVariant,
) -> Result<f64> {
    let beta1 = beta1_lower_bound(obs, params, variant)?;
    f_from_beta1(obs, params, beta1).map(|f| f.clamp(0.0, 1.0))
}

/// Upper bounds `(zeta_t, zeta_w)` on the excess-noise factors.
///
/// Each is the smallest of three candidates minus one: the difference bound
/// from both settings, and the ratio bound `Omega / F` at each setting. The
/// difference candidate is dropped when its numerator is negative, which only
/// happens with inconsistent (noisy) observables.
pub fn zeta_upper_bounds(
    obs: &ChannelObservables,
    params: &ExperimentParams,
    beta1_lb: f64,
    f_lb: f64,
) -> Result<(f64, f64)> {
    if !(beta1_lb > 0.0) {
        return Err(Error::LooseBound("beta1 lower bound is zero"));
    }
    if !(f_lb > 0.0) {
        return Err(Error::LooseBound("single-photon fraction lower bound is zero"));
    }
    let g = Geometry::from_params(params)?;
    obs.validate()?;
    require_postselection(obs, params)?;
    let alpha1_eta1 = g.alpha(1, g.eta1);
    let alpha1_eta2 = g.alpha(1, g.eta2);
    let diff_denominator =
        (g.eta1 - g.eta2) * g.eta_alice * (1.0 - g.p_dark) * g.mu * beta1_lb;
    let bound = |omega1: f64, omega2: f64| {
        let mut best = f64::INFINITY;
        let numerator = (omega1 * obs.p_eta1 - omega2 * obs.p_eta2) * g.mu.exp();
        if numerator >= 0.0 && diff_denominator > 0.0 {
            best = best.min(numerator / diff_denominator);
        }
        best = best.min(omega1 / f_lb);
        if alpha1_eta2 > 0.0 {
            let ratio =
                alpha1_eta1 * obs.p_eta2 * omega2 / (alpha1_eta2 * obs.p_eta1 * f_lb);
            best = best.min(ratio);
        }
        best - 1.0
    };
    Ok((
        bound(obs.omega_t_eta1, obs.omega_t_eta2),
        bound(obs.omega_w_eta1, obs.omega_w_eta2),
    ))
}

fn require_postselection(obs: &ChannelObservables, params: &ExperimentParams) -> Result<()> {
    if obs.p_eta1 <= 0.0 {
        return Err(Error::NoPostselection(format!("eta1 = {}", params.eta1)));
    }
    if obs.p_eta2 <= 0.0 {
        return Err(Error::NoPostselection(format!("eta2 = {}", params.eta2)));
    }
    Ok(())
}

/// Runs the whole chain. A vanishing single-photon bound is reported as
/// infinite noise bounds rather than an error. A setting without postselected
/// events is an error, since its noise multipliers were never measured.
pub fn estimate(
    obs: &ChannelObservables,
    params: &ExperimentParams,
    variant: BoundVariant,
) -> Result<BoundEstimates> {
    require_postselection(obs, params)?;
    let beta1_raw = beta1_lower_bound_raw(obs, params, variant)?;
    let beta1_lb = beta1_raw.clamp(0.0, 1.0);
    let f_raw = f_from_beta1(obs, params, beta1_raw)?;
    let f_lb = f_from_beta1(obs, params, beta1_lb)?.clamp(0.0, 1.0);
    let (zeta_t_ub, zeta_w_ub) = match zeta_upper_bounds(obs, params, beta1_lb, f_lb) {
        Ok(z) => z,
        Err(Error::LooseBound(_)) => (f64::INFINITY, f64::INFINITY),
        Err(e) => return Err(e),
    };
    Ok(BoundEstimates {
        beta1_lb,
        beta0_lb: params.p_dark(),
        f_lb,
        zeta_t_ub,
        zeta_w_ub,
        variant,
        clamped: Clamping {
            beta1: beta1_raw != beta1_lb,
            f: f_raw != f_lb,
        },
        beta1_raw,
        f_raw,
    })
}

/// Percentile interval of a resampled bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub std_dev: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Percentiles from `samples`, spread from `unclamped`. Clamping piles
    /// samples up at the boundary and would understate the spread there.
    fn from_samples(point: f64, mut samples: Vec<f64>, unclamped: &[f64]) -> Self {
        samples.sort_by(f64::total_cmp);
        let pick = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
        let n = unclamped.len() as f64;
        let std_dev = if unclamped.iter().all(|s| s.is_finite()) {
            let mean = unclamped.iter().sum::<f64>() / n;
            (unclamped.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            point,
            lower: pick(0.025),
            upper: pick(0.975),
            std_dev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundIntervals {
    pub point: BoundEstimates,
    pub beta1_lb: Interval,
    pub f_lb: Interval,
    pub zeta_t_ub: Interval,
    pub zeta_w_ub: Interval,
    pub n_resamples: usize,
}

/// Gaussian resampling of the observables. Each resample draws from its own
/// ChaCha stream (indexed by resample number), so the output depends only on
/// `seed` and not on how the work is scheduled.
pub fn propagate_uncertainty(
    obs: &ChannelObservables,
    params: &ExperimentParams,
    variant: BoundVariant,
    n_resamples: usize,
    seed: u64,
) -> Result<BoundIntervals> {
    let se = obs
        .se
        .ok_or_else(|| Error::Unsupported("observables carry no standard errors".into()))?;
    if n_resamples < 100 {
        return Err(domain("n_resamples", format!("{n_resamples} must be >= 100")));
    }
    let point = estimate(obs, params, variant)?;
    let center = obs.values();
    let sigma = se.as_array();

    let samples: Vec<Result<[f64; 6]>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut v = [0.0; 6];
            for k in 0..6 {
                let z: f64 = StandardNormal.sample(&mut rng);
                v[k] = center[k] + sigma[k] * z;
            }
            v[0] = v[0].clamp(0.0, 1.0);
            v[1] = v[1].clamp(0.0, 1.0);
            for x in &mut v[2..] {
                *x = x.max(0.0);
            }
            let resampled = obs.with_values(v);
            match estimate(&resampled, params, variant) {
                Ok(b) => Ok([b.beta1_lb, b.f_lb, b.zeta_t_ub, b.zeta_w_ub, b.beta1_raw, b.f_raw]),
                Err(Error::NoPostselection(_)) => {
                    Ok([0.0, 0.0, f64::INFINITY, f64::INFINITY, 0.0, 0.0])
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let column = |k: usize| samples.iter().map(|s| s[k]).collect::<Vec<_>>();
    Ok(BoundIntervals {
        point,
        beta1_lb: Interval::from_samples(point.beta1_lb, column(0), &column(4)),
        f_lb: Interval::from_samples(point.f_lb, column(1), &column(5)),
        zeta_t_ub: Interval::from_samples(point.zeta_t_ub, column(2), &column(2)),
        zeta_w_ub: Interval::from_samples(point.zeta_w_ub, column(3), &column(3)),
        n_resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physmodel::{beta_click, postselection_probability};

    fn honest_obs(params: &ExperimentParams, omega: f64) -> ChannelObservables {
        ChannelObservables {
            p_eta1: postselection_probability(params, params.eta1, None).unwrap(),
            p_eta2: postselection_probability(params, params.eta2, None).unwrap(),
            omega_t_eta1: omega,
            omega_t_eta2: omega,
            omega_w_eta1: omega,
            omega_w_eta2: omega,
            se: None,
        }
    }

    fn section_iv(distance_km: f64) -> ExperimentParams {
        ExperimentParams {
            distance_km,
            ..Default::default()
        }
    }

    #[test]
    fn beta1_bound_is_below_honest_value() {
        let params = section_iv(50.0);
        let obs = honest_obs(&params, 1.0);
        let lb = beta1_lower_bound(&obs, &params, BoundVariant::Rederived).unwrap();
        let truth = beta_click(1, params.eta_bob, params.eta_channel(), params.p_dark());
        assert!(lb <= truth, "{lb} > {truth}");
        assert!(lb > 0.95 * truth);
    }

    #[test]
    fn bound_is_tight_for_source_without_three_pair_terms() {
        // p_d = 0 and beta_n = 0 for n >= 3: the tail vanishes, n = 2 cancels.
        let params = ExperimentParams {
            dark_rate: 0.0,
            ..Default::default()
        };
        let beta = [0.0, 0.37, 0.6, 0.0];
        let model = params.click_model();
        let obs = ChannelObservables {
            p_eta1: model.postselection(params.mu, params.eta1, Some(&beta)).unwrap(),
            p_eta2: model.postselection(params.mu, params.eta2, Some(&beta)).unwrap(),
            omega_t_eta1: 1.0,
            omega_t_eta2: 1.0,
            omega_w_eta1: 1.0,
            omega_w_eta2: 1.0,
            se: None,
        };
        let lb = beta1_lower_bound(&obs, &params, BoundVariant::Rederived).unwrap();
        assert!((lb - 0.37).abs() < 1e-9, "{lb}");
    }

    #[test]
    fn equal_settings_are_rejected() {
        let params = ExperimentParams {
            eta2: 1.0,
            ..Default::default()
        };
        let obs = honest_obs(&section_iv(0.0), 1.0);
        for v in [BoundVariant::Rederived, BoundVariant::PaperLiteral] {
            assert_eq!(
                beta1_lower_bound(&obs, &params, v).unwrap_err(),
                Error::DegenerateSettings(1.0)
            );
        }
    }

    #[test]
    fn closed_second_setting_violates_ratio_condition() {
        // With eta2 = 0 Alice's clicks at eta2 are pure dark counts and carry
        // no photon-number information.
        let params = ExperimentParams {
            eta2: 0.0,
            ..Default::default()
        };
        let err = decomposition(&params).unwrap_err();
        assert!(matches!(err, Error::RatioCondition { n: 3 }), "{err:?}");
    }

    #[test]
    fn coefficient_signs() {
        let params = section_iv(0.0);
        let d = decomposition(&params).unwrap();
        assert!(d.c0 < 0.0);
        assert!(d.c1 > 0.0);
        assert_eq!(multiphoton_coefficient(&params, 2).unwrap(), 0.0);
    }

    #[test]
    fn f_bound_below_analytic_truth() {
        let params = section_iv(0.0);
        let obs = honest_obs(&params, 1.0);
        let f = f_lower_bound(&obs, &params, BoundVariant::Rederived).unwrap();
        let alpha1 = crate::physmodel::alpha_click(1, 1.0, 0.93, params.p_dark());
        let beta1 = beta_click(1, 0.93, 1.0, params.p_dark());
        let f_true = params.mu * (-params.mu).exp() * alpha1 * beta1 / obs.p_eta1;
        assert!(f <= f_true && f > 0.9 * f_true, "{f} vs {f_true}");
    }

    #[test]
    fn f_bound_tends_to_one_for_weak_source() {
        let params = ExperimentParams {
            mu: 1e-7,
            dark_rate: 0.0,
            ..Default::default()
        };
        let obs = honest_obs(&params, 1.0);
        let f = f_lower_bound(&obs, &params, BoundVariant::Rederived).unwrap();
        assert!((f - 1.0).abs() < 1e-6, "{f}");
    }

    #[test]
    fn zero_postselection_is_an_error() {
        let params = section_iv(0.0);
        let mut obs = honest_obs(&params, 1.0);
        obs.p_eta1 = 0.0;
        obs.p_eta2 = 0.0;
        assert!(matches!(
            f_lower_bound(&obs, &params, BoundVariant::Rederived),
            Err(Error::NoPostselection(_))
        ));
    }

    #[test]
    fn zeta_guards() {
        let params = section_iv(0.0);
        let obs = honest_obs(&params, 1.0);
        assert!(matches!(
            zeta_upper_bounds(&obs, &params, 0.5, 0.0),
            Err(Error::LooseBound(_))
        ));
        assert!(matches!(
            zeta_upper_bounds(&obs, &params, 0.0, 0.5),
            Err(Error::LooseBound(_))
        ));
    }

    #[test]
    fn zeta_bound_with_unit_multipliers_is_nonnegative() {
        // Omega = F (1 + 0) + 1 (1 - F) = 1 at both settings.
        let params = section_iv(20.0);
        let obs = honest_obs(&params, 1.0);
        let b = estimate(&obs, &params, BoundVariant::Rederived).unwrap();
        assert!(b.zeta_t_ub >= 0.0 && b.zeta_w_ub >= 0.0, "{b:?}");
    }

    #[test]
    fn estimate_flags_clamping() {
        let params = section_iv(0.0);
        let mut obs = honest_obs(&params, 1.0);
        // swap the settings: the difference turns negative
        std::mem::swap(&mut obs.p_eta1, &mut obs.p_eta2);
        assert!(obs.ordering_violated());
        let b = estimate(&obs, &params, BoundVariant::Rederived).unwrap();
        assert!(b.clamped.beta1);
        assert_eq!(b.beta1_lb, 0.0);
        assert!(!b.zeta_bounded());
    }

    #[test]
    fn resampling_requires_errors() {
        let params = section_iv(0.0);
        let obs = honest_obs(&params, 1.0);
        assert!(matches!(
            propagate_uncertainty(&obs, &params, BoundVariant::Rederived, 200, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn zero_errors_give_zero_width() {
        let params = section_iv(10.0);
        let mut obs = honest_obs(&params, 1.5);
        obs.se = Some(ObservableErrors::default());
        let iv = propagate_uncertainty(&obs, &params, BoundVariant::Rederived, 100, 9).unwrap();
        for i in [iv.beta1_lb, iv.f_lb, iv.zeta_t_ub, iv.zeta_w_ub] {
            assert_eq!(i.width(), 0.0);
            assert_eq!(i.lower, i.point);
        }
    }

    #[test]
    fn resampling_widens_with_errors_and_is_deterministic() {
        let params = section_iv(10.0);
        let mut obs = honest_obs(&params, 1.5);
        let se = ObservableErrors {
            p_eta1: obs.p_eta1 * 1e-3,
            p_eta2: obs.p_eta2 * 1e-3,
            omega_t_eta1: 1e-3,
            omega_t_eta2: 1e-3,
            omega_w_eta1: 1e-3,
            omega_w_eta2: 1e-3,
        };
        obs.se = Some(se);
        let a = propagate_uncertainty(&obs, &params, BoundVariant::Rederived, 400, 3).unwrap();
        let again = propagate_uncertainty(&obs, &params, BoundVariant::Rederived, 400, 3).unwrap();
        assert_eq!(a, again);
        obs.se = Some(se.scaled(2.0));
        let b = propagate_uncertainty(&obs, &params, BoundVariant::Rederived, 400, 3).unwrap();
        for (x, y) in [
            (a.beta1_lb, b.beta1_lb),
            (a.f_lb, b.f_lb),
            (a.zeta_t_ub, b.zeta_t_ub),
            (a.zeta_w_ub, b.zeta_w_ub),
        ] {
            assert!(y.width() > x.width(), "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn variant_parses() {
        assert_eq!("paper-literal".parse::<BoundVariant>().unwrap(), BoundVariant::PaperLiteral);
        assert!("other".parse::<BoundVariant>().is_err());
    }

    #[test]
    fn empty_setting_is_rejected() {
        let params = section_iv(50.0);
        let mut obs = honest_obs(&params, 1.5);
        obs.p_eta2 = 0.0;
        assert!(matches!(
            estimate(&obs, &params, BoundVariant::Rederived),
            Err(Error::NoPostselection(_))
        ));
    }

    #[test]
    fn spread_survives_clamping() {
        // beta1 near 1 at 0 km: the clamped samples pile up at 1, the raw ones do not.
        let params = section_iv(0.0);
        let mut obs = honest_obs(&params, 1.5);
        obs.p_eta2 *= 0.9;
        obs.se = Some(ObservableErrors {
            p_eta1: obs.p_eta1 * 0.05,
            p_eta2: obs.p_eta2 * 0.05,
            omega_t_eta1: 0.0,
            omega_t_eta2: 0.0,
            omega_w_eta1: 0.0,
            omega_w_eta2: 0.0,
        });
        let iv = propagate_uncertainty(&obs, &params, BoundVariant::Rederived, 400, 9).unwrap();
        assert_eq!(iv.point.f_lb, 1.0);
        assert!(iv.point.f_raw > 1.0);
        assert!(iv.f_lb.upper == 1.0);
        assert!(iv.f_lb.std_dev > 0.1, "{}", iv.f_lb.std_dev);
    }
}
