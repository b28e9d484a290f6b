//! Physical parameters and the honest-channel click model.
//!
//! A frame is one measurement window of duration `T_f`. The source emits `n`
//! pairs with Poisson statistics. Alice keeps one photon of each pair and
//! detects it behind a variable attenuator of transmittance `eta`; Bob detects
//! the partner photons after the fiber. Both sides use a single threshold
//! detector with a per-frame dark-count probability `p_d`.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Result};

/// Remaining Poisson mass below which the postselection series is cut.
pub const TAIL_TOLERANCE: f64 = 1e-15;

/// All physical and protocol constants of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// Mean photon-pair number per frame.
    pub mu: f64,
    pub eta_alice: f64,
    pub eta_bob: f64,
    /// Attenuator transmittance used for key generation.
    pub eta1: f64,
    /// Weaker attenuator transmittance, `eta2 < eta1`.
    pub eta2: f64,
    /// Fiber loss in dB/km.
    pub alpha_loss: f64,
    pub distance_km: f64,
    /// Alphabet size (Schmidt number) `sigma_coh / sigma_cor`.
    pub dimension: u32,
    /// Correlation time in seconds.
    pub sigma_cor: f64,
    /// Detector timing jitter in seconds.
    pub sigma_jitter: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Reconciliation efficiency.
    pub recon_eff: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            eta_alice: 0.93,
            eta_bob: 0.93,
            eta1: 1.0,
            eta2: 0.5,
            alpha_loss: 0.2,
            distance_km: 0.0,
            dimension: 8,
            sigma_cor: 30e-12,
            sigma_jitter: 20e-12,
            dark_rate: 1000.0,
            recon_eff: 0.9,
        }
    }
}

/// Quantities that follow from [`ExperimentParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub sigma_coh: f64,
    pub frame_duration: f64,
    pub p_dark: f64,
    pub eta_channel: f64,
    /// Reconciled information per coincidence, `log2 d` bits.
    pub i_r: f64,
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(domain("mu", format!("{} must be > 0", self.mu)));
        }
        check_probability("eta_alice", self.eta_alice)?;
        check_probability("eta_bob", self.eta_bob)?;
        check_probability("eta1", self.eta1)?;
        check_probability("eta2", self.eta2)?;
        if self.eta1 <= 0.0 {
            return Err(domain("eta1", "must be > 0"));
        }
        if self.eta2 >= self.eta1 {
            return Err(domain(
                "eta2",
                format!("requires eta2 < eta1, got {} >= {}", self.eta2, self.eta1),
            ));
        }
        if !(self.alpha_loss.is_finite() && self.alpha_loss >= 0.0) {
            return Err(domain("alpha_loss", "must be >= 0"));
        }
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            return Err(domain("distance_km", "must be >= 0"));
        }
        if self.dimension < 2 {
            return Err(domain("dimension", "must be >= 2"));
        }
        if !(self.sigma_cor.is_finite() && self.sigma_cor > 0.0) {
            return Err(domain("sigma_cor", "must be > 0"));
        }
        if !(self.sigma_jitter.is_finite() && self.sigma_jitter >= 0.0) {
            return Err(domain("sigma_jitter", "must be >= 0"));
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(domain("dark_rate", "must be >= 0"));
        }
        if !(self.recon_eff.is_finite() && self.recon_eff > 0.0 && self.recon_eff <= 1.0) {
            return Err(domain("recon_eff", "must be in (0, 1]"));
        }
        let p_dark = self.dark_rate * self.frame_duration();
        if p_dark >= 1.0 {
            return Err(domain(
                "dark_rate",
                format!("dark-count probability per frame {p_dark} must be < 1"),
            ));
        }
        Ok(())
    }

    pub fn sigma_coh(&self) -> f64 {
        f64::from(self.dimension) * self.sigma_cor
    }

    /// `T_f = 2 sqrt(ln 2) sigma_coh`.
    pub fn frame_duration(&self) -> f64 {
        2.0 * std::f64::consts::LN_2.sqrt() * self.sigma_coh()
    }

    pub fn p_dark(&self) -> f64 {
        self.dark_rate * self.frame_duration()
    }

    pub fn eta_channel(&self) -> f64 {
        10f64.powf(-self.alpha_loss * self.distance_km / 10.0)
    }

    pub fn derived(&self) -> DerivedParams {
        DerivedParams {
            sigma_coh: self.sigma_coh(),
            frame_duration: self.frame_duration(),
            p_dark: self.p_dark(),
            eta_channel: self.eta_channel(),
            i_r: f64::from(self.dimension).log2(),
        }
    }

    pub fn click_model(&self) -> ClickModel {
        ClickModel {
            eta_alice: self.eta_alice,
            eta_bob: self.eta_bob,
            eta_channel: self.eta_channel(),
            p_dark: self.p_dark(),
        }
    }
}

/// `10^(-alpha L / 10)`.
pub fn channel_transmittance(alpha_loss: f64, distance_km: f64) -> Result<f64> {
    if !(alpha_loss.is_finite() && alpha_loss >= 0.0) {
        return Err(domain("alpha_loss", format!("{alpha_loss} must be >= 0")));
    }
    if !(distance_km.is_finite() && distance_km >= 0.0) {
        return Err(domain("distance_km", format!("{distance_km} must be >= 0")));
    }
    Ok(10f64.powf(-alpha_loss * distance_km / 10.0))
}

/// Poisson probability of `n` pairs at mean `mu`, evaluated in log space.
pub fn poisson_pn(mu: f64, n: u32) -> f64 {
    debug_assert!(mu >= 0.0);
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (2..=n).map(|k| f64::from(k).ln()).sum();
    (f64::from(n) * mu.ln() - mu - ln_fact).exp()
}

/// Probability that Alice registers at least one click given `n` pairs.
pub fn alpha_click(n: u32, eta: f64, eta_alice: f64, p_dark: f64) -> f64 {
    at_least_one_click(n, eta * eta_alice, p_dark)
}

/// Honest-channel probability that Bob registers at least one click.
pub fn beta_click(n: u32, eta_bob: f64, eta_channel: f64, p_dark: f64) -> f64 {
    at_least_one_click(n, eta_bob * eta_channel, p_dark)
}

/// `1 - (1 - eta)^n (1 - p_dark)`, exact at `n = 0` and accurate for small `eta`.
fn at_least_one_click(n: u32, eta: f64, p_dark: f64) -> f64 {
    if n == 0 {
        return p_dark;
    }
    let miss = -(f64::from(n) * (-eta).ln_1p()).exp_m1();
    p_dark + (1.0 - p_dark) * miss
}

/// Detector efficiencies, channel transmittance and dark-count probability,
/// i.e. everything needed to evaluate click probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickModel {
    pub eta_alice: f64,
    pub eta_bob: f64,
    pub eta_channel: f64,
    pub p_dark: f64,
}

impl ClickModel {
    pub fn alpha(&self, n: u32, eta: f64) -> f64 {
        alpha_click(n, eta, self.eta_alice, self.p_dark)
    }

    /// Bob's click probability for `n` pairs. A custom sequence overrides the
    /// honest value; indices past its end reuse the last entry.
    pub fn beta(&self, n: u32, beta_seq: Option<&[f64]>) -> f64 {
        match beta_seq {
            Some(seq) => seq[(n as usize).min(seq.len() - 1)],
            None => beta_click(n, self.eta_bob, self.eta_channel, self.p_dark),
        }
    }

    /// `sum_n Poisson(n; mu) alpha_n(eta) beta_n`, truncated once the remaining
    /// Poisson mass is below [`TAIL_TOLERANCE`] or after [`series_cap`] terms.
    pub fn postselection(&self, mu: f64, eta: f64, beta_seq: Option<&[f64]>) -> Result<f64> {
        validate_series_inputs(mu, eta, beta_seq)?;
        let cap = series_cap(mu);
        let mut weight = (-mu).exp();
        let mut total = 0.0;
        for n in 0..cap {
            total += weight * self.alpha(n as u32, eta) * self.beta(n as u32, beta_seq);
            let next = weight * mu / (n + 1) as f64;
            // Tail beyond n is bounded by a geometric series once mu < n + 2.
            let ratio = mu / (n + 2) as f64;
            if ratio < 1.0 && next / (1.0 - ratio) < TAIL_TOLERANCE {
                break;
            }
            weight = next;
        }
        Ok(total)
    }

    /// Fixed-length evaluation of the postselection series.
    pub fn postselection_with_terms(
        &self,
        mu: f64,
        eta: f64,
        beta_seq: Option<&[f64]>,
        n_terms: usize,
    ) -> Result<f64> {
        validate_series_inputs(mu, eta, beta_seq)?;
        let mut weight = (-mu).exp();
        let mut total = 0.0;
        for n in 0..n_terms {
            total += weight * self.alpha(n as u32, eta) * self.beta(n as u32, beta_seq);
            weight *= mu / (n + 1) as f64;
        }
        Ok(total)
    }

    /// Bob click probabilities for `n = 0..len`.
    pub fn beta_table(&self, beta_seq: Option<&[f64]>, len: usize) -> Vec<f64> {
        (0..len as u32).map(|n| self.beta(n, beta_seq)).collect()
    }
}

/// Hard cap on the number of series terms.
pub fn series_cap(mu: f64) -> usize {
    10 * mu.ceil() as usize + 50
}

fn validate_series_inputs(mu: f64, eta: f64, beta_seq: Option<&[f64]>) -> Result<()> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(domain("mu", format!("{mu} must be >= 0")));
    }
    check_probability("eta", eta)?;
    if let Some(seq) = beta_seq {
        if seq.is_empty() {
            return Err(domain("beta_seq", "empty sequence"));
        }
        for &b in seq {
            check_probability("beta_seq", b)?;
        }
    }
    Ok(())
}

/// Convenience wrapper: `P_mu^(eta)` for the experiment's own intensity.
pub fn postselection_probability(
    params: &ExperimentParams,
    eta: f64,
    beta_seq: Option<&[f64]>,
) -> Result<f64> {
    params.click_model().postselection(params.mu, eta, beta_seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(p_dark: f64) -> ClickModel {
        ClickModel {
            eta_alice: 0.93,
            eta_bob: 0.93,
            eta_channel: 0.1,
            p_dark,
        }
    }

    #[test]
    fn transmittance_examples() {
        assert_eq!(channel_transmittance(0.2, 0.0).unwrap(), 1.0);
        assert!((channel_transmittance(0.2, 50.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((channel_transmittance(0.2, 100.0).unwrap() - 0.01).abs() < 1e-16);
        assert!(channel_transmittance(-0.1, 1.0).is_err());
        assert!(channel_transmittance(0.2, -1.0).is_err());
    }

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_pn(0.0, 0), 1.0);
        assert!((poisson_pn(0.1, 0) - 0.904_837_418_035_959_6).abs() < 1e-15);
        let total: f64 = (0..=200).map(|n| poisson_pn(0.1, n)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // far tail stays finite instead of overflowing a factorial
        assert!(poisson_pn(3.0, 400) >= 0.0);
    }

    #[test]
    fn click_examples() {
        for eta in [0.0, 0.3, 1.0] {
            assert_eq!(alpha_click(0, eta, 0.93, 1e-3), 1e-3);
        }
        assert!((alpha_click(1, 1.0, 0.93, 0.0) - 0.93).abs() < 1e-15);
        assert!((alpha_click(2, 1.0, 0.93, 0.0) - 0.9951).abs() < 1e-15);
        assert_eq!(beta_click(0, 0.93, 0.1, 2e-4), 2e-4);
        assert!((beta_click(1, 0.93, 0.1, 0.0) - 0.093).abs() < 1e-15);
        assert!((beta_click(3, 0.5, 0.5, 0.0) - 0.578125).abs() < 1e-15);
    }

    #[test]
    fn vacuum_limit_is_dark_coincidence() {
        let pd = 3e-4;
        let p = lossless(pd).postselection(1e-12, 1.0, None).unwrap();
        // the single-pair term contributes at most mu * alpha_1 * beta_1 ~ 1e-13
        assert!((p - pd * pd).abs() < 1e-13, "{p}");
    }

    #[test]
    fn closed_attenuator_without_dark_counts_never_postselects() {
        let p = lossless(0.0).postselection(0.1, 0.0, None).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn custom_beta_out_of_range_is_rejected() {
        let err = lossless(0.0)
            .postselection(0.1, 1.0, Some(&[0.0, 1.2]))
            .unwrap_err();
        assert!(matches!(err, crate::Error::Domain { name: "beta_seq", .. }));
    }

    #[test]
    fn default_params_match_evaluation_profile() {
        let p = ExperimentParams::default();
        p.validate().unwrap();
        let d = p.derived();
        assert_eq!(d.sigma_coh / p.sigma_cor, 8.0);
        assert!((d.i_r - 3.0).abs() < 1e-15);
        assert!(d.p_dark > 0.0 && d.p_dark < 1e-6);
    }

    #[test]
    fn params_reject_inverted_settings() {
        let p = ExperimentParams {
            eta2: 1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = ExperimentParams {
            dimension: 1,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
