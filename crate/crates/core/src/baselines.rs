//! Source-intensity decoy estimators and the infinite-decoy oracle.
//!
//! The decoy estimators run with the attenuator fixed at `eta1` and vary the
//! pair-source intensity instead. Writing `Y_n = alpha_n(eta1) beta_n` for the
//! joint click yield of an `n`-pair emission, every intensity `s` satisfies
//! `P_s e^s = sum_n Y_n s^n / n!`, and the usual decoy algebra bounds `Y_1`
//! from below. Dividing by Alice's trusted `alpha_1(eta1)` gives `beta_1`.

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundEstimates, BoundVariant, Clamping};
use crate::error::{check_probability, domain, Error, Result};
use crate::physmodel::ExperimentParams;

/// Signal and decoy intensities (mean pair numbers per frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoyIntensities {
    pub mu_signal: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl DecoyIntensities {
    pub fn two(mu_signal: f64, nu1: f64, nu2: f64) -> Self {
        Self { mu_signal, nu1, nu2 }
    }

    /// One-decoy configuration; `nu2` is unused.
    pub fn one(mu_signal: f64, nu: f64) -> Self {
        Self {
            mu_signal,
            nu1: nu,
            nu2: 0.0,
        }
    }

    /// `0 <= nu2 < nu1 < mu` and `nu1 + nu2 < mu`.
    pub fn validate_two(&self) -> Result<()> {
        let Self { mu_signal: mu, nu1, nu2 } = *self;
        if ![mu, nu1, nu2].iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateDecoys(format!("non-finite intensity in {self:?}")));
        }
        if !(nu2 >= 0.0 && nu2 < nu1 && nu1 < mu && nu1 + nu2 < mu) {
            return Err(Error::DegenerateDecoys(format!(
                "need 0 <= nu2 < nu1 < mu and nu1 + nu2 < mu, got mu = {mu}, nu1 = {nu1}, nu2 = {nu2}"
            )));
        }
        Ok(())
    }

    /// `0 < nu1 < mu`.
    pub fn validate_one(&self) -> Result<()> {
        let (mu, nu) = (self.mu_signal, self.nu1);
        if !(mu.is_finite() && nu > 0.0 && nu < mu) {
            return Err(Error::DegenerateDecoys(format!(
                "need 0 < nu < mu, got mu = {mu}, nu = {nu}"
            )));
        }
        Ok(())
    }
}

/// Statistics observed at one source intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityObservation {
    pub p: f64,
    pub omega_t: f64,
    pub omega_w: f64,
}

impl IntensityObservation {
    fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        for (name, v) in [("omega_t", self.omega_t), ("omega_w", self.omega_w)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(name, format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Two-decoy lower bound on the single-pair yield `Y_1`.
///
/// `obs` holds the signal, `nu1` and `nu2` statistics in that order.
pub fn two_decoy_yield_lb(
    obs: &[IntensityObservation; 3],
    dec: &DecoyIntensities,
    p_dark: f64,
) -> Result<f64> {
    dec.validate_two()?;
    let (mu, nu1, nu2) = (dec.mu_signal, dec.nu1, dec.nu2);
    let s_mu = obs[0].p * mu.exp();
    let s1 = obs[1].p * nu1.exp();
    let s2 = obs[2].p * nu2.exp();
    // Y_0 = p_d beta_0 >= p_d^2, and the intensity pair bounds it directly too.
    let y0_lb = ((nu1 * s2 - nu2 * s1) / (nu1 - nu2)).max(p_dark * p_dark);
    let k = (nu1 * nu1 - nu2 * nu2) / (mu * mu);
    Ok(mu / (mu * nu1 - mu * nu2 - nu1 * nu1 + nu2 * nu2) * (s1 - s2 - k * (s_mu - y0_lb)))
}

/// One-decoy lower bound on `Y_1`. `obs` holds the signal and decoy statistics.
pub fn one_decoy_yield_lb(
    obs: &[IntensityObservation; 2],
    dec: &DecoyIntensities,
    p_dark: f64,
) -> Result<f64> {
    dec.validate_one()?;
    let (mu, nu) = (dec.mu_signal, dec.nu1);
    let s_mu = obs[0].p * mu.exp();
    let s_nu = obs[1].p * nu.exp();
    // Alice's vacuum click probability is p_d and beta_0 <= 1.
    let y0_ub = p_dark;
    Ok(mu / (mu * nu - nu * nu)
        * (s_nu - nu * nu / (mu * mu) * s_mu - (mu * mu - nu * nu) / (mu * mu) * y0_ub))
}

/// Turns a yield bound into the full estimate set. The noise bound takes the
/// tightest of the difference bounds over every intensity pair and the ratio
/// bounds at every nonzero intensity.
fn finish(
    obs: &[IntensityObservation],
    intensities: &[f64],
    yield_raw: f64,
    params: &ExperimentParams,
) -> Result<BoundEstimates> {
    params.validate()?;
    for o in obs {
        o.validate()?;
    }
    let model = params.click_model();
    let alpha1 = model.alpha(1, params.eta1);
    if obs[0].p <= 0.0 {
        return Err(Error::NoPostselection(format!("signal intensity {}", intensities[0])));
    }
    let y1 = yield_raw.clamp(0.0, alpha1);
    let beta1_raw = yield_raw / alpha1;
    let beta1_lb = y1 / alpha1;
    let f_at = |i: usize| {
        let s = intensities[i];
        if obs[i].p > 0.0 {
            s * (-s).exp() * y1 / obs[i].p
        } else {
            0.0
        }
    };
    let s0 = intensities[0];
    let f_raw = s0 * (-s0).exp() * yield_raw / obs[0].p;
    let f_lb = f_at(0).clamp(0.0, 1.0);

    let bound = |omega: &dyn Fn(&IntensityObservation) -> f64| {
        if !(y1 > 0.0) {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for a in 0..intensities.len() {
            for b in 0..intensities.len() {
                let (sa, sb) = (intensities[a], intensities[b]);
                if sa <= sb {
                    continue;
                }
                let numerator =
                    omega(&obs[a]) * obs[a].p * sa.exp() - omega(&obs[b]) * obs[b].p * sb.exp();
                if numerator >= 0.0 {
                    best = best.min(numerator / ((sa - sb) * y1));
                }
            }
            let f = f_at(a).min(1.0);
            if intensities[a] > 0.0 && f > 0.0 {
                best = best.min(omega(&obs[a]) / f);
            }
        }
        best - 1.0
    };
    Ok(BoundEstimates {
        beta1_lb,
        beta0_lb: params.p_dark(),
        f_lb,
        zeta_t_ub: bound(&|o| o.omega_t),
        zeta_w_ub: bound(&|o| o.omega_w),
        variant: BoundVariant::default(),
        clamped: Clamping {
            beta1: beta1_raw != beta1_lb,
            f: f_raw != f_lb,
        },
        beta1_raw,
        f_raw,
    })
}

/// Bounds from signal, `nu1` and `nu2` statistics at the `eta1` setting.
pub fn two_decoy_bounds(
    obs: &[IntensityObservation; 3],
    intensities: &DecoyIntensities,
    params: &ExperimentParams,
) -> Result<BoundEstimates> {
    if intensities.mu_signal != params.mu {
        return Err(domain(
            "mu_signal",
            format!("{} differs from params.mu = {}", intensities.mu_signal, params.mu),
        ));
    }
    let y1 = two_decoy_yield_lb(obs, intensities, params.p_dark())?;
    finish(
        obs,
        &[intensities.mu_signal, intensities.nu1, intensities.nu2],
        y1,
        params,
    )
}

/// Bounds from signal and a single decoy at the `eta1` setting.
pub fn one_decoy_bounds(
    obs: &[IntensityObservation; 2],
    intensities: &DecoyIntensities,
    params: &ExperimentParams,
) -> Result<BoundEstimates> {
    if intensities.mu_signal != params.mu {
        return Err(domain(
            "mu_signal",
            format!("{} differs from params.mu = {}", intensities.mu_signal, params.mu),
        ));
    }
    let y1 = one_decoy_yield_lb(obs, intensities, params.p_dark())?;
    finish(obs, &[intensities.mu_signal, intensities.nu1], y1, params)
}

/// Exact quantities available to an estimator with full knowledge of `beta_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleTruth {
    pub f_eta1: f64,
    pub f_eta2: f64,
    pub beta1: f64,
    pub p_eta1: f64,
    pub p_eta2: f64,
}

/// Exact single-pair fractions at both attenuator settings. `F` is zero at a
/// setting that never postselects.
pub fn infinite_decoy_oracle(
    params: &ExperimentParams,
    beta_seq: Option<&[f64]>,
) -> Result<OracleTruth> {
    params.validate()?;
    let model = params.click_model();
    let mu = params.mu;
    let beta1 = model.beta(1, beta_seq);
    let at = |eta: f64| -> Result<(f64, f64)> {
        let p = model.postselection(mu, eta, beta_seq)?;
        let single = mu * (-mu).exp() * model.alpha(1, eta) * beta1;
        Ok((p, if p > 0.0 { single / p } else { 0.0 }))
    };
    let (p_eta1, f_eta1) = at(params.eta1)?;
    let (p_eta2, f_eta2) = at(params.eta2)?;
    Ok(OracleTruth {
        f_eta1,
        f_eta2,
        beta1,
        p_eta1,
        p_eta2,
    })
}

/// Default one-decoy intensity.
pub const ONE_DECOY_NU: f64 = 0.05;
/// Search bracket for the weak two-decoy intensity, as fractions of `mu`.
pub const NU1_BRACKET: (f64, f64) = (0.01, 0.9);

const NU1_GRID: usize = 24;
const GOLDEN_ITERS: usize = 60;

/// Maximizes `objective` over the weak intensity `nu1` with `nu2 = 0`.
///
/// A coarse grid over the bracket locates the best cell, then golden-section
/// search refines inside its neighbours. Points where the objective fails
/// count as `-inf`. Returns the intensities and the objective value.
pub fn optimize_two_decoy<F>(mu: f64, objective: F) -> Result<(DecoyIntensities, f64)>
where
    F: Fn(&DecoyIntensities) -> Result<f64>,
{
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain("mu", format!("{mu} must be > 0")));
    }
    let lo = NU1_BRACKET.0 * mu;
    let hi = NU1_BRACKET.1 * mu;
    let eval = |nu1: f64| {
        objective(&DecoyIntensities::two(mu, nu1, 0.0))
            .ok()
            .filter(|v| !v.is_nan())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let step = (hi - lo) / NU1_GRID as f64;
    let grid: Vec<(f64, f64)> = (0..=NU1_GRID)
        .map(|i| {
            let x = if i == NU1_GRID { hi } else { lo + step * i as f64 };
            (x, eval(x))
        })
        .collect();
    let best = (0..grid.len())
        .max_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1))
        .unwrap_or(0);

    let mut a = grid[best.saturating_sub(1)].0;
    let mut b = grid[(best + 1).min(NU1_GRID)].0;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    let (mut x, mut v) = grid[best];
    for (xi, vi) in [(c, fc), (d, fd)] {
        if vi > v {
            x = xi;
            v = vi;
        }
    }
    if v == f64::NEG_INFINITY {
        return Err(Error::LooseBound("no admissible two-decoy intensity yields a key"));
    }
    Ok((DecoyIntensities::two(mu, x, 0.0), v))
}
