//! Secure-key capacity per postselected coincidence.
//!
//! The capacity combines three pieces:
//!
//! ```text
//! dI = beta * I(A;B) - (1 - F) * I_R - F * chi_UB(zeta_t, zeta_w)
//! ```
//!
//! # Gaussian model
//!
//! Arrival times and frequencies of the photon pair are treated as the
//! quadratures of a two-mode Gaussian state. With the time quadrature scaled by
//! `sqrt(sigma_coh * sigma_cor)` and the frequency quadrature by its inverse,
//! the ideal biphoton is a two-mode squeezed vacuum with marginal variance
//! `V = sigma_coh / sigma_cor = d`: the time marginal is `sigma_coh` wide, the
//! conditional time spread is `sigma_cor`, and the frequency variances are the
//! Fourier duals. Excess noise enters as
//!
//! ```text
//! Var(t_B | t_A) = sigma_cor^2 (1 + zeta_t),   Var(w_B | w_A) = (1 + zeta_w) / (4 sigma_coh^2)
//! ```
//!
//! so in vacuum units the conditional variances are `(1 + zeta) / V` and the
//! correlations drop to
//! `C_t = sqrt(V^2 - (1 + zeta_t))` and `C_w = sqrt(V^2 - (1 + zeta_w))` in the
//! covariance matrix
//!
//! ```text
//! [[V, 0, C_t, 0], [0, V, 0, -C_w], [C_t, 0, V, 0], [0, -C_w, 0, V]]
//! ```
//!
//! Eve holds the purification, so her Holevo information on Alice's timing
//! result is `S(AB) - S(B | t_A)`, evaluated from symplectic eigenvalues.
//! The matrix is a valid state only when its smaller symplectic eigenvalue is
//! at least one, which works out to `zeta_t zeta_w >= (C_t - C_w)^2`. Equal
//! noise always qualifies; one noise factor at zero with the other positive
//! never does. The Holevo function is not monotone in the noise factors, and
//! only upper bounds on them are known, so [`holevo_upper_bound`] takes its
//! supremum over every physical noise pair in `[0, zeta_t_ub] x [0, zeta_w_ub]`.
//!
//! The mutual information uses the arrival-time channel alone, with detector
//! jitter added on both sides: `I = 1/2 log2(1 + sigma_coh^2 / s^2)` where
//! `s^2 = sigma_cor^2 (1 + zeta_t) + 2 sigma_J^2`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::physmodel::ExperimentParams;

/// Grid subdivisions per axis used to seed the supremum search.
const SUP_GRID: usize = 16;
const SUP_SEEDS: usize = 3;
const SUP_ROUNDS: usize = 4;
const GOLDEN_ITERS: usize = 48;
const PHYSICAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoModelParams {
    pub sigma_cor: f64,
    pub sigma_coh: f64,
    pub sigma_jitter: f64,
    pub dimension: u32,
    pub recon_eff: f64,
    pub i_r: f64,
}

impl From<&ExperimentParams> for InfoModelParams {
    fn from(p: &ExperimentParams) -> Self {
        Self {
            sigma_cor: p.sigma_cor,
            sigma_coh: p.sigma_coh(),
            sigma_jitter: p.sigma_jitter,
            dimension: p.dimension,
            recon_eff: p.recon_eff,
            i_r: f64::from(p.dimension).log2(),
        }
    }
}

impl InfoModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_cor > 0.0 && self.sigma_coh > 0.0 && self.sigma_jitter >= 0.0) {
            return Err(domain("sigma", "time scales must be positive"));
        }
        let ratio = self.sigma_coh / self.sigma_cor;
        if (ratio - f64::from(self.dimension)).abs() > 1e-9 * ratio {
            return Err(domain(
                "sigma_coh",
                format!("sigma_coh / sigma_cor = {ratio} differs from d = {}", self.dimension),
            ));
        }
        if !(self.recon_eff > 0.0 && self.recon_eff <= 1.0) {
            return Err(domain("recon_eff", "must be in (0, 1]"));
        }
        if !(self.i_r.is_finite() && self.i_r >= 0.0) {
            return Err(domain("i_r", "must be >= 0"));
        }
        Ok(())
    }

    /// Two-mode variance in vacuum units.
    fn variance(&self) -> f64 {
        self.sigma_coh / self.sigma_cor
    }
}

fn check_noise(name: &'static str, zeta: f64) -> Result<()> {
    if zeta.is_nan() || zeta < 0.0 {
        return Err(domain(name, format!("{zeta} must be >= 0")));
    }
    if zeta.is_infinite() {
        return Err(Error::LooseBound("excess-noise bound is infinite"));
    }
    Ok(())
}

/// Entropy in bits of a thermal mode with mean photon number `x`:
/// `(x+1) log2(x+1) - x log2 x`.
pub fn gaussian_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Entropy of a mode with symplectic eigenvalue `nu` (vacuum = 1).
fn mode_entropy(nu: f64) -> f64 {
    gaussian_entropy(((nu - 1.0) / 2.0).max(0.0))
}

/// Mutual information between arrival times, in bits.
pub fn mutual_info_ab(model: &InfoModelParams, zeta_t: f64) -> Result<f64> {
    model.validate()?;
    check_noise("zeta_t", zeta_t)?;
    let spread =
        model.sigma_cor.powi(2) * (1.0 + zeta_t) + 2.0 * model.sigma_jitter.powi(2);
    Ok(0.5 * (1.0 + model.sigma_coh.powi(2) / spread).log2())
}

/// Symplectic eigenvalues `(nu_plus, nu_minus)` of the two-mode covariance.
pub fn symplectic_eigenvalues(model: &InfoModelParams, zeta_t: f64, zeta_w: f64) -> (f64, f64) {
    let v2 = model.variance().powi(2);
    // residual variances V^2 - C^2, capped where the correlation vanishes
    let a = (1.0 + zeta_t).min(v2);
    let b = (1.0 + zeta_w).min(v2);
    let ct = (v2 - a).sqrt();
    let cw = (v2 - b).sqrt();
    let gap = if ct + cw > 0.0 { (b - a) / (ct + cw) } else { 0.0 };
    // 2V^2 - 2 C_t C_w, written to avoid cancellation
    let delta = a + b + gap * gap;
    let det = a * b;
    let root = (delta * delta - 4.0 * det).max(0.0).sqrt();
    let plus = ((delta + root) / 2.0).sqrt();
    let minus = (det / plus.powi(2)).sqrt();
    (plus, minus)
}

/// Whether the noise pair describes a valid quantum state.
pub fn is_physical(model: &InfoModelParams, zeta_t: f64, zeta_w: f64) -> bool {
    let v2 = model.variance().powi(2);
    if 1.0 + zeta_t > v2 || 1.0 + zeta_w > v2 {
        return false;
    }
    let gap = (v2 - 1.0 - zeta_t).sqrt() - (v2 - 1.0 - zeta_w).sqrt();
    gap * gap <= zeta_t * zeta_w * (1.0 + PHYSICAL_TOLERANCE)
}

/// Eve's Holevo information at fixed noise factors. Only meaningful where
/// [`is_physical`] holds.
pub fn holevo_at(model: &InfoModelParams, zeta_t: f64, zeta_w: f64) -> f64 {
    let (plus, minus) = symplectic_eigenvalues(model, zeta_t, zeta_w);
    let v2 = model.variance().powi(2);
    let conditional = (1.0 + zeta_t).min(v2).sqrt();
    (mode_entropy(plus) + mode_entropy(minus) - mode_entropy(conditional)).max(0.0)
}

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Supremum of [`holevo_at`] over the physical part of
/// `[0, zeta_t_ub] x [0, zeta_w_ub]`.
///
/// Seeds from a regular grid (corners included) and refines the best seeds by
/// cyclic golden-section search, each step confined to one grid cell around
/// the current point.
pub fn holevo_upper_bound(model: &InfoModelParams, zeta_t_ub: f64, zeta_w_ub: f64) -> Result<f64> {
    model.validate()?;
    check_noise("zeta_t_ub", zeta_t_ub)?;
    check_noise("zeta_w_ub", zeta_w_ub)?;
    let chi = |t: f64, w: f64| {
        if is_physical(model, t, w) {
            holevo_at(model, t, w)
        } else {
            f64::NEG_INFINITY
        }
    };
    let axis = |ub: f64| -> Vec<f64> {
        if ub == 0.0 {
            vec![0.0]
        } else {
            (0..=SUP_GRID).map(|i| ub * i as f64 / SUP_GRID as f64).collect()
        }
    };
    let (ts, ws) = (axis(zeta_t_ub), axis(zeta_w_ub));
    let mut grid: Vec<(f64, f64, f64)> = ts
        .iter()
        .flat_map(|&t| ws.iter().map(move |&w| (t, w)))
        .map(|(t, w)| (chi(t, w), t, w))
        .collect();
    grid.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best = grid[0].0;
    let step_t = zeta_t_ub / SUP_GRID as f64;
    let step_w = zeta_w_ub / SUP_GRID as f64;
    for &(mut value, mut t, mut w) in grid.iter().take(SUP_SEEDS) {
        for _ in 0..SUP_ROUNDS {
            if step_t > 0.0 {
                let (lo, hi) = ((t - step_t).max(0.0), (t + step_t).min(zeta_t_ub));
                let (nt, v) = golden_max(|x| chi(x, w), lo, hi);
                if v > value {
                    t = nt;
                    value = v;
                }
            }
            if step_w > 0.0 {
                let (lo, hi) = ((w - step_w).max(0.0), (w + step_w).min(zeta_w_ub));
                let (nw, v) = golden_max(|x| chi(t, x), lo, hi);
                if v > value {
                    w = nw;
                    value = v;
                }
            }
        }
        best = best.max(value);
    }
    Ok(best)
}

/// The three addends of the capacity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityTerms {
    /// `beta * I(A;B)`
    pub reconciled: f64,
    /// `(1 - F) * I_R`, all of it assumed leaked.
    pub multiphoton_leak: f64,
    /// `F * chi_UB`
    pub single_photon_leak: f64,
}

impl CapacityTerms {
    pub fn total(&self) -> f64 {
        self.reconciled - self.multiphoton_leak - self.single_photon_leak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyCapacityResult {
    /// Bits per coincidence; negative means no key.
    pub delta_i: f64,
    pub mutual_info: f64,
    pub holevo_ub: f64,
    pub f_used: f64,
    pub terms: CapacityTerms,
}

/// Evaluates the capacity bound. Mutual information is taken at the worst
/// admissible timing noise `zeta_t_ub`.
pub fn secure_key_capacity(
    f_lb: f64,
    zeta_t_ub: f64,
    zeta_w_ub: f64,
    model: &InfoModelParams,
) -> Result<KeyCapacityResult> {
    if !(0.0..=1.0).contains(&f_lb) {
        return Err(domain("f_lb", format!("{f_lb} is not in [0, 1]")));
    }
    let mutual_info = mutual_info_ab(model, zeta_t_ub)?;
    let holevo_ub = holevo_upper_bound(model, zeta_t_ub, zeta_w_ub)?;
    let terms = CapacityTerms {
        reconciled: model.recon_eff * mutual_info,
        multiphoton_leak: (1.0 - f_lb) * model.i_r,
        single_photon_leak: f_lb * holevo_ub,
    };
    Ok(KeyCapacityResult {
        delta_i: terms.total(),
        mutual_info,
        holevo_ub,
        f_used: f_lb,
        terms,
    })
}
