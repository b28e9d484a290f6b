//! Protocol comparison on noise-free expected observables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    infinite_decoy_oracle, one_decoy_bounds, optimize_two_decoy, two_decoy_bounds,
    DecoyIntensities, ONE_DECOY_NU,
};
use crate::bounds::{estimate, BoundEstimates, BoundVariant, Clamping};
use crate::error::{Error, Result};
use crate::infomodel::{secure_key_capacity, InfoModelParams, KeyCapacityResult};
use crate::physmodel::ExperimentParams;
use crate::simulator::{expected_intensity_observation, expected_observables, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    DetectorDecoy,
    OneDecoy,
    TwoDecoy,
    Infinite,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::DetectorDecoy,
        Protocol::OneDecoy,
        Protocol::TwoDecoy,
        Protocol::Infinite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::DetectorDecoy => "detector-decoy",
            Protocol::OneDecoy => "one-decoy",
            Protocol::TwoDecoy => "two-decoy",
            Protocol::Infinite => "infinite",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown protocol `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolOptions {
    pub variant: BoundVariant,
    pub one_decoy_nu: f64,
    /// Fixed two-decoy intensities; `None` optimizes `nu1` with `nu2 = 0`.
    pub two_decoy: Option<DecoyIntensities>,
    /// Bob click probabilities replacing the honest channel.
    pub tamper_beta: Option<Vec<f64>>,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            variant: BoundVariant::Rederived,
            one_decoy_nu: ONE_DECOY_NU,
            two_decoy: None,
            tamper_beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolResult {
    pub protocol: Protocol,
    pub bounds: BoundEstimates,
    /// `None` when the noise bound is unbounded and no key can be certified.
    pub capacity: Option<KeyCapacityResult>,
    pub intensities: Option<DecoyIntensities>,
}

impl ProtocolResult {
    /// Capacity in bits per coincidence, `-inf` when nothing is certified.
    pub fn delta_i(&self) -> f64 {
        self.capacity.map_or(f64::NEG_INFINITY, |c| c.delta_i)
    }
}

/// Bounds of one protocol, before the capacity step.
fn protocol_bounds(
    protocol: Protocol,
    params: &ExperimentParams,
    noise: &NoiseModel,
    opts: &ProtocolOptions,
    intensities: Option<&DecoyIntensities>,
) -> Result<BoundEstimates> {
    let beta = opts.tamper_beta.as_deref();
    let at = |s: f64| expected_intensity_observation(params, beta, noise, s);
    match protocol {
        Protocol::DetectorDecoy => {
            let obs = expected_observables(params, beta, noise)?;
            estimate(&obs, params, opts.variant)
        }
        Protocol::OneDecoy => {
            let dec = DecoyIntensities::one(params.mu, opts.one_decoy_nu);
            dec.validate_one()?;
            one_decoy_bounds(&[at(params.mu)?, at(dec.nu1)?], &dec, params)
        }
        Protocol::TwoDecoy => {
            let dec = intensities.ok_or_else(|| {
                Error::Invariant("two-decoy bounds need intensities".into())
            })?;
            dec.validate_two()?;
            two_decoy_bounds(&[at(dec.mu_signal)?, at(dec.nu1)?, at(dec.nu2)?], dec, params)
        }
        Protocol::Infinite => {
            let truth = infinite_decoy_oracle(params, beta)?;
            Ok(BoundEstimates {
                beta1_lb: truth.beta1,
                beta0_lb: params.p_dark(),
                f_lb: truth.f_eta1,
                zeta_t_ub: noise.zeta_t,
                zeta_w_ub: noise.zeta_w,
                variant: opts.variant,
                clamped: Clamping::default(),
                beta1_raw: truth.beta1,
                f_raw: truth.f_eta1,
            })
        }
    }
}

/// Capacity for a set of bounds. Noise bounds below zero are raised to zero
/// since the true factors are nonnegative.
pub fn capacity_from_bounds(
    bounds: &BoundEstimates,
    model: &InfoModelParams,
) -> Result<Option<KeyCapacityResult>> {
    if !bounds.zeta_bounded() {
        return Ok(None);
    }
    secure_key_capacity(
        bounds.f_lb,
        bounds.zeta_t_ub.max(0.0),
        bounds.zeta_w_ub.max(0.0),
        model,
    )
    .map(Some)
}

fn evaluate_with(
    protocol: Protocol,
    params: &ExperimentParams,
    noise: &NoiseModel,
    opts: &ProtocolOptions,
    intensities: Option<DecoyIntensities>,
) -> Result<ProtocolResult> {
    let model = InfoModelParams::from(params);
    let bounds = protocol_bounds(protocol, params, noise, opts, intensities.as_ref())?;
    let capacity = capacity_from_bounds(&bounds, &model)?;
    Ok(ProtocolResult {
        protocol,
        bounds,
        capacity,
        intensities,
    })
}

/// Evaluates a protocol on the expected observables of `params` and `noise`.
pub fn evaluate(
    protocol: Protocol,
    params: &ExperimentParams,
    noise: &NoiseModel,
    opts: &ProtocolOptions,
) -> Result<ProtocolResult> {
    params.validate()?;
    noise.validate()?;
    match protocol {
        Protocol::TwoDecoy => {
            let dec = match opts.two_decoy {
                Some(d) => d,
                None => {
                    optimize_two_decoy(params.mu, |d| {
                        evaluate_with(protocol, params, noise, opts, Some(*d)).map(|r| r.delta_i())
                    })?
                    .0
                }
            };
            evaluate_with(protocol, params, noise, opts, Some(dec))
        }
        Protocol::OneDecoy => evaluate_with(
            protocol,
            params,
            noise,
            opts,
            Some(DecoyIntensities::one(params.mu, opts.one_decoy_nu)),
        ),
        _ => evaluate_with(protocol, params, noise, opts, None),
    }
}
