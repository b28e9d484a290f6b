//! One-shot bounds from measured observables.
//!
//! Input is TOML:
//!
//! ```toml
//! variant = "rederived"        # optional
//! n_resamples = 1000           # optional, used when [observables.se] is given
//! seed = 1                     # optional
//!
//! [params]                     # optional, defaults to the evaluation profile
//! distance_km = 50.0
//!
//! [observables]
//! p_eta1 = 1.0e-2
//! p_eta2 = 5.2e-3
//! omega_t_eta1 = 1.7777777777777777
//! omega_t_eta2 = 1.7777777777777777
//! omega_w_eta1 = 1.7777777777777777
//! omega_w_eta2 = 1.7777777777777777
//!
//! # [observables.se]           # optional standard errors, same keys
//! ```

use detdecoy::bounds::{
    estimate, propagate_uncertainty, BoundEstimates, BoundVariant, ChannelObservables, Interval,
};
use detdecoy::infomodel::{InfoModelParams, KeyCapacityResult};
use detdecoy::physmodel::ExperimentParams;
use detdecoy::pipeline::capacity_from_bounds;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsInput {
    #[serde(default)]
    pub variant: BoundVariant,
    #[serde(default = "default_resamples")]
    pub n_resamples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub params: ExperimentParams,
    pub observables: ChannelObservables,
}

fn default_resamples() -> usize {
    1000
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    pub beta1_lb: Interval,
    pub f_lb: Interval,
    pub zeta_t_ub: Interval,
    pub zeta_w_ub: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsOutput {
    pub bounds: BoundEstimates,
    pub capacity: Option<KeyCapacityResult>,
    pub intervals: Option<IntervalSet>,
}

pub fn parse_input(text: &str) -> Result<BoundsInput, CliError> {
    let input: BoundsInput = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
    input.params.validate()?;
    Ok(input)
}

pub fn compute(input: &BoundsInput) -> Result<BoundsOutput, CliError> {
    let bounds = estimate(&input.observables, &input.params, input.variant)?;
    let capacity = capacity_from_bounds(&bounds, &InfoModelParams::from(&input.params))?;
    let intervals = match input.observables.se {
        Some(_) => {
            let iv = propagate_uncertainty(
                &input.observables,
                &input.params,
                input.variant,
                input.n_resamples,
                input.seed,
            )?;
            Some(IntervalSet {
                beta1_lb: iv.beta1_lb,
                f_lb: iv.f_lb,
                zeta_t_ub: iv.zeta_t_ub,
                zeta_w_ub: iv.zeta_w_ub,
            })
        }
        None => None,
    };
    Ok(BoundsOutput {
        bounds,
        capacity,
        intervals,
    })
}

/// TOML rendering of the result.
pub fn render(output: &BoundsOutput) -> Result<String, CliError> {
    toml::to_string(output).map_err(|e| CliError::Usage(format!("cannot render output: {e}")))
}
