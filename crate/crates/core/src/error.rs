use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("degenerate attenuator settings: eta1 = eta2 = {0}")]
    DegenerateSettings(f64),

    #[error("degenerate decoy intensities: {0}")]
    DegenerateDecoys(String),

    #[error("no postselected events at setting {0}")]
    NoPostselection(String),

    /// A downstream formula would divide by a bound that is zero, i.e. the
    /// estimate is too loose to say anything.
    #[error("bound too loose to proceed: {0}")]
    LooseBound(&'static str),

    /// The multiphoton tail of the two-setting decomposition has a positive
    /// coefficient, so the single-photon bound is not valid for these settings.
    #[error(
        "attenuator settings violate the multiphoton ratio condition at n = {n} \
         (eta2 * eta_alice too small relative to the dark-count probability)"
    )]
    RatioCondition { n: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("unknown attack `{0}`")]
    UnknownAttack(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        name,
        reason: reason.into(),
    }
}

/// Fails with a domain error unless `value` is a finite probability.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(domain(name, format!("{value} is not in [0, 1]")))
    }
}
