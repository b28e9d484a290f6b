//! Security analysis for detector-decoy high-dimensional QKD with time-energy
//! entangled photon pairs.
//!
//! The crate is organised bottom-up:
//!
//! * [`physmodel`] holds the experiment parameters and the closed-form click and
//!   postselection model of an honest channel.
//! * [`bounds`] turns observables measured at two attenuator settings into a lower
//!   bound on the single-photon fraction and upper bounds on the excess noise.
//! * [`baselines`] implements the source-intensity decoy estimators used for
//!   comparison, plus the infinite-decoy oracle.
//! * [`infomodel`] evaluates the secure-key capacity from bound estimates.
//! * [`simulator`] is a frame-level Monte Carlo with hidden ground truth used to
//!   check that every estimator is sound.

pub mod baselines;
pub mod bounds;
pub mod error;
pub mod infomodel;
pub mod physmodel;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, Result};
