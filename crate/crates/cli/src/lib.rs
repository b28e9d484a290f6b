//! Library side of the `detdecoy` command: configuration, sweeps, Monte Carlo
//! validation campaigns and one-shot bound evaluation.

pub mod config;
pub mod oneshot;
pub mod sweep;
pub mod validate;

use std::process::ExitCode;

pub use config::{Axis, Config, Grid, Preset, PRESETS};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_GUARD: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] detdecoy::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{failed} of {total} validation checks failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        use detdecoy::Error as E;
        let code = match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Csv(_) => EXIT_USAGE,
            CliError::ValidationFailed { .. } => EXIT_VALIDATION,
            CliError::Core(e) => match e {
                E::Domain { .. }
                | E::DegenerateSettings(_)
                | E::DegenerateDecoys(_)
                | E::Unsupported(_)
                | E::UnknownAttack(_) => EXIT_USAGE,
                E::NoPostselection(_)
                | E::LooseBound(_)
                | E::RatioCondition { .. }
                | E::Invariant(_) => EXIT_GUARD,
            },
        };
        ExitCode::from(code)
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("thread count must be > 0".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Fixed scientific notation with 12 significant digits.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.11e}")
}
