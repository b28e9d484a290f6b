//! TOML configuration files and the shipped presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use detdecoy::bounds::BoundVariant;
use detdecoy::physmodel::ExperimentParams;
use detdecoy::pipeline::{Protocol, ProtocolOptions};
use detdecoy::simulator::{Attack, NoiseModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Distance,
    Dimension,
    /// Both detector efficiencies together.
    Efficiency,
    Mu,
}

impl Axis {
    /// CSV column name.
    pub fn column(&self) -> &'static str {
        match self {
            Axis::Distance => "distance_km",
            Axis::Dimension => "dimension",
            Axis::Efficiency => "eta_det",
            Axis::Mu => "mu",
        }
    }

    pub fn apply(&self, base: &ExperimentParams, value: f64) -> Result<ExperimentParams, CliError> {
        let mut p = *base;
        match self {
            Axis::Distance => p.distance_km = value,
            Axis::Dimension => {
                if value.fract() != 0.0 || !(2.0..=f64::from(u32::MAX)).contains(&value) {
                    return Err(CliError::Usage(format!(
                        "dimension grid values must be integers >= 2, got {value}"
                    )));
                }
                p.dimension = value as u32;
            }
            Axis::Efficiency => {
                p.eta_alice = value;
                p.eta_bob = value;
            }
            Axis::Mu => p.mu = value,
        }
        Ok(p)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axis::Distance => "distance",
            Axis::Dimension => "dimension",
            Axis::Efficiency => "efficiency",
            Axis::Mu => "mu",
        };
        f.write_str(name)
    }
}

/// Either an explicit list or an inclusive `start..=stop` range with `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let points = match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::Usage(format!(
                        "grid range needs finite bounds and step > 0, got {start}..{stop} by {step}"
                    )));
                }
                // integer stepping keeps 0, 10, ..., 200 exact
                let n = ((stop - start) / step + 1e-9).floor();
                if n < 0.0 || n > 1e6 {
                    return Err(CliError::Usage(format!("grid range {start}..{stop} is empty or huge")));
                }
                (0..=n as usize).map(|i| start + step * i as f64).collect()
            }
        };
        if points.is_empty() {
            return Err(CliError::Usage("sweep grid is empty".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Usage("sweep grid has non-finite values".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("sweep grid must be strictly increasing".into()));
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub grid: Grid,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    #[serde(default)]
    pub variant: BoundVariant,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_one_decoy_nu")]
    pub one_decoy_nu: f64,
}

fn default_protocols() -> Vec<Protocol> {
    vec![Protocol::DetectorDecoy, Protocol::OneDecoy, Protocol::TwoDecoy]
}

fn default_one_decoy_nu() -> f64 {
    detdecoy::baselines::ONE_DECOY_NU
}

/// One tampering scenario of a validation campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub name: Attack,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub n_frames: u64,
    pub seed: u64,
    pub sift_prob: f64,
    pub eta1_fraction: f64,
    pub n_resamples: usize,
    /// Run the honest channel in addition to the attacks.
    pub honest: bool,
    pub attacks: Vec<AttackSpec>,
    /// Estimators to check; infinite is not an estimator and is rejected.
    pub protocols: Vec<Protocol>,
    /// Signal and decoy intensities for the source-decoy runs.
    pub decoy_nu1: f64,
    pub decoy_nu2: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        let attacks = Attack::ALL
            .into_iter()
            .flat_map(|name| {
                [0.3, 0.6, 1.0]
                    .into_iter()
                    .map(move |strength| AttackSpec { name, strength })
            })
            .collect();
        Self {
            n_frames: 1_000_000,
            seed: 20_170_101,
            sift_prob: 0.5,
            eta1_fraction: 0.5,
            n_resamples: 400,
            honest: true,
            attacks,
            protocols: vec![Protocol::DetectorDecoy],
            decoy_nu1: 0.05,
            decoy_nu2: 0.0,
        }
    }
}

/// Full configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(default)]
    pub noise: NoiseModel,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub validate: ValidateSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        config.params.validate()?;
        config.noise.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn sweep(&self) -> Result<&SweepSection, CliError> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no [sweep] section".into()))?;
        if sweep.protocols.is_empty() {
            return Err(CliError::Usage("select at least one protocol".into()));
        }
        sweep.grid.points()?;
        Ok(sweep)
    }

    pub fn protocol_options(&self) -> ProtocolOptions {
        let sweep = self.sweep.as_ref();
        ProtocolOptions {
            variant: sweep.map(|s| s.variant).unwrap_or_default(),
            one_decoy_nu: sweep.map_or(detdecoy::baselines::ONE_DECOY_NU, |s| s.one_decoy_nu),
            ..Default::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A named configuration shipped with the binary.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: [Preset; 3] = [
    Preset {
        name: "fig2a",
        description: "d = 8, eta_det = 0.93, 0-200 km in 10 km steps",
        text: include_str!("../presets/fig2a.toml"),
    },
    Preset {
        name: "fig2b",
        description: "d = 32, eta_det = 0.93, 0-200 km in 10 km steps",
        text: include_str!("../presets/fig2b.toml"),
    },
    Preset {
        name: "fig3",
        description: "d = 8, eta_det = 0.045, 0-200 km in 10 km steps",
        text: include_str!("../presets/fig3.toml"),
    },
];

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        PRESETS.into_iter().find(|p| p.name == s).ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            CliError::Usage(format!("unknown preset `{s}` (known: {})", names.join(", ")))
        })
    }
}

impl Preset {
    pub fn config(&self) -> Config {
        Config::parse(self.text).expect("shipped presets are valid")
    }
}
