//! Capacity-versus-distance curves for the reference profiles and the
//! ordering checks applied to them.

use std::fmt;

use detdecoy::physmodel::ExperimentParams;
use detdecoy::pipeline::{evaluate, Protocol, ProtocolOptions};
use detdecoy::simulator::NoiseModel;
use detdecoy::Result;
use rayon::prelude::*;

/// Relative agreement required between detector-decoy and two-decoy.
pub const RELATIVE_TOLERANCE: f64 = 0.05;
/// Absolute agreement floor in bits, for curves close to zero.
pub const ABSOLUTE_TOLERANCE: f64 = 0.02;
/// Slack on the monotonicity check, to ignore last-bit rounding.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Reference profile: mu = 0.1, eta1 = 1, eta2 = 0.5, both detectors at
/// `eta_det`, everything else at the defaults.
pub fn reference_params(dimension: u32, eta_det: f64) -> ExperimentParams {
    ExperimentParams {
        dimension,
        eta_alice: eta_det,
        eta_bob: eta_det,
        ..Default::default()
    }
}

/// 0 to 200 km in 10 km steps.
pub fn distance_grid() -> Vec<f64> {
    (0..=20).map(|k| f64::from(k) * 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub protocol: Protocol,
    pub distance_km: Vec<f64>,
    pub delta_i: Vec<f64>,
}

impl Curve {
    pub fn compute(
        protocol: Protocol,
        base: &ExperimentParams,
        noise: &NoiseModel,
        opts: &ProtocolOptions,
        distances: &[f64],
    ) -> Result<Curve> {
        let delta_i = distances
            .par_iter()
            .map(|&l| {
                let params = ExperimentParams {
                    distance_km: l,
                    ..*base
                };
                evaluate(protocol, &params, noise, opts).map(|r| r.delta_i())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Curve {
            protocol,
            distance_km: distances.to_vec(),
            delta_i,
        })
    }

    /// Trapezoidal integral of `self - other` over distance, in bit km.
    pub fn integrated_gap(&self, other: &Curve) -> f64 {
        assert_eq!(self.distance_km, other.distance_km, "curves on different grids");
        let gap: Vec<f64> = self.delta_i.iter().zip(&other.delta_i).map(|(a, b)| a - b).collect();
        self.distance_km
            .windows(2)
            .zip(gap.windows(2))
            .map(|(x, g)| 0.5 * (x[1] - x[0]) * (g[0] + g[1]))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// Detector-decoy below one-decoy.
    BelowOneDecoy { distance_km: f64, detector: f64, one_decoy: f64 },
    /// Detector-decoy outside the tolerance band around two-decoy.
    OffTwoDecoy { distance_km: f64, detector: f64, two_decoy: f64 },
    /// Capacity rising from one grid point to the next.
    Increasing { protocol: Protocol, distance_km: f64, from: f64, to: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::BelowOneDecoy { distance_km, detector, one_decoy } => write!(
                f,
                "{distance_km} km: detector-decoy {detector:.6} < one-decoy {one_decoy:.6}"
            ),
            Violation::OffTwoDecoy { distance_km, detector, two_decoy } => write!(
                f,
                "{distance_km} km: detector-decoy {detector:.6} vs two-decoy {two_decoy:.6} ({:+.2}%)",
                100.0 * (detector - two_decoy) / two_decoy.abs()
            ),
            Violation::Increasing { protocol, distance_km, from, to } => write!(
                f,
                "{protocol} rises {from:.6} -> {to:.6} into {distance_km} km"
            ),
        }
    }
}

pub fn within_tolerance(detector: f64, two_decoy: f64) -> bool {
    let allowed = (RELATIVE_TOLERANCE * two_decoy.abs()).max(ABSOLUTE_TOLERANCE);
    (detector - two_decoy).abs() <= allowed
}

/// Every ordering violation between the three curves of a distance figure.
pub fn figure_violations(detector: &Curve, one_decoy: &Curve, two_decoy: &Curve) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, &l) in detector.distance_km.iter().enumerate() {
        let (d, o, t) = (detector.delta_i[i], one_decoy.delta_i[i], two_decoy.delta_i[i]);
        if !(d >= o) {
            out.push(Violation::BelowOneDecoy { distance_km: l, detector: d, one_decoy: o });
        }
        if !within_tolerance(d, t) {
            out.push(Violation::OffTwoDecoy { distance_km: l, detector: d, two_decoy: t });
        }
    }
    for curve in [detector, one_decoy, two_decoy] {
        for (i, w) in curve.delta_i.windows(2).enumerate() {
            if w[1] > w[0] + MONOTONE_SLACK {
                out.push(Violation::Increasing {
                    protocol: curve.protocol,
                    distance_km: curve.distance_km[i + 1],
                    from: w[0],
                    to: w[1],
                });
            }
        }
    }
    out
}
