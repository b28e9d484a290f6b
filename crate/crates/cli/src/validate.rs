//! Monte Carlo validation campaigns.
//!
//! Each scenario runs the frame simulator, feeds the observed statistics to
//! the selected estimators and compares every bound with the hidden truth.
//! The margin is the distance from truth to bound, in standard deviations of
//! the bound, signed so that positive means the bound is on the safe side. A
//! check fails when the margin drops below `-5`.
//!
//! Detector-decoy standard deviations come from Gaussian resampling of the
//! observables. The decoy baselines use first-order error propagation with
//! central differences. Both are Gaussian approximations; scenarios with fewer
//! than `LOW_COUNT` postselected events at some setting are listed at the end
//! of the report, and their margins should not be taken at face value.

use std::fmt::Write as _;

use detdecoy::baselines::{one_decoy_bounds, two_decoy_bounds, DecoyIntensities, IntensityObservation};
use detdecoy::bounds::{propagate_uncertainty, BoundEstimates, BoundVariant, Clamping};
use detdecoy::infomodel::{secure_key_capacity, InfoModelParams};
use detdecoy::pipeline::{capacity_from_bounds, Protocol};
use detdecoy::simulator::{
    run_scenario, tamper_sequence, SimRun, SimScenario, SourceMode,
};

use crate::config::Config;
use crate::CliError;

pub const SIGMA_THRESHOLD: f64 = 5.0;
/// Below this many postselected events at a setting the Gaussian spread of a
/// bound is a poor guide, and the report says so.
pub const LOW_COUNT: u64 = 100;
/// Absolute slack for bounds with zero spread that coincide with the truth.
const EXACT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The bound must not exceed the truth.
    Lower,
    /// The bound must not fall below the truth.
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub scenario: String,
    pub protocol: Protocol,
    pub quantity: &'static str,
    pub side: Side,
    pub bound: f64,
    pub truth: f64,
    pub sigma: f64,
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    fn new(
        scenario: &str,
        protocol: Protocol,
        quantity: &'static str,
        side: Side,
        bound: f64,
        truth: f64,
        sigma: f64,
    ) -> Self {
        let gap = match side {
            Side::Lower => truth - bound,
            Side::Upper => bound - truth,
        };
        let margin = if gap.is_infinite() || gap.is_nan() {
            // an infinite upper bound is trivially safe
            if bound.is_infinite() && side == Side::Upper {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else if sigma > 0.0 {
            gap / sigma
        } else if gap >= -EXACT_SLACK {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        Self {
            scenario: scenario.to_string(),
            protocol,
            quantity,
            side,
            bound,
            truth,
            sigma,
            margin,
            pass: margin >= -SIGMA_THRESHOLD,
        }
    }
}

/// Capacity from the bounds next to the capacity at the true `F` and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityLine {
    pub scenario: String,
    pub protocol: Protocol,
    pub delta_i_bound: f64,
    pub delta_i_truth: f64,
}

/// Fewest postselected events over the nonvacuum settings an estimator used.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLine {
    pub scenario: String,
    pub protocol: Protocol,
    pub min_postselected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_frames: u64,
    pub seed: u64,
    pub variant: BoundVariant,
    pub checks: Vec<Check>,
    pub capacities: Vec<CapacityLine>,
    pub counts: Vec<CountLine>,
}

impl ValidationReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# n_frames = {}, seed = {}, variant = {}, threshold = {} sigma",
            self.n_frames,
            self.seed,
            match self.variant {
                BoundVariant::Rederived => "rederived",
                BoundVariant::PaperLiteral => "paper-literal",
            },
            SIGMA_THRESHOLD
        );
        let _ = writeln!(
            s,
            "{:<26} {:<15} {:<10} {:>19} {:>19} {:>19} {:>10}  status",
            "scenario", "protocol", "quantity", "bound", "truth", "sigma", "margin"
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<26} {:<15} {:<10} {:>19} {:>19} {:>19} {:>10}  {}",
                c.scenario,
                c.protocol.name(),
                c.quantity,
                crate::fmt_sci(c.bound),
                crate::fmt_sci(c.truth),
                crate::fmt_sci(c.sigma),
                format!("{:.3}", c.margin),
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        for c in &self.capacities {
            let _ = writeln!(
                s,
                "# capacity {:<26} {:<15} bound {}  truth {}",
                c.scenario,
                c.protocol.name(),
                crate::fmt_sci(c.delta_i_bound),
                crate::fmt_sci(c.delta_i_truth)
            );
        }
        for c in self.counts.iter().filter(|c| c.min_postselected < LOW_COUNT) {
            let _ = writeln!(
                s,
                "# low counts {:<26} {:<15} {} postselected events at the sparsest setting, sigma unreliable",
                c.scenario,
                c.protocol.name(),
                c.min_postselected
            );
        }
        let _ = writeln!(
            s,
            "# {} checks, {} failed",
            self.checks.len(),
            self.failures()
        );
        s
    }
}

struct Case {
    name: String,
    tamper: Option<Vec<f64>>,
}

fn cases(config: &Config) -> Result<Vec<Case>, CliError> {
    let v = &config.validate;
    let mut out = Vec::new();
    if v.honest {
        out.push(Case {
            name: "honest".into(),
            tamper: None,
        });
    }
    for a in &v.attacks {
        out.push(Case {
            name: format!("{}@{:.2}", a.name, a.strength),
            tamper: Some(tamper_sequence(a.name, a.strength, &config.params)?),
        });
    }
    if out.is_empty() {
        return Err(CliError::Usage("validation has no scenarios".into()));
    }
    Ok(out)
}

/// Independent seed per scenario and estimator family.
fn derive_seed(seed: u64, case: usize, family: u64) -> u64 {
    seed ^ (case as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ family.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn scenario_for(config: &Config, case: &Case, source: SourceMode, seed: u64, n_frames: u64) -> SimScenario {
    let v = &config.validate;
    SimScenario {
        params: config.params,
        tamper_beta: case.tamper.clone(),
        noise: config.noise,
        sift_prob: v.sift_prob,
        eta1_fraction: v.eta1_fraction,
        source,
        n_frames,
        seed,
    }
}

fn capacity_line(
    case: &Case,
    protocol: Protocol,
    bounds: &BoundEstimates,
    run: &SimRun,
    model: &InfoModelParams,
) -> Result<CapacityLine, CliError> {
    let truth = &run.truth;
    let ideal = secure_key_capacity(truth.key_setting().f, truth.zeta_t, truth.zeta_w, model)?;
    let bound = capacity_from_bounds(bounds, model)?.map_or(f64::NEG_INFINITY, |c| c.delta_i);
    Ok(CapacityLine {
        scenario: case.name.clone(),
        protocol,
        delta_i_bound: bound,
        delta_i_truth: ideal.delta_i,
    })
}

fn count_line(case: &Case, protocol: Protocol, run: &SimRun, sim: &SimScenario, used: usize) -> CountLine {
    let min_postselected = sim
        .settings()
        .iter()
        .zip(&run.counts)
        .take(used)
        .filter(|(s, _)| s.mu > 0.0)
        .map(|(_, c)| c.postselected)
        .min()
        .unwrap_or(0);
    CountLine {
        scenario: case.name.clone(),
        protocol,
        min_postselected,
    }
}

fn bound_checks(
    case: &Case,
    protocol: Protocol,
    bounds: &BoundEstimates,
    sigmas: [f64; 4],
    run: &SimRun,
) -> Vec<Check> {
    let truth = &run.truth;
    vec![
        Check::new(&case.name, protocol, "beta1_lb", Side::Lower, bounds.beta1_lb, truth.beta1(), sigmas[0]),
        Check::new(&case.name, protocol, "f_lb", Side::Lower, bounds.f_lb, truth.key_setting().f, sigmas[1]),
        Check::new(&case.name, protocol, "zeta_t_ub", Side::Upper, bounds.zeta_t_ub, truth.zeta_t, sigmas[2]),
        Check::new(&case.name, protocol, "zeta_w_ub", Side::Upper, bounds.zeta_w_ub, truth.zeta_w, sigmas[3]),
    ]
}

/// First-order standard deviations of `[beta1, F, zeta_t, zeta_w]` for an
/// estimator of flattened `[p, omega_t, omega_w]` inputs. `beta1` and `F` are
/// differentiated before clamping, which would flatten them at the boundary.
fn propagated_sigmas<F>(f: F, x: &[f64], se: &[f64]) -> Result<[f64; 4], CliError>
where
    F: Fn(&[f64]) -> detdecoy::Result<BoundEstimates>,
{
    let pick = |b: BoundEstimates| [b.beta1_raw, b.f_raw, b.zeta_t_ub, b.zeta_w_ub];
    let mut var = [0.0; 4];
    for i in 0..x.len() {
        if se[i] <= 0.0 {
            continue;
        }
        let h = se[i] * 1e-2;
        let shifted = |sign: f64| {
            let mut y = x.to_vec();
            y[i] += sign * h;
            if i % 3 == 0 {
                y[i] = y[i].clamp(0.0, 1.0);
            } else {
                y[i] = y[i].max(0.0);
            }
            (y[i], f(&y).map(pick))
        };
        let ((xp, up), (xm, down)) = (shifted(1.0), shifted(-1.0));
        let (up, down) = match (up, down) {
            (Ok(u), Ok(d)) => (u, d),
            (Err(detdecoy::Error::NoPostselection(_)), _)
            | (_, Err(detdecoy::Error::NoPostselection(_))) => {
                var = [f64::INFINITY; 4];
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        for k in 0..4 {
            let d = (up[k] - down[k]) / (xp - xm);
            var[k] += if d.is_finite() { (d * se[i]).powi(2) } else { f64::INFINITY };
        }
    }
    Ok(var.map(f64::sqrt))
}

/// Bounds reported when nothing was postselected: the protocol aborts and
/// certifies nothing.
fn abort(config: &Config, variant: BoundVariant) -> BoundEstimates {
    BoundEstimates {
        beta1_lb: 0.0,
        beta0_lb: config.params.p_dark(),
        f_lb: 0.0,
        zeta_t_ub: f64::INFINITY,
        zeta_w_ub: f64::INFINITY,
        variant,
        clamped: Clamping::default(),
        beta1_raw: 0.0,
        f_raw: 0.0,
    }
}

fn decoy_estimate<F>(
    f: F,
    x: &[f64],
    se: &[f64],
    config: &Config,
    variant: BoundVariant,
) -> Result<(BoundEstimates, [f64; 4]), CliError>
where
    F: Fn(&[f64]) -> detdecoy::Result<BoundEstimates>,
{
    match f(x) {
        Ok(b) => Ok((b, propagated_sigmas(f, x, se)?)),
        Err(detdecoy::Error::NoPostselection(_)) => Ok((abort(config, variant), [0.0; 4])),
        Err(e) => Err(e.into()),
    }
}

fn intensity_obs(y: &[f64], k: usize) -> IntensityObservation {
    IntensityObservation {
        p: y[3 * k],
        omega_t: y[3 * k + 1],
        omega_w: y[3 * k + 2],
    }
}

pub fn run_validation(config: &Config) -> Result<ValidationReport, CliError> {
    let v = &config.validate;
    let variant = config.protocol_options().variant;
    if v.protocols.is_empty() {
        return Err(CliError::Usage("select at least one protocol to validate".into()));
    }
    if v.protocols.contains(&Protocol::Infinite) {
        return Err(CliError::Usage(
            "the infinite-decoy oracle is the truth itself and cannot be validated".into(),
        ));
    }
    let model = InfoModelParams::from(&config.params);
    let mut checks = Vec::new();
    let mut capacities = Vec::new();
    let mut counts = Vec::new();
    for (ci, case) in cases(config)?.iter().enumerate() {
        if v.protocols.contains(&Protocol::DetectorDecoy) {
            let seed = derive_seed(v.seed, ci, 0);
            let sim = scenario_for(config, case, SourceMode::DetectorDecoy, seed, v.n_frames);
            let run = run_scenario(&sim)?;
            let obs = run.channel_observables()?;
            let (bounds, sigmas) =
                match propagate_uncertainty(&obs, &config.params, variant, v.n_resamples, seed) {
                    Ok(iv) => (
                        iv.point,
                        [
                            iv.beta1_lb.std_dev,
                            iv.f_lb.std_dev,
                            iv.zeta_t_ub.std_dev,
                            iv.zeta_w_ub.std_dev,
                        ],
                    ),
                    Err(detdecoy::Error::NoPostselection(_)) => (abort(config, variant), [0.0; 4]),
                    Err(e) => return Err(e.into()),
                };
            checks.extend(bound_checks(case, Protocol::DetectorDecoy, &bounds, sigmas, &run));
            capacities.push(capacity_line(case, Protocol::DetectorDecoy, &bounds, &run, &model)?);
            counts.push(count_line(case, Protocol::DetectorDecoy, &run, &sim, 2));
        }
        let decoys: Vec<Protocol> = v
            .protocols
            .iter()
            .copied()
            .filter(|p| matches!(p, Protocol::OneDecoy | Protocol::TwoDecoy))
            .collect();
        if decoys.is_empty() {
            continue;
        }
        let dec = DecoyIntensities::two(config.params.mu, v.decoy_nu1, v.decoy_nu2);
        let seed = derive_seed(v.seed, ci, 1);
        let sim = scenario_for(config, case, SourceMode::SourceDecoy(dec), seed, v.n_frames);
        let run = run_scenario(&sim)?;
        let obs = run.decoy_observations()?;
        let x: Vec<f64> = obs.iter().flat_map(|o| [o.p, o.omega_t, o.omega_w]).collect();
        let se: Vec<f64> = run.standard_errors().concat();
        for protocol in decoys {
            let params = &config.params;
            let (bounds, sigmas) = if protocol == Protocol::TwoDecoy {
                let f = |y: &[f64]| {
                    two_decoy_bounds(
                        &[intensity_obs(y, 0), intensity_obs(y, 1), intensity_obs(y, 2)],
                        &dec,
                        params,
                    )
                };
                decoy_estimate(f, &x, &se, config, variant)?
            } else {
                let one = DecoyIntensities::one(params.mu, v.decoy_nu1);
                let f = |y: &[f64]| one_decoy_bounds(&[intensity_obs(y, 0), intensity_obs(y, 1)], &one, params);
                decoy_estimate(f, &x[..6], &se[..6], config, variant)?
            };
            checks.extend(bound_checks(case, protocol, &bounds, sigmas, &run));
            capacities.push(capacity_line(case, protocol, &bounds, &run, &model)?);
            let used = if protocol == Protocol::TwoDecoy { 3 } else { 2 };
            counts.push(count_line(case, protocol, &run, &sim, used));
        }
    }
    Ok(ValidationReport {
        n_frames: v.n_frames,
        seed: v.seed,
        variant,
        checks,
        capacities,
        counts,
    })
}
