//! Event-driven Monte Carlo simulator of a LoRa cell.
//!
//! Devices are dropped uniformly on a disk around the gateway, each sends a
//! packet on average every `T_rep` seconds and picks its arm (power, SF,
//! sub-channel) through its own policy. An attempt succeeds when it clears
//! the SNR threshold of its SF and captures the receiver against the summed
//! power of every overlapping attempt on the same SF and sub-channel, and the
//! external-erasure coin for that arm does not fire. The (possibly flipped)
//! ACK is shaped with the arm's energy and fed back to the learner.

mod deploy;
mod engine;
mod link;
mod metrics;

pub use deploy::{deploy, Device};
pub use engine::{run, run_detailed, run_seeds, DeviceSummary, SimOutcome};
pub use link::{capture, evaluate_attempt, feedback, overlaps, Attempt, LinkModel};
pub use metrics::{aggregate, MetricsLog};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{quad::Tolerance, AirtimeRatio, AnalyticScenario};
use crate::bandit::{EnergyRatio, IndexMode};
use crate::error::{Error, Result};
use crate::phy::{self, Action, PhyParams, SpreadingFactor};

/// Device decision rule used for every device of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Uucb1,
    Uexp3,
    RandSel,
    EqLoad,
    Fixed(usize),
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Uucb1 => f.write_str("uucb1"),
            Algorithm::Uexp3 => f.write_str("uexp3"),
            Algorithm::RandSel => f.write_str("randsel"),
            Algorithm::EqLoad => f.write_str("eqload"),
            Algorithm::Fixed(a) => write!(f, "fixed:{a}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uucb1" => Ok(Algorithm::Uucb1),
            "uexp3" => Ok(Algorithm::Uexp3),
            "randsel" => Ok(Algorithm::RandSel),
            "eqload" => Ok(Algorithm::EqLoad),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|a| a.parse().ok())
                .map(Algorithm::Fixed)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "unknown algorithm `{s}` (uucb1, uexp3, randsel, eqload, fixed:<arm>)"
                    ))
                }),
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

/// How many devices to drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    /// Exactly this many devices, uniform on the disk.
    Count(usize),
    /// Poisson number of devices with this density per square metre.
    Density(f64),
}

/// Success test applied at the gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureRule {
    /// `S >= gamma_N * N` and `S >= gamma_I * I`.
    #[default]
    Joint,
    /// `S >= gamma_N * N + gamma_I * I`; the closed-form success probability
    /// is exact under this rule.
    Additive,
}

/// Per-arm probability that external traffic destroys an attempt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalInterference {
    /// Keyed by (spreading factor, sub-channel).
    erasure: BTreeMap<(u8, usize), f64>,
}

impl ExternalInterference {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn set(&mut self, sf: SpreadingFactor, channel: usize, prob: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::InvalidParameter(format!(
                "erasure probability {prob} outside [0, 1]"
            )));
        }
        self.erasure.insert((sf.value(), channel), prob);
        Ok(())
    }

    pub fn prob(&self, sf: SpreadingFactor, channel: usize) -> f64 {
        self.erasure
            .get(&(sf.value(), channel))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (SpreadingFactor, usize, f64)> + '_ {
        self.erasure
            .iter()
            .map(|(&(sf, ch), &p)| (SpreadingFactor::new(sf).unwrap(), ch, p))
    }

    /// Probabilities evenly spaced over `[lo, hi]` across the (SF, channel)
    /// pairs, SF-major: the first pair gets `lo`, the last `hi`.
    pub fn spread(sf_set: &[SpreadingFactor], channels: usize, lo: f64, hi: f64) -> Result<Self> {
        let mut out = Self::none();
        let n = sf_set.len() * channels;
        let mut k = 0;
        for &sf in sf_set {
            for ch in 0..channels {
                let p = if n > 1 {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                } else {
                    lo
                };
                out.set(sf, ch, p)?;
                k += 1;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AdversaryModel {
    /// Probability that a feedback bit is inverted.
    pub flip_prob: f64,
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub population: Population,
    pub cell_radius_m: f64,
    pub t_rep_s: f64,
    pub payload_bytes: usize,
    pub phy: PhyParams,
    pub sf_set: Vec<SpreadingFactor>,
    pub pathloss_gain_db: f64,
    pub pathloss_exp: f64,
    pub capture: CaptureRule,
    pub algorithm: Algorithm,
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
    pub index_mode: IndexMode,
    pub energy_ratio: EnergyRatio,
    pub external: ExternalInterference,
    pub adversary: AdversaryModel,
    pub packets_per_device: usize,
    pub seed: u64,
    /// Learners choose among the whole power set instead of `fixed_power_dbm`.
    pub power_control: bool,
    pub fixed_power_dbm: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: Population::Count(1000),
            cell_radius_m: 2000.0,
            t_rep_s: 80.0,
            payload_bytes: 100,
            phy: PhyParams::default(),
            sf_set: SpreadingFactor::all(),
            pathloss_gain_db: -8.1,
            pathloss_exp: 4.0,
            capture: CaptureRule::Joint,
            algorithm: Algorithm::Uucb1,
            beta: 0.5,
            alpha: 0.1,
            rho: 0.4,
            index_mode: IndexMode::default(),
            energy_ratio: EnergyRatio::default(),
            external: ExternalInterference::none(),
            adversary: AdversaryModel::default(),
            packets_per_device: 100,
            seed: 1,
            power_control: false,
            fixed_power_dbm: 14.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.phy.validate()?;
        if !(self.t_rep_s > 0.0) {
            return bad("t_rep_s must be > 0".into());
        }
        if !(self.cell_radius_m > 1.0) {
            return bad("cell_radius_m must exceed 1 m".into());
        }
        if self.payload_bytes == 0 {
            return Err(Error::EmptyPayload);
        }
        if self.sf_set.is_empty() {
            return Err(Error::EmptySet("spreading factor"));
        }
        for (name, v) in [("beta", self.beta), ("flip_prob", self.adversary.flip_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho = {} outside (0, 1]", self.rho));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha = {} must be >= 0", self.alpha));
        }
        if !(self.pathloss_exp >= 2.0) {
            return bad("pathloss_exp must be >= 2".into());
        }
        match self.population {
            Population::Density(d) if !(d >= 0.0 && d.is_finite()) => {
                return bad("density must be finite and >= 0".into())
            }
            _ => {}
        }
        for (sf, ch, p) in self.external.entries() {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!(
                    "erasure probability for {sf} ch{ch} outside [0, 1]"
                ));
            }
        }
        if let Algorithm::Fixed(arm) = self.algorithm {
            let n = self.actions()?.len();
            if arm >= n {
                return Err(Error::ArmOutOfRange {
                    index: arm,
                    count: n,
                });
            }
        }
        Ok(())
    }

    /// Power levels open to the devices.
    pub fn power_levels(&self) -> Vec<f64> {
        if self.power_control {
            self.phy.power_set_dbm.clone()
        } else {
            vec![self.fixed_power_dbm]
        }
    }

    pub fn actions(&self) -> Result<Vec<Action>> {
        phy::action_space(&self.sf_set, &self.power_levels(), self.phy.num_channels)
    }

    pub fn pathloss_gain(&self) -> f64 {
        phy::db_to_linear(self.pathloss_gain_db)
    }

    /// Expected device density per square metre.
    pub fn lambda_total(&self) -> f64 {
        match self.population {
            Population::Count(n) => n as f64 / (PI * self.cell_radius_m * self.cell_radius_m),
            Population::Density(d) => d,
        }
    }

    /// The matching single-power stochastic-geometry scenario.
    pub fn analytic_scenario(&self) -> AnalyticScenario {
        AnalyticScenario {
            lambda_total: self.lambda_total(),
            t_rep: self.t_rep_s,
            payload: self.payload_bytes,
            p_t_dbm: self.fixed_power_dbm,
            pathloss_g: self.pathloss_gain(),
            pathloss_exp: self.pathloss_exp,
            phy: self.phy.clone(),
            beta: self.beta,
            airtime_ratio: AirtimeRatio::default(),
            normalize_width: true,
            tolerance: Tolerance::default(),
        }
    }
}
