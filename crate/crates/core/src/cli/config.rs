//! TOML configuration files.
//!
//! ```toml
//! [sim]
//! n_devices = 1000          # or density_per_m2 = 7.96e-5
//! t_rep_s = 80.0
//! payload_bytes = 100
//! sf_set = [7, 8, 9, 10, 11, 12]
//!
//! [phy]
//! num_channels = 1
//!
//! [learning]
//! beta = 0.5
//!
//! [external]
//! sf9_ch0 = 0.05
//!
//! [adversary]
//! flip_prob = 0.0
//! ```
//!
//! Only `sim.t_rep_s`, `sim.payload_bytes` and one of `sim.n_devices` /
//! `sim.density_per_m2` are required; everything else falls back to the
//! defaults of [`SimConfig`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::{EnergyRatio, IndexMode};
use crate::error::{Error, Result};
use crate::netsim::{
    AdversaryModel, Algorithm, CaptureRule, ExternalInterference, Population, SimConfig,
};
use crate::phy::{PhyParams, SpreadingFactor};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    sim: Option<SimSection>,
    phy: Option<PhyParams>,
    learning: Option<LearningSection>,
    external: Option<BTreeMap<String, f64>>,
    adversary: Option<AdversarySection>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    n_devices: Option<usize>,
    density_per_m2: Option<f64>,
    cell_radius_m: Option<f64>,
    t_rep_s: Option<f64>,
    payload_bytes: Option<usize>,
    sf_set: Option<Vec<SpreadingFactor>>,
    pathloss_gain_db: Option<f64>,
    pathloss_exp: Option<f64>,
    capture: Option<CaptureRule>,
    algorithm: Option<Algorithm>,
    packets_per_device: Option<usize>,
    seed: Option<u64>,
    power_control: Option<bool>,
    fixed_power_dbm: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearningSection {
    alpha: Option<f64>,
    beta: Option<f64>,
    rho: Option<f64>,
    index_mode: Option<IndexMode>,
    energy_ratio: Option<EnergyRatio>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdversarySection {
    flip_prob: Option<f64>,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let sim = file.sim.unwrap_or_default();
    let missing = |key: &str| Error::Config(format!("missing required key `{key}`"));

    let population = match (sim.n_devices, sim.density_per_m2) {
        (Some(n), None) => Population::Count(n),
        (None, Some(d)) => Population::Density(d),
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give only one of `sim.n_devices` and `sim.density_per_m2`".into(),
            ))
        }
        (None, None) => return Err(missing("sim.n_devices")),
    };
    let d = SimConfig::default();
    let learning = file.learning.unwrap_or_default();
    let phy = file.phy.unwrap_or_default();
    let mut external = ExternalInterference::none();
    for (key, prob) in file.external.unwrap_or_default() {
        let (sf, channel) = parse_arm_key(&key)?;
        external.set(sf, channel, prob)?;
    }

    let config = SimConfig {
        population,
        cell_radius_m: sim.cell_radius_m.unwrap_or(d.cell_radius_m),
        t_rep_s: sim.t_rep_s.ok_or_else(|| missing("sim.t_rep_s"))?,
        payload_bytes: sim
            .payload_bytes
            .ok_or_else(|| missing("sim.payload_bytes"))?,
        phy,
        sf_set: sim.sf_set.unwrap_or(d.sf_set),
        pathloss_gain_db: sim.pathloss_gain_db.unwrap_or(d.pathloss_gain_db),
        pathloss_exp: sim.pathloss_exp.unwrap_or(d.pathloss_exp),
        capture: sim.capture.unwrap_or(d.capture),
        algorithm: sim.algorithm.unwrap_or(d.algorithm),
        beta: learning.beta.unwrap_or(d.beta),
        alpha: learning.alpha.unwrap_or(d.alpha),
        rho: learning.rho.unwrap_or(d.rho),
        index_mode: learning.index_mode.unwrap_or(d.index_mode),
        energy_ratio: learning.energy_ratio.unwrap_or(d.energy_ratio),
        external,
        adversary: AdversaryModel {
            flip_prob: file
                .adversary
                .and_then(|a| a.flip_prob)
                .unwrap_or(d.adversary.flip_prob),
        },
        packets_per_device: sim.packets_per_device.unwrap_or(d.packets_per_device),
        seed: sim.seed.unwrap_or(d.seed),
        power_control: sim.power_control.unwrap_or(d.power_control),
        fixed_power_dbm: sim.fixed_power_dbm.unwrap_or(d.fixed_power_dbm),
    };
    config
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(config)
}

/// `sf9_ch2` -> (SF 9, channel 2).
fn parse_arm_key(key: &str) -> Result<(SpreadingFactor, usize)> {
    let bad = || {
        Error::Config(format!(
            "unknown key `external.{key}` (expected sf<N>_ch<M>)"
        ))
    };
    let rest = key.strip_prefix("sf").ok_or_else(bad)?;
    let (sf, ch) = rest.split_once("_ch").ok_or_else(bad)?;
    let sf = SpreadingFactor::new(sf.parse().map_err(|_| bad())?)
        .map_err(|e| Error::Config(format!("external.{key}: {e}")))?;
    Ok((sf, ch.parse().map_err(|_| bad())?))
}

/// Writes every field of `config` in the file schema.
pub fn dump_config(config: &SimConfig) -> String {
    let (n_devices, density_per_m2) = match config.population {
        Population::Count(n) => (Some(n), None),
        Population::Density(d) => (None, Some(d)),
    };
    let file = FileConfig {
        sim: Some(SimSection {
            n_devices,
            density_per_m2,
            cell_radius_m: Some(config.cell_radius_m),
            t_rep_s: Some(config.t_rep_s),
            payload_bytes: Some(config.payload_bytes),
            sf_set: Some(config.sf_set.clone()),
            pathloss_gain_db: Some(config.pathloss_gain_db),
            pathloss_exp: Some(config.pathloss_exp),
            capture: Some(config.capture),
            algorithm: Some(config.algorithm),
            packets_per_device: Some(config.packets_per_device),
            seed: Some(config.seed),
            power_control: Some(config.power_control),
            fixed_power_dbm: Some(config.fixed_power_dbm),
        }),
        phy: Some(config.phy.clone()),
        learning: Some(LearningSection {
            alpha: Some(config.alpha),
            beta: Some(config.beta),
            rho: Some(config.rho),
            index_mode: Some(config.index_mode),
            energy_ratio: Some(config.energy_ratio),
        }),
        external: Some(
            config
                .external
                .entries()
                .map(|(sf, ch, p)| (format!("sf{}_ch{ch}", sf.value()), p))
                .collect(),
        ),
        adversary: Some(AdversarySection {
            flip_prob: Some(config.adversary.flip_prob),
        }),
    };
    toml::to_string(&file).expect("config serializes")
}
