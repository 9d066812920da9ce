use crate::error::{Error, Result};
use crate::netsim::{ExternalInterference, Population, SimConfig};
use crate::phy::SpreadingFactor;

pub const PRESETS: [&str; 4] = ["sc1", "sc2", "sc3", "fig3"];

/// Devices in every preset cell.
pub const PRESET_DEVICES: usize = 1000;

/// Erasure probabilities of the best and worst arm in `sc2` / `sc3`.
pub const ERASURE_RANGE: (f64, f64) = (0.05, 0.6);

fn sfs(values: &[u8]) -> Vec<SpreadingFactor> {
    values
        .iter()
        .map(|&v| SpreadingFactor::new(v).expect("preset SF is valid"))
        .collect()
}

/// Named scenario. Arrival rates: sc1 12.5/s, sc2 and sc3 2.5/s.
pub fn load_preset(name: &str) -> Result<SimConfig> {
    let base = SimConfig {
        population: Population::Count(PRESET_DEVICES),
        ..SimConfig::default()
    };
    let config = match name {
        "sc1" => SimConfig {
            t_rep_s: 80.0,
            payload_bytes: 100,
            ..base
        },
        "sc2" => {
            let mut c = SimConfig {
                t_rep_s: 400.0,
                payload_bytes: 20,
                ..base
            };
            c.external = ExternalInterference::spread(
                &c.sf_set,
                c.phy.num_channels,
                ERASURE_RANGE.0,
                ERASURE_RANGE.1,
            )?;
            c
        }
        "sc3" => {
            let mut c = SimConfig {
                t_rep_s: 400.0,
                payload_bytes: 20,
                sf_set: sfs(&[9]),
                ..base
            };
            c.phy.num_channels = 3;
            c.external = ExternalInterference::spread(
                &c.sf_set,
                c.phy.num_channels,
                ERASURE_RANGE.0,
                ERASURE_RANGE.1,
            )?;
            c
        }
        "fig3" => SimConfig {
            t_rep_s: 200.0,
            payload_bytes: 100,
            sf_set: sfs(&[7, 10]),
            ..base
        },
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESETS.join(", "),
            })
        }
    };
    Ok(config)
}
