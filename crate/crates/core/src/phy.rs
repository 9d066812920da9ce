//! LoRa physical-layer model.
//!
//! Rates, airtimes, detection thresholds, transmit-energy accounting and the
//! enumeration of the per-device action space. Everything here is a pure
//! function over immutable parameter records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts decibel-milliwatts to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// CSS spreading factor, 7..=12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const MIN: u8 = 7;
    pub const MAX: u8 = 12;

    pub fn new(value: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidSpreadingFactor(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based position in 7..=12.
    pub fn index(self) -> usize {
        (self.0 - Self::MIN) as usize
    }

    /// All six spreading factors in ascending order.
    pub fn all() -> Vec<SpreadingFactor> {
        (Self::MIN..=Self::MAX).map(SpreadingFactor).collect()
    }
}

impl TryFrom<u8> for SpreadingFactor {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpreadingFactor> for u8 {
    fn from(sf: SpreadingFactor) -> u8 {
        sf.0
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

/// One bandit arm: transmit power, spreading factor, sub-channel and replica count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub power_dbm: f64,
    pub sf: SpreadingFactor,
    pub channel: usize,
    /// Always 1 in the LoRa scenarios.
    pub replicas: u32,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}dBm/{}/ch{}", self.power_dbm, self.sf, self.channel)?;
        if self.replicas != 1 {
            write!(f, "x{}", self.replicas)?;
        }
        Ok(())
    }
}

/// LoRa physical-layer constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyParams {
    /// Bandwidth of one sub-channel.
    pub bandwidth_hz: f64,
    pub code_rate: f64,
    /// Required SNR per spreading factor, indexed by `sf - 7`.
    pub snr_thresholds_db: [f64; 6],
    pub sir_threshold_db: f64,
    pub power_set_dbm: Vec<f64>,
    pub num_channels: usize,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Inverse power-amplifier efficiency, multiplies radiated power.
    pub pa_inverse_efficiency: f64,
    pub circuit_power_dbm: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 125_000.0,
            code_rate: 0.8,
            snr_thresholds_db: [-6.0, -9.0, -12.0, -15.0, -17.5, -20.0],
            sir_threshold_db: 6.0,
            power_set_dbm: vec![8.0, 14.0],
            num_channels: 1,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 6.0,
            pa_inverse_efficiency: 2.0,
            circuit_power_dbm: 10.0,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be > 0");
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return bad("code_rate must lie in (0, 1]");
        }
        if self.snr_thresholds_db.windows(2).any(|w| w[1] >= w[0]) {
            return bad("snr_thresholds_db must be strictly decreasing in SF");
        }
        if self.power_set_dbm.is_empty() {
            return Err(Error::EmptySet("power"));
        }
        if self.num_channels == 0 {
            return Err(Error::EmptySet("channel"));
        }
        if !(self.pa_inverse_efficiency >= 1.0) {
            return bad("pa_inverse_efficiency must be >= 1");
        }
        Ok(())
    }

    pub fn snr_threshold_db(&self, sf: SpreadingFactor) -> f64 {
        self.snr_thresholds_db[sf.index()]
    }

    /// Linear SNR threshold for `sf`.
    pub fn snr_threshold(&self, sf: SpreadingFactor) -> f64 {
        db_to_linear(self.snr_threshold_db(sf))
    }

    /// Linear SIR (capture) threshold.
    pub fn sir_threshold(&self) -> f64 {
        db_to_linear(self.sir_threshold_db)
    }
}

/// Bit rate `c * BW * mu / 2^c`.
pub fn data_rate(sf: SpreadingFactor, phy: &PhyParams) -> f64 {
    let c = sf.value() as f64;
    c * phy.bandwidth_hz * phy.code_rate / 2f64.powi(sf.value() as i32)
}

/// Airtime of a payload, in seconds. No preamble or header overhead.
pub fn time_on_air(payload_bytes: usize, sf: SpreadingFactor, phy: &PhyParams) -> Result<f64> {
    if payload_bytes == 0 {
        return Err(Error::EmptyPayload);
    }
    Ok(8.0 * payload_bytes as f64 / data_rate(sf, phy))
}

/// Energy drawn from the battery for one attempt, in joules:
/// `replicas * airtime * (eta * P_t + P_c)`.
pub fn tx_energy(action: &Action, payload_bytes: usize, phy: &PhyParams) -> Result<f64> {
    let airtime = time_on_air(payload_bytes, action.sf, phy)?;
    let draw = phy.pa_inverse_efficiency * dbm_to_watts(action.power_dbm)
        + dbm_to_watts(phy.circuit_power_dbm);
    Ok(action.replicas as f64 * airtime * draw)
}

/// Receiver noise power over one sub-channel, in watts.
pub fn noise_power(phy: &PhyParams) -> f64 {
    dbm_to_watts(phy.noise_psd_dbm_hz + phy.noise_figure_db) * phy.bandwidth_hz
}

/// Cartesian product of the configured sets, power-major, then SF, then channel.
pub fn action_space(
    sf_set: &[SpreadingFactor],
    power_set_dbm: &[f64],
    channel_count: usize,
) -> Result<Vec<Action>> {
    if sf_set.is_empty() {
        return Err(Error::EmptySet("spreading factor"));
    }
    if power_set_dbm.is_empty() {
        return Err(Error::EmptySet("power"));
    }
    if channel_count == 0 {
        return Err(Error::EmptySet("channel"));
    }
    let mut out = Vec::with_capacity(sf_set.len() * power_set_dbm.len() * channel_count);
    for &power_dbm in power_set_dbm {
        for &sf in sf_set {
            for channel in 0..channel_count {
                out.push(Action {
                    power_dbm,
                    sf,
                    channel,
                    replicas: 1,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(v: u8) -> SpreadingFactor {
        SpreadingFactor::new(v).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn spreading_factor_domain() {
        assert!(SpreadingFactor::new(6).is_err());
        assert!(SpreadingFactor::new(13).is_err());
        assert_eq!(SpreadingFactor::all().len(), 6);
        assert_eq!(sf(9).index(), 2);
    }

    #[test]
    fn data_rate_examples() {
        let phy = PhyParams::default();
        assert_eq!(data_rate(sf(7), &phy), 5468.75);
        assert!(close(
            data_rate(sf(12), &phy),
            12.0 * 125_000.0 * 0.8 / 4096.0,
            1e-15
        ));
        assert!(close(data_rate(sf(12), &phy), 292.96875, 1e-15));
        let unit = PhyParams {
            code_rate: 1.0,
            ..PhyParams::default()
        };
        assert_eq!(data_rate(sf(8), &unit), 3906.25);
    }

    #[test]
    fn airtime_examples() {
        let phy = PhyParams::default();
        assert!(close(
            time_on_air(100, sf(7), &phy).unwrap(),
            800.0 / 5468.75,
            1e-15
        ));
        assert!(close(
            time_on_air(100, sf(7), &phy).unwrap(),
            0.146_285_714,
            1e-8
        ));
        assert!(close(
            time_on_air(100, sf(10), &phy).unwrap(),
            0.8192,
            1e-12
        ));
        assert!(close(
            time_on_air(20, sf(7), &phy).unwrap(),
            0.029_257_143,
            1e-7
        ));
        assert_eq!(time_on_air(0, sf(7), &phy), Err(Error::EmptyPayload));
    }

    #[test]
    fn energy_examples() {
        let phy = PhyParams::default();
        let a7 = Action {
            power_dbm: 14.0,
            sf: sf(7),
            channel: 0,
            replicas: 1,
        };
        // (2 * 10^1.4 + 10) mW * 800/5468.75 s
        let draw_mw = 2.0 * 10f64.powf(1.4) + 10.0;
        let e7 = tx_energy(&a7, 100, &phy).unwrap();
        assert!(close(e7, draw_mw * 1e-3 * 800.0 / 5468.75, 1e-12));
        assert!(close(e7, 8.8119e-3, 1e-4));
        let a10 = Action { sf: sf(10), ..a7 };
        assert!(close(tx_energy(&a10, 100, &phy).unwrap(), 49.347e-3, 1e-4));
        let a7x2 = Action { replicas: 2, ..a7 };
        assert_eq!(tx_energy(&a7x2, 100, &phy).unwrap(), 2.0 * e7);
    }

    #[test]
    fn noise_examples() {
        let mut phy = PhyParams {
            noise_figure_db: 0.0,
            ..PhyParams::default()
        };
        let n = noise_power(&phy);
        assert!(close(n, 10f64.powf(-17.4) * 1.25e5 * 1e-3, 1e-12));
        assert!(close(10.0 * (n * 1e3).log10(), -123.03, 1e-4));
        phy.bandwidth_hz = 250_000.0;
        assert!(close(noise_power(&phy), 2.0 * n, 1e-14));
        phy.noise_psd_dbm_hz = f64::NEG_INFINITY;
        assert_eq!(noise_power(&phy), 0.0);
    }

    #[test]
    fn action_space_sizes_and_order() {
        let all = SpreadingFactor::all();
        let powers = [2.0, 5.0, 8.0, 11.0, 14.0];
        let space = action_space(&all, &powers, 3).unwrap();
        assert_eq!(space.len(), 90);
        assert_eq!(space[0].power_dbm, 2.0);
        assert_eq!(space[1].channel, 1);
        assert_eq!(space[3].sf, sf(8));
        assert_eq!(space[18].power_dbm, 5.0);
        assert_eq!(action_space(&[sf(7), sf(10)], &[14.0], 1).unwrap().len(), 2);
        assert_eq!(action_space(&[sf(9)], &[14.0], 1).unwrap().len(), 1);
        assert!(action_space(&[], &[14.0], 1).is_err());
        assert!(action_space(&all, &[], 1).is_err());
        assert!(action_space(&all, &[14.0], 0).is_err());
    }

    #[test]
    fn rate_and_threshold_monotone_in_sf() {
        let phy = PhyParams::default();
        phy.validate().unwrap();
        let all = SpreadingFactor::all();
        for w in all.windows(2) {
            assert!(data_rate(w[0], &phy) > data_rate(w[1], &phy));
            assert!(phy.snr_threshold(w[0]) > phy.snr_threshold(w[1]));
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut phy = PhyParams::default();
        phy.snr_thresholds_db[3] = 0.0;
        assert!(phy.validate().is_err());
        let phy = PhyParams {
            code_rate: 1.5,
            ..PhyParams::default()
        };
        assert!(phy.validate().is_err());
    }
}
