use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{CaptureRule, ExternalInterference, SimConfig};
use crate::phy::{self, SpreadingFactor};

/// One transmission as seen by the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    pub radius: f64,
    pub power_dbm: f64,
    pub sf: SpreadingFactor,
    pub channel: usize,
    pub start: f64,
    pub end: f64,
}

/// True when both attempts share SF and sub-channel and their on-air
/// intervals `[start, end)` intersect.
pub fn overlaps(a: &Attempt, b: &Attempt) -> bool {
    a.sf == b.sf && a.channel == b.channel && a.start < b.end && b.start < a.end
}

/// Gateway-side channel: pathloss, noise, thresholds and external erasures.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub noise_w: f64,
    pub gain: f64,
    pub exponent: f64,
    snr_thresholds: [f64; 6],
    sir_threshold: f64,
    pub rule: CaptureRule,
    pub external: ExternalInterference,
}

impl LinkModel {
    pub fn from_config(config: &SimConfig) -> Self {
        let mut snr_thresholds = [0.0; 6];
        for sf in SpreadingFactor::all() {
            snr_thresholds[sf.index()] = config.phy.snr_threshold(sf);
        }
        Self {
            noise_w: phy::noise_power(&config.phy),
            gain: config.pathloss_gain(),
            exponent: config.pathloss_exp,
            snr_thresholds,
            sir_threshold: config.phy.sir_threshold(),
            rule: config.capture,
            external: config.external.clone(),
        }
    }

    /// Mean received power (before fading) from `radius` at `power_dbm`.
    pub fn mean_rx_power(&self, radius: f64, power_dbm: f64) -> f64 {
        phy::dbm_to_watts(power_dbm) * self.gain * radius.powf(-self.exponent)
    }

    pub fn snr_threshold(&self, sf: SpreadingFactor) -> f64 {
        self.snr_thresholds[sf.index()]
    }

    pub fn sir_threshold(&self) -> f64 {
        self.sir_threshold
    }
}

/// Capture test for a faded signal power against noise and summed
/// same-SF interference.
pub fn capture(signal_w: f64, interference_w: f64, sf: SpreadingFactor, link: &LinkModel) -> bool {
    let snr_need = link.snr_threshold(sf) * link.noise_w;
    match link.rule {
        CaptureRule::Joint => {
            signal_w >= snr_need && signal_w >= link.sir_threshold * interference_w
        }
        CaptureRule::Additive => signal_w >= snr_need + link.sir_threshold * interference_w,
    }
}

/// Draws unit-mean exponential fading for `tx` and every concurrent attempt,
/// then applies the capture test and the external erasure coin.
/// Attempts on another SF or sub-channel do not interfere.
pub fn evaluate_attempt<R: Rng + ?Sized>(
    tx: &Attempt,
    concurrent: &[Attempt],
    link: &LinkModel,
    rng: &mut R,
) -> bool {
    let h: f64 = Exp1.sample(rng);
    let signal = link.mean_rx_power(tx.radius, tx.power_dbm) * h;
    let interference: f64 = concurrent
        .iter()
        .filter(|b| b.sf == tx.sf && b.channel == tx.channel)
        .map(|b| {
            let hb: f64 = Exp1.sample(rng);
            link.mean_rx_power(b.radius, b.power_dbm) * hb
        })
        .sum();
    let erased = rng.random::<f64>() < link.external.prob(tx.sf, tx.channel);
    capture(signal, interference, tx.sf, link) && !erased
}

/// ACK bit after the adversary: `success XOR Bernoulli(flip_prob)`.
pub fn feedback<R: Rng + ?Sized>(success: bool, flip_prob: f64, rng: &mut R) -> bool {
    let flip = rng.random::<f64>() < flip_prob;
    success ^ flip
}
