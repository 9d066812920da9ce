use serde::{Deserialize, Serialize};

/// How the energy ratio enters the shaped reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyRatio {
    /// `E_min / E_arm`, bounded in (0, 1]; frugal arms earn more.
    #[default]
    MinOverArm,
    /// `E_arm / E_min`, the ratio as printed in the original reward formula.
    ArmOverMin,
}

/// Turns an ACK/NACK bit into the reliability/energy trade-off reward.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardShaper {
    beta: f64,
    energy_table: Vec<f64>,
    e_min: f64,
    ratio: EnergyRatio,
}

impl RewardShaper {
    /// `energy_table[k]` is the per-attempt energy of arm `k` in joules; all
    /// entries must be positive. `e_min` starts at the cheapest arm.
    pub fn new(beta: f64, energy_table: Vec<f64>, ratio: EnergyRatio) -> Self {
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
        assert!(!energy_table.is_empty(), "energy table is empty");
        assert!(
            energy_table.iter().all(|&e| e > 0.0 && e.is_finite()),
            "arm energies must be positive"
        );
        let e_min = energy_table.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            beta,
            energy_table,
            e_min,
            ratio,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn energy(&self, arm: usize) -> f64 {
        self.energy_table[arm]
    }

    /// Shaped reward for one observed feedback bit. On an ACK the running
    /// minimum energy is updated after the reward has been computed.
    pub fn shape(&mut self, ack: bool, arm: usize) -> f64 {
        if !ack {
            return 0.0;
        }
        let e_arm = self.energy_table[arm];
        let ratio = match self.ratio {
            EnergyRatio::MinOverArm => self.e_min / e_arm,
            EnergyRatio::ArmOverMin => e_arm / self.e_min,
        };
        let reward = (1.0 - self.beta) + self.beta * ratio;
        self.e_min = self.e_min.min(e_arm);
        reward
    }
}
