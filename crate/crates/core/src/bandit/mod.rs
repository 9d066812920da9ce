//! Per-device online learning.
//!
//! Two learners share one interface through [`Policy`]:
//!
//! - [`Ucb1State`]: upper-confidence index over the shaped reward, for
//!   stochastic feedback.
//! - [`Exp3State`]: exponential weights mixed with a uniform floor, for
//!   feedback an adversary may tamper with.
//!
//! Rewards are shaped by [`RewardShaper`], which blends the ACK bit with the
//! energy of the chosen arm. Non-learning baselines ([`Baseline`]) use the
//! same select/observe cycle so the simulator can treat every device alike.

mod exp3;
mod reward;
mod ucb;

pub use exp3::Exp3State;
pub use reward::{EnergyRatio, RewardShaper};
pub use ucb::{IndexMode, Ucb1State};

use rand::Rng;

use crate::error::Result;

/// Non-learning arm choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Uniform over all arms every round.
    RandSel,
    /// Always the same arm.
    Fixed(usize),
}

impl Baseline {
    pub fn select<R: Rng + ?Sized>(&self, num_arms: usize, rng: &mut R) -> usize {
        match *self {
            Baseline::RandSel => rng.random_range(0..num_arms),
            Baseline::Fixed(arm) => arm,
        }
    }
}

/// A device's decision rule together with its state.
#[derive(Debug, Clone)]
pub enum Policy {
    Ucb1(Ucb1State),
    /// Keeps the probability of the last draw for the weight update.
    Exp3 {
        state: Exp3State,
        last_prob: f64,
    },
    Baseline {
        kind: Baseline,
        num_arms: usize,
    },
}

impl Policy {
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        match self {
            Policy::Ucb1(s) => Ok(s.select(rng)),
            Policy::Exp3 { state, last_prob } => {
                let (arm, p) = state.select(rng)?;
                *last_prob = p;
                Ok(arm)
            }
            Policy::Baseline { kind, num_arms } => Ok(kind.select(*num_arms, rng)),
        }
    }

    /// Feeds the shaped reward of the arm just played.
    pub fn observe(&mut self, arm: usize, shaped_reward: f64) -> Result<()> {
        match self {
            Policy::Ucb1(s) => s.update(arm, shaped_reward),
            Policy::Exp3 { state, last_prob } => state.update(arm, shaped_reward, *last_prob),
            Policy::Baseline { .. } => Ok(()),
        }
    }
}
