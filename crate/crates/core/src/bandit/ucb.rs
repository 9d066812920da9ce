use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exploitation term of the UCB index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    /// `Z_k / T_k`: empirical mean of the shaped reward.
    #[default]
    Mean,
    /// `Z_k`: accumulated shaped reward, used as-is.
    Accumulated,
}

/// Per-device UUCB1 learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ucb1State {
    z: Vec<f64>,
    t_count: Vec<u64>,
    round: u64,
    alpha: f64,
    mode: IndexMode,
}

impl Ucb1State {
    /// `Z_k = 0`, `T_k = 1` for every arm, round 1.
    pub fn new(num_arms: usize, alpha: f64) -> Result<Self> {
        Self::with_mode(num_arms, alpha, IndexMode::default())
    }

    pub fn with_mode(num_arms: usize, alpha: f64, mode: IndexMode) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::NoArms);
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
        }
        Ok(Self {
            z: vec![0.0; num_arms],
            t_count: vec![1; num_arms],
            round: 1,
            alpha,
            mode,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn t_count(&self) -> &[u64] {
        &self.t_count
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    /// Overwrites the accumulators; used to set up specific states.
    pub fn set_counts(&mut self, z: Vec<f64>, t_count: Vec<u64>, round: u64) -> Result<()> {
        if z.len() != self.z.len() || t_count.len() != self.z.len() {
            return Err(Error::InvalidParameter("arm count mismatch".into()));
        }
        if t_count.contains(&0) || round == 0 {
            return Err(Error::InvalidParameter("counters must be >= 1".into()));
        }
        self.z = z;
        self.t_count = t_count;
        self.round = round;
        Ok(())
    }

    /// `b_k(t) = exploit_k + sqrt(alpha * ln t / T_k)`.
    pub fn index(&self, arm: usize) -> f64 {
        let t = self.t_count[arm] as f64;
        let exploit = match self.mode {
            IndexMode::Accumulated => self.z[arm],
            IndexMode::Mean => self.z[arm] / t,
        };
        exploit + (self.alpha * (self.round as f64).ln() / t).sqrt()
    }

    /// Argmax of the index; exact ties are broken uniformly at random.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        argmax_random_tie((0..self.num_arms()).map(|k| self.index(k)), rng)
    }

    pub fn update(&mut self, arm: usize, shaped_reward: f64) -> Result<()> {
        if arm >= self.num_arms() {
            return Err(Error::ArmOutOfRange {
                index: arm,
                count: self.num_arms(),
            });
        }
        self.z[arm] += shaped_reward;
        self.t_count[arm] += 1;
        self.round += 1;
        Ok(())
    }
}

/// Index of the maximum; uniform reservoir choice among exact ties.
pub(crate) fn argmax_random_tie<I, R>(values: I, rng: &mut R) -> usize
where
    I: IntoIterator<Item = f64>,
    R: Rng + ?Sized,
{
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut ties = 0u32;
    for (k, v) in values.into_iter().enumerate() {
        if v > best_val {
            best = k;
            best_val = v;
            ties = 1;
        } else if v == best_val {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = k;
            }
        }
    }
    best
}
