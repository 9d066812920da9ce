use rand::Rng;

use crate::error::{Error, Result};

/// Weights above this are rescaled by the maximum weight; the induced
/// distribution is unchanged.
const RESCALE_ABOVE: f64 = 1e150;

/// Per-device UEXP3 learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3State {
    w: Vec<f64>,
    rho: f64,
    round: u64,
}

impl Exp3State {
    /// All weights 1.
    pub fn new(num_arms: usize, rho: f64) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::NoArms);
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho = {rho} outside (0, 1]"
            )));
        }
        Ok(Self {
            w: vec![1.0; num_arms],
            rho,
            round: 1,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.w.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        if w.len() != self.w.len() {
            return Err(Error::InvalidParameter("arm count mismatch".into()));
        }
        self.w = w;
        Ok(())
    }

    /// `p_k = (1 - rho) W_k / sum W + rho / K`.
    pub fn distribution(&self) -> Result<Vec<f64>> {
        if self.w.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::WeightOverflow);
        }
        let k = self.w.len() as f64;
        let total: f64 = self.w.iter().sum();
        if !total.is_finite() {
            return Err(Error::WeightOverflow);
        }
        let floor = self.rho / k;
        Ok(self
            .w
            .iter()
            .map(|w| ((1.0 - self.rho) * w / total + floor).min(1.0))
            .collect())
    }

    /// Draws an arm; returns it with the probability it was drawn with.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, f64)> {
        let p = self.distribution()?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                return Ok((k, pk));
            }
        }
        // rounding left u above the final cumulative sum
        let last = p.len() - 1;
        Ok((last, p[last]))
    }

    /// `W_arm *= exp(rho * reward / (K * p_arm))`.
    pub fn update(&mut self, arm: usize, shaped_reward: f64, prob_used: f64) -> Result<()> {
        if arm >= self.w.len() {
            return Err(Error::ArmOutOfRange {
                index: arm,
                count: self.w.len(),
            });
        }
        if !(prob_used > 0.0 && prob_used <= 1.0) {
            return Err(Error::InvalidProbability(prob_used));
        }
        let k = self.w.len() as f64;
        self.w[arm] *= (self.rho * shaped_reward / (k * prob_used)).exp();
        self.round += 1;
        if self.w[arm] > RESCALE_ABOVE || !self.w[arm].is_finite() {
            self.rescale();
        }
        Ok(())
    }

    fn rescale(&mut self) {
        let max = self.w.iter().copied().fold(0.0, f64::max);
        if max.is_finite() {
            for w in &mut self.w {
                *w = (*w / max).max(f64::MIN_POSITIVE);
            }
        } else {
            // one step overflowed: the infinite arm becomes 1, the rest vanish
            for w in &mut self.w {
                *w = if w.is_finite() {
                    f64::MIN_POSITIVE
                } else {
                    1.0
                };
            }
        }
    }
}
