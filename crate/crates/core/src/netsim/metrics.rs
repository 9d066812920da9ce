use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-packet-index curves: row `k` aggregates every device's `k`-th packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub algorithm: String,
    pub seed_count: usize,
    /// Mean success indicator of the `k`-th packet across devices.
    pub success: Vec<f64>,
    /// Mean energy of the `k`-th attempt, joules.
    pub energy_j: Vec<f64>,
}

impl MetricsLog {
    pub fn len(&self) -> usize {
        self.success.len()
    }

    pub fn is_empty(&self) -> bool {
        self.success.is_empty()
    }

    /// Trailing moving average of the success column over `window` rows.
    pub fn success_moving_average(&self, window: usize) -> Vec<f64> {
        let window = window.max(1);
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for k in 0..self.len() {
            acc += self.success[k];
            if k >= window {
                acc -= self.success[k - window];
            }
            out.push(acc / (k + 1).min(window) as f64);
        }
        out
    }

    /// Mean success over packet indices `[from, to)`.
    pub fn mean_success(&self, from: usize, to: usize) -> f64 {
        mean(&self.success[from.min(self.len())..to.min(self.len())])
    }

    /// Mean energy per attempt over packet indices `[from, to)`, joules.
    pub fn mean_energy(&self, from: usize, to: usize) -> f64 {
        mean(&self.energy_j[from.min(self.len())..to.min(self.len())])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Pointwise mean of several runs; seed counts add up.
pub fn aggregate(logs: &[MetricsLog]) -> Result<MetricsLog> {
    let first = logs
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to aggregate".into()))?;
    let horizon = first.len();
    if let Some(bad) = logs.iter().find(|l| l.len() != horizon) {
        return Err(Error::MismatchedHorizon(horizon, bad.len()));
    }
    let n = logs.len() as f64;
    let mut success = vec![0.0; horizon];
    let mut energy_j = vec![0.0; horizon];
    for log in logs {
        for k in 0..horizon {
            success[k] += log.success[k];
            energy_j[k] += log.energy_j[k];
        }
    }
    success.iter_mut().for_each(|v| *v /= n);
    energy_j.iter_mut().for_each(|v| *v /= n);
    Ok(MetricsLog {
        algorithm: first.algorithm.clone(),
        seed_count: logs.iter().map(|l| l.seed_count).sum(),
        success,
        energy_j,
    })
}
