//! Synthetic Bernoulli bandits for checking the learners away from the
//! network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandit::{Baseline, Exp3State, IndexMode, Policy, Ucb1State};
use crate::error::{Error, Result};
use crate::netsim::{feedback, Algorithm};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    /// Success probability of every arm.
    pub means: Vec<f64>,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub flip_prob: f64,
    pub alpha: f64,
    pub rho: f64,
    pub index_mode: IndexMode,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            means: vec![0.9, 0.5],
            rounds: 10_000,
            seeds: (1..=100).collect(),
            flip_prob: 0.0,
            alpha: 0.1,
            rho: 0.4,
            index_mode: IndexMode::default(),
        }
    }
}

/// Seed-averaged curves of one algorithm, indexed by round.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCurve {
    pub algorithm: Algorithm,
    /// Expected regret `sum_t (mu* - mu_arm_t)` after each round.
    pub cumulative_regret: Vec<f64>,
    /// Fraction of seeds playing a best arm at each round.
    pub optimal_rate: Vec<f64>,
    /// Realized successes (before any flip) after each round.
    pub cumulative_reward: Vec<f64>,
    /// Final cumulative regret of each seed.
    pub final_regret: Vec<f64>,
}

impl BenchCurve {
    /// Mean optimal-arm rate over rounds `[from, to)` (1-based rounds).
    pub fn optimal_rate_between(&self, from: usize, to: usize) -> f64 {
        let s = &self.optimal_rate[from.saturating_sub(1)..to.min(self.optimal_rate.len())];
        s.iter().sum::<f64>() / s.len().max(1) as f64
    }

    /// Cumulative regret after `round` rounds.
    pub fn regret_at(&self, round: usize) -> f64 {
        if round == 0 {
            0.0
        } else {
            self.cumulative_regret[round - 1]
        }
    }

    pub fn reward_at(&self, round: usize) -> f64 {
        if round == 0 {
            0.0
        } else {
            self.cumulative_reward[round - 1]
        }
    }
}

struct SeedRun {
    regret: Vec<f64>,
    optimal: Vec<bool>,
    reward: Vec<f64>,
}

fn policy(algorithm: Algorithm, spec: &BenchSpec) -> Result<Policy> {
    let k = spec.means.len();
    Ok(match algorithm {
        Algorithm::Uucb1 => Policy::Ucb1(Ucb1State::with_mode(k, spec.alpha, spec.index_mode)?),
        Algorithm::Uexp3 => Policy::Exp3 {
            state: Exp3State::new(k, spec.rho)?,
            last_prob: 1.0,
        },
        Algorithm::RandSel => Policy::Baseline {
            kind: Baseline::RandSel,
            num_arms: k,
        },
        Algorithm::Fixed(arm) if arm < k => Policy::Baseline {
            kind: Baseline::Fixed(arm),
            num_arms: k,
        },
        Algorithm::Fixed(arm) => {
            return Err(Error::ArmOutOfRange {
                index: arm,
                count: k,
            })
        }
        Algorithm::EqLoad => {
            return Err(Error::InvalidParameter(
                "eqload needs device positions; not a bandit".into(),
            ))
        }
    })
}

fn run_seed(algorithm: Algorithm, spec: &BenchSpec, seed: u64) -> Result<SeedRun> {
    let best = spec.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut policy = policy(algorithm, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SeedRun {
        regret: Vec::with_capacity(spec.rounds),
        optimal: Vec::with_capacity(spec.rounds),
        reward: Vec::with_capacity(spec.rounds),
    };
    let (mut regret, mut reward) = (0.0, 0.0);
    for _ in 0..spec.rounds {
        let arm = policy.select(&mut rng)?;
        let success = rng.random::<f64>() < spec.means[arm];
        let ack = feedback(success, spec.flip_prob, &mut rng);
        policy.observe(arm, if ack { 1.0 } else { 0.0 })?;
        regret += best - spec.means[arm];
        reward += if success { 1.0 } else { 0.0 };
        out.regret.push(regret);
        out.optimal.push(spec.means[arm] == best);
        out.reward.push(reward);
    }
    Ok(out)
}

/// Runs `algorithm` on every seed of `spec` and averages the curves.
pub fn bandit_bench(algorithm: Algorithm, spec: &BenchSpec) -> Result<BenchCurve> {
    if spec.means.is_empty() {
        return Err(Error::NoArms);
    }
    if spec.seeds.is_empty() {
        return Err(Error::EmptySet("seed"));
    }
    if let Some(&m) = spec.means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::InvalidParameter(format!(
            "arm mean {m} outside [0, 1]"
        )));
    }
    let runs = spec
        .seeds
        .par_iter()
        .map(|&s| run_seed(algorithm, spec, s))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let mut curve = BenchCurve {
        algorithm,
        cumulative_regret: vec![0.0; spec.rounds],
        optimal_rate: vec![0.0; spec.rounds],
        cumulative_reward: vec![0.0; spec.rounds],
        final_regret: runs
            .iter()
            .map(|r| r.regret.last().copied().unwrap_or(0.0))
            .collect(),
    };
    for r in &runs {
        for t in 0..spec.rounds {
            curve.cumulative_regret[t] += r.regret[t] / n;
            curve.optimal_rate[t] += if r.optimal[t] { 1.0 / n } else { 0.0 };
            curve.cumulative_reward[t] += r.reward[t] / n;
        }
    }
    Ok(curve)
}
