use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use rayon::prelude::*;

use super::link::{capture, feedback, LinkModel};
use super::metrics::{aggregate, MetricsLog};
use super::{deploy, Algorithm, Device, SimConfig};
use crate::analytic::eqload_allocate;
use crate::bandit::{Baseline, Exp3State, Policy, RewardShaper, Ucb1State};
use crate::error::Result;
use crate::phy::{self, Action};

/// End-of-run state of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSummary {
    pub id: usize,
    pub radius: f64,
    pub angle: f64,
    pub energy_spent: f64,
    pub packets_sent: usize,
    pub packets_succeeded: usize,
    /// How often each arm was played.
    pub arm_counts: Vec<u32>,
    /// Arm of every attempt in order.
    pub arms: Vec<usize>,
}

impl DeviceSummary {
    /// Most played arm (lowest index on ties).
    pub fn favourite_arm(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.arm_counts.iter().enumerate() {
            if c > self.arm_counts[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub log: MetricsLog,
    pub devices: Vec<DeviceSummary>,
    pub actions: Vec<Action>,
}

/// Runs one seed and returns the per-packet-index curves.
pub fn run(config: &SimConfig) -> Result<MetricsLog> {
    Ok(run_detailed(config)?.log)
}

/// Runs every seed in parallel and averages the curves in seed order.
pub fn run_seeds(config: &SimConfig, seeds: &[u64]) -> Result<MetricsLog> {
    let logs = seeds
        .par_iter()
        .map(|&seed| {
            let c = SimConfig {
                seed,
                ..config.clone()
            };
            run(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(&logs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Start(usize),
    End(usize),
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, kind: Kind) {
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }
}

struct Node {
    pos: Device,
    policy: Policy,
    shaper: RewardShaper,
    rng: ChaCha8Rng,
    energy: f64,
    sent: usize,
    succeeded: usize,
    arm_counts: Vec<u32>,
    arms: Vec<usize>,
}

struct Live {
    device: usize,
    arm: usize,
    packet: usize,
    rx_w: f64,
    interference_w: f64,
    slot: usize,
}

/// Runs one seed, keeping per-device results.
///
/// Devices that reach the horizon keep transmitting, unrecorded, until the
/// last device gets there, so the final packet indices see the same load as
/// the rest.
pub fn run_detailed(config: &SimConfig) -> Result<SimOutcome> {
    config.validate()?;
    let actions = config.actions()?;
    let horizon = config.packets_per_device;
    let mut env = ChaCha8Rng::seed_from_u64(config.seed);
    let positions = deploy(config, &mut env);

    let energy: Vec<f64> = actions
        .iter()
        .map(|a| phy::tx_energy(a, config.payload_bytes, &config.phy))
        .collect::<Result<_>>()?;
    let airtime: Vec<f64> = actions
        .iter()
        .map(|a| phy::time_on_air(config.payload_bytes, a.sf, &config.phy))
        .collect::<Result<_>>()?;
    let eqload_arms = match config.algorithm {
        Algorithm::EqLoad => Some(eqload_arms(config, &positions, &actions)),
        _ => None,
    };

    let mut nodes = Vec::with_capacity(positions.len());
    for (i, pos) in positions.iter().enumerate() {
        let policy = match config.algorithm {
            Algorithm::Uucb1 => Policy::Ucb1(Ucb1State::with_mode(
                actions.len(),
                config.alpha,
                config.index_mode,
            )?),
            Algorithm::Uexp3 => Policy::Exp3 {
                state: Exp3State::new(actions.len(), config.rho)?,
                last_prob: 1.0,
            },
            Algorithm::RandSel => Policy::Baseline {
                kind: Baseline::RandSel,
                num_arms: actions.len(),
            },
            Algorithm::EqLoad => Policy::Baseline {
                kind: Baseline::Fixed(eqload_arms.as_ref().unwrap()[i]),
                num_arms: actions.len(),
            },
            Algorithm::Fixed(arm) => Policy::Baseline {
                kind: Baseline::Fixed(arm),
                num_arms: actions.len(),
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1 + i as u64);
        nodes.push(Node {
            pos: *pos,
            policy,
            shaper: RewardShaper::new(config.beta, energy.clone(), config.energy_ratio),
            rng,
            energy: 0.0,
            sent: 0,
            succeeded: 0,
            arm_counts: vec![0; actions.len()],
            arms: Vec::with_capacity(horizon),
        });
    }

    let link = LinkModel::from_config(config);
    let gap = Exp::new(1.0 / config.t_rep_s).expect("t_rep is positive");
    let channels = config.phy.num_channels;
    let slot_of = |a: &Action| a.sf.index() * channels + a.channel;
    let mut on_air: Vec<Vec<usize>> = vec![Vec::new(); 6 * channels];
    let mut live: Vec<Live> = Vec::new();
    let mut queue = Queue {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut success_sum = vec![0.0; horizon];
    let mut energy_sum = vec![0.0; horizon];
    // devices still short of the horizon; the rest keep transmitting unrecorded
    let mut unfinished = if horizon > 0 { nodes.len() } else { 0 };

    if horizon > 0 {
        for i in 0..nodes.len() {
            let t: f64 = gap.sample(&mut env);
            queue.push(t, Kind::Start(i));
        }
    }

    while let Some(ev) = queue.heap.pop() {
        match ev.kind {
            Kind::Start(i) => {
                let node = &mut nodes[i];
                let arm = node.policy.select(&mut node.rng)?;
                let action = &actions[arm];
                let h: f64 = Exp1.sample(&mut env);
                let rx_w = link.mean_rx_power(node.pos.radius, action.power_dbm) * h;
                let slot = slot_of(action);
                let id = live.len();
                let mut interference_w = 0.0;
                for &other in &on_air[slot] {
                    live[other].interference_w += rx_w;
                    interference_w += live[other].rx_w;
                }
                on_air[slot].push(id);
                live.push(Live {
                    device: i,
                    arm,
                    packet: node.sent,
                    rx_w,
                    interference_w,
                    slot,
                });
                node.sent += 1;
                queue.push(ev.time + airtime[arm], Kind::End(id));
            }
            Kind::End(id) => {
                let (device, arm, packet, slot) = {
                    let l = &live[id];
                    (l.device, l.arm, l.packet, l.slot)
                };
                on_air[slot].retain(|&x| x != id);
                let action = &actions[arm];
                let captured = capture(live[id].rx_w, live[id].interference_w, action.sf, &link);
                let erased = env.random::<f64>() < link.external.prob(action.sf, action.channel);
                let success = captured && !erased;
                let ack = feedback(success, config.adversary.flip_prob, &mut env);

                let node = &mut nodes[device];
                let reward = node.shaper.shape(ack, arm);
                node.policy.observe(arm, reward)?;
                if packet < horizon {
                    node.energy += energy[arm];
                    node.arms.push(arm);
                    node.arm_counts[arm] += 1;
                    if success {
                        node.succeeded += 1;
                        success_sum[packet] += 1.0;
                    }
                    energy_sum[packet] += energy[arm];
                    if packet + 1 == horizon {
                        unfinished -= 1;
                    }
                }
                if unfinished > 0 {
                    let t: f64 = gap.sample(&mut env);
                    queue.push(ev.time + t, Kind::Start(device));
                }
            }
        }
    }

    let n = nodes.len().max(1) as f64;
    let log = MetricsLog {
        algorithm: config.algorithm.to_string(),
        seed_count: 1,
        success: success_sum.iter().map(|s| s / n).collect(),
        energy_j: energy_sum.iter().map(|e| e / n).collect(),
    };
    let devices = nodes
        .into_iter()
        .map(|node| DeviceSummary {
            id: node.pos.id,
            radius: node.pos.radius,
            angle: node.pos.angle,
            energy_spent: node.energy,
            packets_sent: node.sent.min(horizon),
            packets_succeeded: node.succeeded,
            arm_counts: node.arm_counts,
            arms: node.arms,
        })
        .collect();
    Ok(SimOutcome {
        log,
        devices,
        actions,
    })
}

/// Fixed arm per device for the rate-proportional baseline: SF by distance,
/// sub-channels dealt round-robin, power closest to the fixed level.
fn eqload_arms(config: &SimConfig, positions: &[Device], actions: &[Action]) -> Vec<usize> {
    let radii: Vec<f64> = positions.iter().map(|d| d.radius).collect();
    let sfs = eqload_allocate(&radii, &config.sf_set, &config.phy);
    let channels = config.phy.num_channels;
    sfs.iter()
        .enumerate()
        .map(|(i, &sf)| {
            let channel = i % channels;
            actions
                .iter()
                .enumerate()
                .filter(|(_, a)| a.sf == sf && a.channel == channel)
                .min_by(|(_, a), (_, b)| {
                    (a.power_dbm - config.fixed_power_dbm)
                        .abs()
                        .total_cmp(&(b.power_dbm - config.fixed_power_dbm).abs())
                })
                .map(|(k, _)| k)
                .expect("every SF and channel has an arm")
        })
        .collect()
}
