//! Randomized invariant checks shared by the invariant and acceptance tests.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selforg::analytic::{
    optimize_densities_with, AnalyticScenario, OptimizerSettings, RingPartition,
};
use selforg::bandit::{Exp3State, IndexMode, Ucb1State};
use selforg::netsim::{run_detailed, Algorithm, Population, SimConfig};
use selforg::phy::{tx_energy, SpreadingFactor};

pub type Outcome = Result<(), TestError<String>>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn flatten<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Outcome {
    r.map_err(|e| match e {
        TestError::Abort(m) => TestError::Abort(m),
        TestError::Fail(m, v) => TestError::Fail(m, format!("{v:?}")),
    })
}

/// After `n` updates the UCB counters hold `K + n` pulls in total.
pub fn ucb_counter_conservation(cases: u32) -> Outcome {
    let strat = (
        1usize..20,
        0usize..400,
        0.0f64..2.0,
        any::<bool>(),
        any::<u64>(),
    );
    flatten(runner(cases).run(&strat, |(k, n, alpha, mean, seed)| {
        let mode = if mean {
            IndexMode::Mean
        } else {
            IndexMode::Accumulated
        };
        let mut s = Ucb1State::with_mode(k, alpha, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            let arm = s.select(&mut rng);
            let r: f64 = rng.random();
            s.update(arm, r).unwrap();
        }
        prop_assert_eq!(s.t_count().iter().sum::<u64>(), (k + n) as u64);
        Ok(())
    }))
}

/// EXP3 keeps a probability vector with every entry at least `rho / K`.
pub fn exp3_distribution_floor(cases: u32) -> Outcome {
    let strat = (1usize..16, 0.01f64..=1.0, 0usize..300, any::<u64>());
    flatten(runner(cases).run(&strat, |(k, rho, n, seed)| {
        let mut s = Exp3State::new(k, rho).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let floor = rho / k as f64;
        for _ in 0..=n {
            let p = s.distribution().unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "sum {}", total);
            for &pk in &p {
                prop_assert!(pk >= floor * (1.0 - 1e-12), "{} below floor {}", pk, floor);
                prop_assert!(pk <= 1.0 + 1e-12);
            }
            let (arm, prob) = s.select(&mut rng).unwrap();
            let r = if rng.random::<bool>() {
                1.0
            } else {
                rng.random()
            };
            s.update(arm, r, prob).unwrap();
        }
        Ok(())
    }))
}

fn sf_subset() -> impl Strategy<Value = Vec<SpreadingFactor>> {
    proptest::sample::subsequence((7u8..=12).collect::<Vec<_>>(), 1..=6).prop_map(|v| {
        v.into_iter()
            .map(|x| SpreadingFactor::new(x).unwrap())
            .collect()
    })
}

/// Every optimizer iterate is a nonnegative allocation whose rings each
/// carry the full density.
pub fn optimizer_simplex(cases: u32) -> Outcome {
    let strat = (
        sf_subset(),
        1usize..5,
        100.0f64..5000.0,
        20.0f64..1000.0,
        0.0f64..=1.0,
        2usize..12,
    );
    flatten(
        runner(cases).run(&strat, |(sfs, rings, n_devices, t_rep, beta, grid)| {
            let radius = 2000.0;
            let sc = AnalyticScenario {
                lambda_total: n_devices / (std::f64::consts::PI * radius * radius),
                t_rep,
                beta,
                ..SimConfig::default().analytic_scenario()
            };
            let part = RingPartition::uniform(radius, rings).unwrap();
            let settings = OptimizerSettings {
                grid,
                max_sweeps: 5,
                nodes_per_ring: 8,
                ..OptimizerSettings::default()
            };
            let mut bad = None;
            let mut seen = 0;
            optimize_densities_with(&sc, &part, &sfs, settings, |dm| {
                seen += 1;
                for j in 0..rings {
                    let row: Vec<f64> = (0..sfs.len()).map(|c| dm.get(j, c)).collect();
                    let total: f64 = row.iter().sum();
                    if row.iter().any(|&v| v < 0.0)
                        || (total - sc.lambda_total).abs() > 1e-9 * sc.lambda_total
                    {
                        bad = Some(format!("ring {j}: {row:?} (total {total})"));
                    }
                }
            })
            .unwrap();
            prop_assert!(seen > 0);
            prop_assert!(bad.is_none(), "{:?}", bad);
            Ok(())
        }),
    )
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![
        Just(Algorithm::Uucb1),
        Just(Algorithm::Uexp3),
        Just(Algorithm::RandSel),
        Just(Algorithm::EqLoad),
        Just(Algorithm::Fixed(0)),
    ]
}

/// A device's energy equals the sum of the energies of the arms it played.
pub fn energy_accounting(cases: u32) -> Outcome {
    let strat = (
        1usize..30,
        0usize..30,
        algorithm(),
        any::<bool>(),
        1usize..4,
        1usize..200,
        any::<u64>(),
    );
    flatten(runner(cases).run(
        &strat,
        |(n, packets, algorithm, power_control, channels, payload, seed)| {
            let mut config = SimConfig {
                population: Population::Count(n),
                packets_per_device: packets,
                algorithm,
                power_control,
                payload_bytes: payload,
                t_rep_s: 5.0,
                seed,
                ..SimConfig::default()
            };
            config.phy.num_channels = channels;
            let out = run_detailed(&config).unwrap();
            for d in &out.devices {
                prop_assert_eq!(d.arms.len(), packets);
                let mut want = 0.0;
                for &arm in &d.arms {
                    want += tx_energy(&out.actions[arm], payload, &config.phy).unwrap();
                }
                prop_assert_eq!(d.energy_spent, want);
                let mut counts = vec![0u32; out.actions.len()];
                for &arm in &d.arms {
                    counts[arm] += 1;
                }
                prop_assert_eq!(&counts, &d.arm_counts);
            }
            Ok(())
        },
    ))
}

pub fn fail_msg(o: &Outcome) -> String {
    match o {
        Ok(()) => "ok".into(),
        Err(e) => e.to_string(),
    }
}
