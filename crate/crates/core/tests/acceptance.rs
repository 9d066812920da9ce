//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use selforg::analytic::{
    network_success, optimize_densities, reliability_term, ring_exponent, ring_exponent_quadrature,
    success_probability, DensityMatrix, OptimizerSettings, RingPartition,
};
use selforg::cli::{bandit_bench, load_preset, BenchSpec};
use selforg::netsim::{
    evaluate_attempt, run_detailed, run_seeds, Algorithm, Attempt, CaptureRule, LinkModel,
    Population, SimConfig,
};
use selforg::phy::{time_on_air, SpreadingFactor};

// Tolerances and budgets.
const CLOSED_FORM_REL_TOL: f64 = 1e-9;
const CLOSED_FORM_TUPLES: usize = 100;
const CLOSED_FORM_BUDGET: Duration = Duration::from_secs(10);
const MC_TRIALS: usize = 100_000;
const MC_SIGMAS: f64 = 3.0;
const MC_BUDGET: Duration = Duration::from_secs(120);
const REGRET_SEEDS: u64 = 100;
const REGRET_ROUNDS: usize = 10_000;
const OPTIMAL_RATE_MIN: f64 = 0.95;
const REGRET_FRACTION_MAX: f64 = 0.02;
const REGRET_GROWTH_MAX: f64 = 4.0;
const FIG3_SEEDS: u64 = 20;
const FIG3_REL_TOL: f64 = 0.10;
const FIG3_MARGIN: f64 = 0.05;
const FIG3_BUDGET: Duration = Duration::from_secs(300);
const FIG7_SEEDS: u64 = 10;
const FIG7_SUCCESS_GAIN: f64 = 1.30;
const FIG7_ENERGY_RATIO: f64 = 0.60;
const ADVERSARY_SEEDS: u64 = 50;
const PROPERTY_CASES: u32 = 64;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sf(v: u8) -> SpreadingFactor {
    SpreadingFactor::new(v).unwrap()
}

fn seeds(n: u64) -> Vec<u64> {
    (1..=n).collect()
}

/// Romberg integration to a relative tolerance.
fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mut prev = vec![0.5 * (b - a) * (f(a) + f(b))];
    for level in 1..30 {
        let n = 1usize << level;
        let h = (b - a) / n as f64;
        let mid: f64 = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let mut row = vec![0.5 * prev[0] + h * mid];
        for k in 1..=level {
            let p = 4f64.powi(k as i32);
            row.push((p * row[k - 1] - prev[k - 1]) / (p - 1.0));
        }
        let (new, old) = (row[level], prev[level - 1]);
        if level > 4 && (new - old).abs() <= 1e-14 * new.abs() {
            return new;
        }
        prev = row;
    }
    prev[prev.len() - 1]
}

fn closed_form_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let part = RingPartition::uniform(2000.0, 20).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_crate: f64 = 0.0;
    for _ in 0..CLOSED_FORM_TUPLES {
        let z = rng.random_range(1.0..2000.0);
        let gamma_db = rng.random_range(-3.0..12.0);
        let ring = rng.random_range(0..part.len());
        let lambda = 10f64.powf(rng.random_range(-7.0..-3.0));
        let c = sf(rng.random_range(7..=12));
        let mut config = SimConfig::default();
        config.phy.sir_threshold_db = gamma_db;
        let sc = selforg::analytic::AnalyticScenario {
            lambda_total: lambda,
            ..config.analytic_scenario()
        };
        let dm = DensityMatrix::single_sf(vec![c], lambda, part.len(), 0).unwrap();
        let got = ring_exponent(z, c, ring, &dm, &sc, &part);

        let gamma = 10f64.powf(gamma_db / 10.0);
        let activity = time_on_air(sc.payload, c, &sc.phy).unwrap() / sc.t_rep;
        let (r1, r2) = part.ring(ring);
        let kernel = |r: f64| 2.0 * PI * r / (1.0 + (r / z).powi(4) / gamma);
        let want = lambda * activity * romberg(kernel, r1, r2);
        worst = worst.max((got - want).abs() / want);
        let quad = ring_exponent_quadrature(z, c, ring, &dm, &sc, &part);
        worst_crate = worst_crate.max((got - quad).abs() / quad);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= CLOSED_FORM_REL_TOL && worst_crate <= CLOSED_FORM_REL_TOL && elapsed < CLOSED_FORM_BUDGET,
        format!(
            "max rel err {worst:.2e} vs Romberg, {worst_crate:.2e} vs adaptive Simpson (tol {CLOSED_FORM_REL_TOL:.0e}); {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Snapshot of a Poisson field of active same-SF interferers around a
/// transmitter at distance `z`, fed through the simulator's link layer.
fn monte_carlo_vs_analytic() -> Outcome {
    let start = Instant::now();
    let mut config = SimConfig {
        population: Population::Count(4000),
        t_rep_s: 100.0,
        capture: CaptureRule::Additive,
        ..SimConfig::default()
    };
    config.phy.num_channels = 1;
    let sc = config.analytic_scenario();
    let part = RingPartition::uniform(config.cell_radius_m, 20).unwrap();
    let sfs = SpreadingFactor::all();
    let dm = DensityMatrix::uniform(sfs.clone(), sc.lambda_total, part.len()).unwrap();
    let link = LinkModel::from_config(&config);
    let probes = [
        (7, 500.0),
        (7, 1500.0),
        (8, 800.0),
        (8, 1800.0),
        (9, 350.0),
        (9, 1000.0),
        (10, 400.0),
        (11, 250.0),
        (12, 150.0),
        (12, 350.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (c, z) in probes {
        let c = sf(c);
        let want = success_probability(c, z, &dm, &sc, &part);
        let col = dm.column(c).unwrap();
        let activity = sc.activity(c);
        let tx = Attempt {
            radius: z,
            power_dbm: config.fixed_power_dbm,
            sf: c,
            channel: 0,
            start: 0.0,
            end: 1.0,
        };
        let poissons: Vec<(f64, f64, Option<Poisson<f64>>)> = (0..part.len())
            .map(|j| {
                let (r1, r2) = part.ring(j);
                let mean = dm.get(j, col) * activity * PI * (r2 * r2 - r1 * r1);
                (r1, r2, (mean > 0.0).then(|| Poisson::new(mean).unwrap()))
            })
            .collect();
        let mut hits = 0usize;
        let mut field = Vec::new();
        for _ in 0..MC_TRIALS {
            field.clear();
            for (r1, r2, p) in &poissons {
                let Some(p) = p else { continue };
                let n = p.sample(&mut rng) as usize;
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let r = (r1 * r1 + u * (r2 * r2 - r1 * r1)).sqrt();
                    field.push(Attempt { radius: r, ..tx });
                }
            }
            if evaluate_attempt(&tx, &field, &link, &mut rng) {
                hits += 1;
            }
        }
        let got = hits as f64 / MC_TRIALS as f64;
        let se = (want * (1.0 - want) / MC_TRIALS as f64).sqrt();
        let k = (got - want).abs() / se;
        worst = worst.max(k);
        lines.push(format!("SF{}@{z}m {got:.4}/{want:.4}", c.value()));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= MC_SIGMAS && elapsed < MC_BUDGET,
        format!(
            "worst deviation {worst:.2} SE over 10 probes (limit {MC_SIGMAS}); {:.1}s; [{}]",
            elapsed.as_secs_f64(),
            lines.join(", ")
        ),
    )
}

fn noise_only_law() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for seed in [1, 2, 3] {
        let mut config = SimConfig {
            population: Population::Count(1),
            sf_set: vec![sf(7)],
            algorithm: Algorithm::Fixed(0),
            packets_per_device: MC_TRIALS,
            t_rep_s: 1.0,
            seed,
            ..SimConfig::default()
        };
        config.phy.num_channels = 1;
        let out = run_detailed(&config).unwrap();
        let d = &out.devices[0];
        let noise = 10f64.powf((-174.0 + 6.0 - 30.0) / 10.0) * 125e3;
        let gamma = 10f64.powf(-6.0 / 10.0);
        let p_t = 10f64.powf((14.0 - 30.0) / 10.0);
        let g = 10f64.powf(-8.1 / 10.0);
        let want = (-noise * gamma * d.radius.powi(4) / (p_t * g)).exp();
        let got = d.packets_succeeded as f64 / MC_TRIALS as f64;
        let se = (want * (1.0 - want) / MC_TRIALS as f64).sqrt().max(1e-12);
        worst = worst.max((got - want).abs() / se);
        lines.push(format!("z={:.0}m {got:.4}/{want:.4}", d.radius));
    }
    outcome(
        worst <= MC_SIGMAS,
        format!(
            "worst {worst:.2} SE (limit {MC_SIGMAS}); [{}]",
            lines.join(", ")
        ),
    )
}

fn two_exponential_capture() -> Outcome {
    let mut config = SimConfig::default();
    config.phy.noise_psd_dbm_hz = f64::NEG_INFINITY;
    let link = LinkModel::from_config(&config);
    let tx = Attempt {
        radius: 500.0,
        power_dbm: 14.0,
        sf: sf(9),
        channel: 0,
        start: 0.0,
        end: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let hits = (0..MC_TRIALS)
        .filter(|_| evaluate_attempt(&tx, &[tx], &link, &mut rng))
        .count();
    let got = hits as f64 / MC_TRIALS as f64;
    let want = 1.0 / (1.0 + 10f64.powf(0.6));
    let se = (want * (1.0 - want) / MC_TRIALS as f64).sqrt();
    let k = (got - want).abs() / se;
    outcome(
        k <= MC_SIGMAS,
        format!("{got:.4} vs 1/(1+gamma) = {want:.4}: {k:.2} SE (limit {MC_SIGMAS})"),
    )
}

fn regret_properties() -> Outcome {
    let spec = BenchSpec {
        means: vec![0.9, 0.5],
        rounds: REGRET_ROUNDS,
        seeds: seeds(REGRET_SEEDS),
        ..BenchSpec::default()
    };
    let ucb = bandit_bench(Algorithm::Uucb1, &spec).unwrap();
    let rate = ucb.optimal_rate_between(5000, 10_000);
    let r_n = ucb.regret_at(10_000);
    let growth = r_n / ucb.regret_at(1000);
    let flipped = BenchSpec {
        flip_prob: 0.3,
        ..spec.clone()
    };
    let exp3 = bandit_bench(Algorithm::Uexp3, &flipped).unwrap();
    let rand = bandit_bench(Algorithm::RandSel, &flipped).unwrap();
    let (e, r) = (exp3.reward_at(1000), rand.reward_at(1000));
    let pass = rate >= OPTIMAL_RATE_MIN
        && r_n < REGRET_FRACTION_MAX * REGRET_ROUNDS as f64
        && growth < REGRET_GROWTH_MAX
        && e > r;
    outcome(
        pass,
        format!(
            "UUCB1 optimal rate {rate:.4} (>= {OPTIMAL_RATE_MIN}), regret(1e4) {r_n:.1} (< {}), regret(1e4)/regret(1e3) {growth:.2} (< {REGRET_GROWTH_MAX}); flip 0.3 reward by 1e3: UEXP3 {e:.1} vs RandSel {r:.1}",
            REGRET_FRACTION_MAX * REGRET_ROUNDS as f64
        ),
    )
}

fn fig3() -> Outcome {
    let start = Instant::now();
    let config = load_preset("fig3").unwrap();
    let sc = config.analytic_scenario();
    let part = RingPartition::uniform(config.cell_radius_m, 20).unwrap();
    let best =
        optimize_densities(&sc, &part, &config.sf_set, OptimizerSettings::default()).unwrap();
    let analytic = network_success(&best.density, &sc, &part);
    let reliability = reliability_term(&best.density, &sc, &part) / part.len() as f64;
    // any overlap collides, so each attempt is exposed for two airtimes
    let exposed = selforg::analytic::AnalyticScenario {
        t_rep: sc.t_rep / 2.0,
        ..sc.clone()
    };
    let best2 = optimize_densities(
        &exposed,
        &part,
        &config.sf_set,
        OptimizerSettings::default(),
    )
    .unwrap();
    let analytic_2tc = network_success(&best2.density, &exposed, &part);
    let s = seeds(FIG3_SEEDS);
    let learn = run_seeds(&config, &s).unwrap().mean_success(50, 100);
    let rand = run_seeds(
        &SimConfig {
            algorithm: Algorithm::RandSel,
            ..config.clone()
        },
        &s,
    )
    .unwrap()
    .mean_success(50, 100);
    let rel = (learn - analytic).abs() / analytic;
    let elapsed = start.elapsed();
    outcome(
        rel <= FIG3_REL_TOL && learn - rand >= FIG3_MARGIN && elapsed < FIG3_BUDGET,
        format!(
            "UUCB1 {learn:.4} vs optimized analytic {analytic:.4} (rel {rel:.3}, limit {FIG3_REL_TOL}; ring-mean reliability {reliability:.4}; with a two-airtime exposure window {analytic_2tc:.4}); RandSel {rand:.4} (margin {:.3}, need {FIG3_MARGIN}); {:.1}s",
            learn - rand,
            elapsed.as_secs_f64()
        ),
    )
}

fn fig7() -> Outcome {
    let config = load_preset("sc3").unwrap();
    let s = seeds(FIG7_SEEDS);
    let horizon = config.packets_per_device;
    let pc = run_seeds(
        &SimConfig {
            power_control: true,
            ..config.clone()
        },
        &s,
    )
    .unwrap();
    let rand = run_seeds(
        &SimConfig {
            algorithm: Algorithm::RandSel,
            ..config.clone()
        },
        &s,
    )
    .unwrap();
    let from = horizon - 50;
    let (sp, sr) = (
        pc.mean_success(from, horizon),
        rand.mean_success(from, horizon),
    );
    let (ep, er) = (
        pc.mean_energy(from, horizon),
        rand.mean_energy(from, horizon),
    );
    outcome(
        sp >= FIG7_SUCCESS_GAIN * sr && ep <= FIG7_ENERGY_RATIO * er,
        format!(
            "Alg1(PC) success {sp:.4} vs RandSel {sr:.4} (x{:.2}, need x{FIG7_SUCCESS_GAIN}); energy {:.3} vs {:.3} mJ (ratio {:.2}, need <= {FIG7_ENERGY_RATIO})",
            sp / sr,
            ep * 1e3,
            er * 1e3,
            ep / er
        ),
    )
}

fn adversarial() -> Outcome {
    let config = SimConfig {
        power_control: true,
        ..load_preset("sc2").unwrap()
    };
    let s = seeds(ADVERSARY_SEEDS);
    let horizon = config.packets_per_device;
    let converged = |algorithm: Algorithm, flip: f64| {
        let mut c = SimConfig {
            algorithm,
            ..config.clone()
        };
        c.adversary.flip_prob = flip;
        run_seeds(&c, &s)
            .unwrap()
            .mean_success(horizon - 50, horizon)
    };
    let (e3, u3) = (
        converged(Algorithm::Uexp3, 0.3),
        converged(Algorithm::Uucb1, 0.3),
    );
    let (e5, u5) = (
        converged(Algorithm::Uexp3, 0.5),
        converged(Algorithm::Uucb1, 0.5),
    );
    outcome(
        e3 >= u3,
        format!(
            "flip 0.3: UEXP3 {e3:.4} vs UUCB1 {u3:.4}; flip 0.5 (reported only): UEXP3 {e5:.4} vs UUCB1 {u5:.4}"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_selforg");
    let mut files = Vec::new();
    for (i, algorithm) in ["uucb1", "uucb1", "uexp3", "uexp3"].iter().enumerate() {
        let path = dir.path().join(format!("{i}.csv"));
        let status = Command::new(bin)
            .args([
                "simulate",
                "--preset",
                "sc1",
                "--seeds",
                "3,8",
                "--packets",
                "15",
                "--algorithm",
                algorithm,
                "--out",
                path.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        files.push(std::fs::read(&path).unwrap());
    }
    let same = files[0] == files[1] && files[2] == files[3] && !files[0].is_empty();
    outcome(
        same,
        format!(
            "two identical simulate invocations per algorithm: {} / {} bytes, identical = {same}",
            files[0].len(),
            files[2].len()
        ),
    )
}

fn invariants() -> Outcome {
    let results = [
        (
            "counter conservation",
            common::ucb_counter_conservation(PROPERTY_CASES),
        ),
        (
            "EXP3 floor",
            common::exp3_distribution_floor(PROPERTY_CASES),
        ),
        (
            "simplex feasibility",
            common::optimizer_simplex(PROPERTY_CASES / 4),
        ),
        (
            "energy accounting",
            common::energy_accounting(PROPERTY_CASES),
        ),
    ];
    let pass = results.iter().all(|(_, r)| r.is_ok());
    let detail = results
        .iter()
        .map(|(n, r)| format!("{n}: {}", common::fail_msg(r)))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed form vs quadrature", closed_form_vs_quadrature),
        ("analytic vs Monte Carlo", monte_carlo_vs_analytic),
        ("noise-only law", noise_only_law),
        ("two-exponential capture", two_exponential_capture),
        ("regret properties", regret_properties),
        ("fig3 reproduction", fig3),
        ("fig7 reproduction", fig7),
        ("adversarial ordering", adversarial),
        ("determinism", determinism),
        ("invariant suites", invariants),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let o = f();
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
