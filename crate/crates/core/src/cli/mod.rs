//! Command-line front end: presets, config files, subcommands and writers.
//!
//! Settings resolve as command-line flags over config file (or preset) over
//! built-in defaults.

mod bench;
mod config;
mod output;
mod presets;

pub use bench::{bandit_bench, BenchCurve, BenchSpec};
pub use config::{dump_config, load_config, parse_config};
pub use output::{
    density_csv, metrics_csv, metrics_json, open_output, ps_table_csv, tool_version, write_metrics,
    Format, Metadata, MetricsJson, CSV_COLUMNS,
};
pub use presets::{load_preset, ERASURE_RANGE, PRESETS, PRESET_DEVICES};

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analytic::{
    network_success, optimize_densities, reliability_term, success_probability, DensityMatrix,
    OptimizerSettings, RingPartition,
};
use crate::bandit::IndexMode;
use crate::error::{Error, Result};
use crate::netsim::{run_seeds, AdversaryModel, Algorithm, SimConfig};

#[derive(Debug, Parser)]
#[command(
    name = "selforg",
    version,
    about = "Self-organizing LoRa cells: learners, analysis and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a cell and write per-packet success and energy curves.
    Simulate(SimulateArgs),
    /// Tabulate the analytic success probability over distance for each SF.
    AnalyticPs(AnalyticPsArgs),
    /// Optimize per-ring SF densities and write them with the winning SF.
    AnalyticOptimize(AnalyticOptimizeArgs),
    /// Run the learners on a synthetic Bernoulli bandit.
    BanditBench(BenchArgs),
}

/// Where the scenario comes from.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Named scenario: sc1, sc2, sc3 or fig3.
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Flags that override the scenario.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Packets per device.
    #[arg(long)]
    pub packets: Option<usize>,
    /// uucb1, uexp3, randsel, eqload or fixed:<arm>.
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Let devices choose the transmit power too.
    #[arg(long)]
    pub power_control: bool,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub adversary_flip_prob: Option<f64>,
    /// UCB exploitation term: mean or accumulated reward.
    #[arg(long, value_parser = parse_index_mode)]
    pub index_mode: Option<IndexMode>,
}

fn parse_index_mode(s: &str) -> std::result::Result<IndexMode, String> {
    match s {
        "mean" => Ok(IndexMode::Mean),
        "accumulated" => Ok(IndexMode::Accumulated),
        _ => Err(format!("`{s}`: expected mean or accumulated")),
    }
}

impl Overrides {
    pub fn apply(&self, config: &mut SimConfig) {
        if let Some(p) = self.packets {
            config.packets_per_device = p;
        }
        if let Some(a) = self.algorithm {
            config.algorithm = a;
        }
        if self.power_control {
            config.power_control = true;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.rho {
            config.rho = v;
        }
        if let Some(v) = self.adversary_flip_prob {
            config.adversary = AdversaryModel { flip_prob: v };
        }
        if let Some(m) = self.index_mode {
            config.index_mode = m;
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Comma-separated seeds, or a single count N meaning seeds 1..=N.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AnalyticPsArgs {
    #[command(flatten)]
    pub source: Source,
    /// Distances sampled over the cell.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 20)]
    pub rings: usize,
    /// Evaluate against the optimized allocation instead of an even split.
    #[arg(long)]
    pub optimized: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyticOptimizeArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 20)]
    pub rings: usize,
    /// Share resolution of the per-ring search: shares are multiples of 1/grid.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated arm success probabilities.
    #[arg(long, default_value = "0.9,0.5")]
    pub means: String,
    #[arg(long, default_value_t = 10_000)]
    pub rounds: usize,
    /// Comma-separated seeds, or a count N meaning seeds 1..=N.
    #[arg(long, default_value = "100")]
    pub seeds: String,
    #[arg(long, default_value_t = 0.0)]
    pub flip_prob: f64,
    /// Comma-separated algorithms.
    #[arg(long, default_value = "uucb1,uexp3,randsel")]
    pub algorithms: String,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    pub rho: f64,
    #[arg(long, value_parser = parse_index_mode)]
    pub index_mode: Option<IndexMode>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubcommandKind {
    Simulate,
    AnalyticPs,
    AnalyticOptimize,
    BanditBench,
}

/// A resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub subcommand: SubcommandKind,
    pub preset: Option<String>,
    pub config_path: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.preset.is_some() == self.config_path.is_some() {
            return Err(Error::InvalidParameter(
                "give exactly one of --preset and --config".into(),
            ));
        }
        if self.subcommand == SubcommandKind::Simulate && self.seeds.is_empty() {
            return Err(Error::EmptySet("seed"));
        }
        Ok(())
    }

    /// Loads the scenario named by the preset or config path.
    pub fn base_config(&self) -> Result<SimConfig> {
        self.validate()?;
        match (&self.preset, &self.config_path) {
            (Some(name), None) => load_preset(name),
            (None, Some(path)) => load_config(path),
            _ => unreachable!("validated"),
        }
    }
}

/// `"3"` -> 1, 2, 3; `"7,9"` -> 7, 9.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = |e: std::num::ParseIntError| Error::InvalidParameter(format!("seeds `{s}`: {e}"));
    let seeds = if s.contains(',') {
        s.split(',')
            .map(|p| p.trim().parse::<u64>().map_err(bad))
            .collect::<Result<Vec<_>>>()?
    } else {
        let n: u64 = s.trim().parse().map_err(bad)?;
        (1..=n).collect()
    };
    if seeds.is_empty() {
        return Err(Error::EmptySet("seed"));
    }
    Ok(seeds)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad {what} `{p}`")))
        })
        .collect()
}

fn spec(
    subcommand: SubcommandKind,
    source: &Source,
    seeds: Vec<u64>,
    out: &Option<PathBuf>,
    format: Format,
) -> RunSpec {
    RunSpec {
        subcommand,
        preset: source.preset.clone(),
        config_path: source.config.clone(),
        seeds,
        out: out.clone(),
        format,
    }
}

/// Resolves the config for `simulate` with the documented precedence.
pub fn resolve_simulation(args: &SimulateArgs) -> Result<(RunSpec, SimConfig)> {
    let run = spec(
        SubcommandKind::Simulate,
        &args.source,
        parse_seeds(&args.seeds)?,
        &args.out,
        args.format,
    );
    let mut config = run.base_config()?;
    args.overrides.apply(&mut config);
    config.seed = run.seeds[0];
    config.validate()?;
    Ok((run, config))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let (run, config) = resolve_simulation(&args)?;
            log::info!(
                "simulating {} over {} seed(s)",
                config.algorithm,
                run.seeds.len()
            );
            let log = run_seeds(&config, &run.seeds)?;
            write_metrics(&log, &config, &run.seeds, run.out.as_deref(), run.format)
        }
        Command::AnalyticPs(args) => {
            let run = spec(
                SubcommandKind::AnalyticPs,
                &args.source,
                vec![],
                &args.out,
                Format::Csv,
            );
            let config = run.base_config()?;
            let sc = config.analytic_scenario();
            let part = RingPartition::uniform(config.cell_radius_m, args.rings)?;
            let dm = if args.optimized {
                optimize_densities(&sc, &part, &config.sf_set, OptimizerSettings::default())?
                    .density
            } else {
                DensityMatrix::uniform(config.sf_set.clone(), sc.lambda_total, args.rings)?
            };
            let points = args.points.max(1);
            let mut rows = Vec::with_capacity(points * config.sf_set.len());
            for i in 1..=points {
                let z = config.cell_radius_m * i as f64 / points as f64;
                for &sf in &config.sf_set {
                    rows.push((z, sf.value(), success_probability(sf, z, &dm, &sc, &part)));
                }
            }
            let mut out = open_output(run.out.as_deref())?;
            ps_table_csv(&mut out, &rows, &config)?;
            out.flush()?;
            Ok(())
        }
        Command::AnalyticOptimize(args) => {
            let run = spec(
                SubcommandKind::AnalyticOptimize,
                &args.source,
                vec![],
                &args.out,
                Format::Csv,
            );
            let mut config = run.base_config()?;
            if let Some(b) = args.beta {
                config.beta = b;
            }
            config.validate()?;
            let sc = config.analytic_scenario();
            let part = RingPartition::uniform(config.cell_radius_m, args.rings)?;
            let settings = OptimizerSettings {
                grid: args.grid,
                ..OptimizerSettings::default()
            };
            let result = optimize_densities(&sc, &part, &config.sf_set, settings)?;
            log::info!(
                "objective {:.6} after {} sweep(s); reliability {:.6}; network success {:.6}",
                result.objective,
                result.sweeps,
                reliability_term(&result.density, &sc, &part),
                network_success(&result.density, &sc, &part)
            );
            let mut out = open_output(run.out.as_deref())?;
            density_csv(&mut out, &result.density, &part, &config)?;
            out.flush()?;
            Ok(())
        }
        Command::BanditBench(args) => {
            let bench = BenchSpec {
                means: parse_list(&args.means, "arm mean")?,
                rounds: args.rounds,
                seeds: parse_seeds(&args.seeds)?,
                flip_prob: args.flip_prob,
                alpha: args.alpha,
                rho: args.rho,
                index_mode: args.index_mode.unwrap_or_default(),
            };
            let algorithms: Vec<Algorithm> = parse_list(&args.algorithms, "algorithm")?;
            let mut out = open_output(args.out.as_deref())?;
            let mut w = csv::Writer::from_writer(&mut out);
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record([
                "round",
                "algorithm",
                "cumulative_regret",
                "optimal_arm_rate",
                "cumulative_reward",
                "seed_count",
            ])
            .map_err(io)?;
            for a in algorithms {
                let c = bandit_bench(a, &bench)?;
                for t in 0..bench.rounds {
                    w.write_record([
                        (t + 1).to_string(),
                        a.to_string(),
                        c.cumulative_regret[t].to_string(),
                        c.optimal_rate[t].to_string(),
                        c.cumulative_reward[t].to_string(),
                        bench.seeds.len().to_string(),
                    ])
                    .map_err(io)?;
                }
            }
            w.flush()?;
            drop(w);
            out.flush()?;
            Ok(())
        }
    }
}
