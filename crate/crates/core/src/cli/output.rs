use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::dump_config;
use crate::analytic::{DensityMatrix, RingPartition};
use crate::error::{Error, Result};
use crate::netsim::{MetricsLog, SimConfig};

/// Header of the metrics CSV, in order.
pub const CSV_COLUMNS: [&str; 6] = [
    "packet_index",
    "success_rate",
    "success_rate_ma10",
    "energy_per_trial_mj",
    "algorithm",
    "seed_count",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// JSON mirror of the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsJson {
    pub packet_index: Vec<usize>,
    pub success_rate: Vec<f64>,
    pub success_rate_ma10: Vec<f64>,
    pub energy_per_trial_mj: Vec<f64>,
    pub algorithm: Vec<String>,
    pub seed_count: Vec<usize>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub seeds: Vec<u64>,
    /// The resolved configuration in the config-file schema.
    pub config: toml::Table,
}

pub fn tool_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Writes `# ` prefixed lines carrying the resolved config and seeds.
fn write_preamble<W: Write>(out: &mut W, config: &SimConfig, seeds: &[u64]) -> io::Result<()> {
    writeln!(out, "# {}", tool_version())?;
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    writeln!(out, "# seeds = [{}]", seeds.join(", "))?;
    for line in dump_config(config).lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Metrics table as CSV (config preamble, header, one row per packet index).
pub fn metrics_csv<W: Write>(
    out: W,
    log: &MetricsLog,
    config: &SimConfig,
    seeds: &[u64],
) -> Result<()> {
    let mut out = out;
    write_preamble(&mut out, config, seeds)?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    let ma = log.success_moving_average(10);
    for (k, ((s, m), e)) in log.success.iter().zip(&ma).zip(&log.energy_j).enumerate() {
        w.write_record([
            k.to_string(),
            s.to_string(),
            m.to_string(),
            (e * 1e3).to_string(),
            log.algorithm.clone(),
            log.seed_count.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_json(log: &MetricsLog, config: &SimConfig, seeds: &[u64]) -> Result<MetricsJson> {
    let config: toml::Table =
        toml::from_str(&dump_config(config)).map_err(|e| Error::Config(e.to_string()))?;
    Ok(MetricsJson {
        packet_index: (0..log.len()).collect(),
        success_rate: log.success.clone(),
        success_rate_ma10: log.success_moving_average(10),
        energy_per_trial_mj: log.energy_j.iter().map(|e| e * 1e3).collect(),
        algorithm: vec![log.algorithm.clone(); log.len()],
        seed_count: vec![log.seed_count; log.len()],
        metadata: Metadata {
            tool_version: tool_version(),
            seeds: seeds.to_vec(),
            config,
        },
    })
}

/// Opens `path` for writing, or stdout when `None`.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Writes a simulation log in the chosen format.
pub fn write_metrics(
    log: &MetricsLog,
    config: &SimConfig,
    seeds: &[u64],
    path: Option<&Path>,
    format: Format,
) -> Result<()> {
    if log.is_empty() {
        return Err(Error::InvalidParameter("empty metrics log".into()));
    }
    let mut out = open_output(path)?;
    match format {
        Format::Csv => metrics_csv(&mut out, log, config, seeds)?,
        Format::Json => {
            let doc = metrics_json(log, config, seeds)?;
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One `(z, sf, p_s)` row per distance and SF.
pub fn ps_table_csv<W: Write>(out: W, rows: &[(f64, u8, f64)], config: &SimConfig) -> Result<()> {
    let mut out = out;
    write_preamble(&mut out, config, &[])?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["z_m", "sf", "p_success"]).map_err(io)?;
    for (z, sf, p) in rows {
        w.write_record([z.to_string(), sf.to_string(), p.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-ring densities and winning SF of an optimized allocation.
pub fn density_csv<W: Write>(
    out: W,
    dm: &DensityMatrix,
    part: &RingPartition,
    config: &SimConfig,
) -> Result<()> {
    let mut out = out;
    write_preamble(&mut out, config, &[])?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["ring".to_string(), "r_inner_m".into(), "r_outer_m".into()];
    header.extend(
        dm.sf_set()
            .iter()
            .map(|sf| format!("lambda_sf{}", sf.value())),
    );
    header.push("winning_sf".into());
    w.write_record(&header).map_err(io)?;
    for j in 0..part.len() {
        let (r1, r2) = part.ring(j);
        let mut row = vec![j.to_string(), r1.to_string(), r2.to_string()];
        row.extend((0..dm.sf_set().len()).map(|c| dm.get(j, c).to_string()));
        row.push(dm.dominant_sf(j).value().to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(n: usize) -> MetricsLog {
        MetricsLog {
            algorithm: "uucb1".into(),
            seed_count: 3,
            success: (0..n).map(|k| (k as f64 * 0.37).fract()).collect(),
            energy_j: (0..n).map(|k| 0.008 + k as f64 * 1e-5).collect(),
        }
    }

    fn csv_text(log: &MetricsLog) -> String {
        let mut buf = Vec::new();
        metrics_csv(&mut buf, log, &SimConfig::default(), &[1, 2, 3]).unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn data_rows(text: &str) -> Vec<csv::StringRecord> {
        let body: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        csv::Reader::from_reader(body.as_bytes())
            .records()
            .map(|r| r.unwrap())
            .collect()
    }

    #[test]
    fn row_count_and_header() {
        let text = csv_text(&log(100));
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, CSV_COLUMNS.join(","));
        assert_eq!(data_rows(&text).len(), 100);
    }

    #[test]
    fn preamble_reparses_to_config() {
        let text = csv_text(&log(3));
        let cfg: String = text
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .skip(2)
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(
            super::super::config::parse_config(&cfg).unwrap(),
            SimConfig::default()
        );
    }

    #[test]
    fn json_matches_csv() {
        let l = log(50);
        let doc = metrics_json(&l, &SimConfig::default(), &[1]).unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let back: MetricsJson = serde_json::from_str(&text).unwrap();
        let rows = data_rows(&csv_text(&l));
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row[0].parse::<usize>().unwrap(), back.packet_index[k]);
            assert_eq!(row[1].parse::<f64>().unwrap(), back.success_rate[k]);
            assert_eq!(row[2].parse::<f64>().unwrap(), back.success_rate_ma10[k]);
            assert_eq!(row[3].parse::<f64>().unwrap(), back.energy_per_trial_mj[k]);
            assert_eq!(&row[4], back.algorithm[k]);
        }
        assert_eq!(back.metadata.tool_version, tool_version());
    }

    #[test]
    fn empty_log_and_bad_path_rejected() {
        let c = SimConfig::default();
        assert!(write_metrics(&log(0), &c, &[1], None, Format::Csv).is_err());
        let bad = Path::new("/nonexistent-dir/x.csv");
        assert!(write_metrics(&log(2), &c, &[1], Some(bad), Format::Csv).is_err());
    }
}
