//! Campaign outputs. CSV headers are fixed:
//!
//! - `per_centroid.csv`: `p,centroid_norm,n_p,mean_J,sum_J`
//! - `realizations.csv`: `index,p,J,converged,final_relative_residual`
//! - `frequencies.csv`: `p,centroid_norm,frequency`
//! - `ideal_sweep.csv`: `m,relative_energy,mean_J`
//!
//! Floats carry 17 significant digits; an empty cell has `mean_J = nan`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{load_balance_report, CampaignConfig, CentroidStats, FrequencyRow, SimulationReport, SweepRow};
use crate::error::{Error, Result};
use crate::format::{sci17, Sci17};
use crate::quantizer::{MapKind, Method};
use crate::solver::PreconditionerKind;

pub const SUMMARY_JSON: &str = "summary.json";
pub const PER_CENTROID_CSV: &str = "per_centroid.csv";
pub const REALIZATIONS_CSV: &str = "realizations.csv";
pub const FREQUENCIES_CSV: &str = "frequencies.csv";
pub const IDEAL_SWEEP_CSV: &str = "ideal_sweep.csv";

const PER_CENTROID_HEADER: &str = "p,centroid_norm,n_p,mean_J,sum_J";

#[derive(Serialize)]
struct QuantizerSummary {
    method: Method,
    #[serde(rename = "P")]
    p: usize,
    map: MapKind,
    n_train: usize,
    seed: u64,
    max_iter: usize,
    rel_tol: Sci17,
    gamma0: Sci17,
    schedule_a: Option<Sci17>,
    passes: usize,
}

/// The configuration minus execution details (workers, paths), so that the
/// summary depends only on what was computed.
#[derive(Serialize)]
struct ConfigSummary {
    resolution: usize,
    variance: Sci17,
    correlation_length: Option<Sci17>,
    n_kl: usize,
    m: usize,
    quantizer: QuantizerSummary,
    preconditioner: PreconditionerKind,
    eps: Sci17,
    max_iter: usize,
    n_realizations: usize,
    master_seed: u64,
}

#[derive(Serialize)]
struct Summary {
    config: ConfigSummary,
    #[serde(rename = "P")]
    p: usize,
    n_realizations: usize,
    #[serde(rename = "mean_J")]
    mean_j: Sci17,
    total_iterations: usize,
    #[serde(rename = "max_sum_J")]
    max_sum_j: usize,
    #[serde(rename = "min_sum_J")]
    min_sum_j: usize,
    #[serde(rename = "sum_J_range")]
    sum_j_range: usize,
    #[serde(rename = "sum_J_cv")]
    sum_j_cv: Sci17,
    n_p_cv: Sci17,
    occupied_cells: usize,
    unconverged: usize,
}

fn config_summary(c: &CampaignConfig) -> ConfigSummary {
    let q = &c.quantizer;
    ConfigSummary {
        resolution: c.resolution,
        variance: Sci17(c.variance),
        correlation_length: c.correlation_length.map(Sci17),
        n_kl: c.n_kl,
        m: c.m,
        quantizer: QuantizerSummary {
            method: q.method,
            p: q.p,
            map: q.map,
            n_train: q.n_train,
            seed: q.seed,
            max_iter: q.max_iter,
            rel_tol: Sci17(q.rel_tol),
            gamma0: Sci17(q.gamma0),
            schedule_a: q.schedule_a.map(Sci17),
            passes: q.passes,
        },
        preconditioner: c.preconditioner,
        eps: Sci17(c.eps),
        max_iter: c.max_iter,
        n_realizations: c.n_realizations,
        master_seed: c.master_seed,
    }
}

/// Writes `summary.json`, `per_centroid.csv` and `realizations.csv` into `dir`.
pub fn write_campaign(dir: &Path, config: &CampaignConfig, report: &SimulationReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let balance = load_balance_report(report);
    let summary = Summary {
        config: config_summary(config),
        p: report.centroids.len(),
        n_realizations: report.n_realizations(),
        mean_j: Sci17(report.mean_j),
        total_iterations: report.total_iterations,
        max_sum_j: report.max_sum_j,
        min_sum_j: report.min_sum_j,
        sum_j_range: balance.sum_j_range,
        sum_j_cv: Sci17(balance.sum_j_cv),
        n_p_cv: Sci17(balance.n_p_cv),
        occupied_cells: report.centroids.iter().filter(|c| c.n_p > 0).count(),
        unconverged: report.unconverged,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(dir.join(SUMMARY_JSON), json)?;

    let mut out = BufWriter::new(fs::File::create(dir.join(PER_CENTROID_CSV))?);
    writeln!(out, "{PER_CENTROID_HEADER}")?;
    for c in &balance.rows {
        writeln!(out, "{},{},{},{},{}", c.p, sci17(c.centroid_norm), c.n_p, sci17(c.mean_j), c.sum_j)?;
    }
    out.flush()?;

    let mut out = BufWriter::new(fs::File::create(dir.join(REALIZATIONS_CSV))?);
    writeln!(out, "index,p,J,converged,final_relative_residual")?;
    for r in &report.records {
        writeln!(out, "{},{},{},{},{}", r.index, r.p, r.iterations, r.converged, sci17(r.final_relative_residual))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_frequencies(path: &Path, rows: &[FrequencyRow]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "p,centroid_norm,frequency")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.p, sci17(r.centroid_norm), sci17(r.frequency))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ideal_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "m,relative_energy,mean_J")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.m, sci17(r.relative_energy), sci17(r.mean_j))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back a `per_centroid.csv`. Unconverged counts are not stored and
/// read as zero.
pub fn read_per_centroid(path: &Path) -> Result<Vec<CentroidStats>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::ArtifactNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let mut lines = text.lines();
    if lines.next() != Some(PER_CENTROID_HEADER) {
        return Err(Error::InvalidFormat(format!("{} lacks the `{PER_CENTROID_HEADER}` header", path.display())));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, line)| {
            let bad = || Error::InvalidFormat(format!("{}: malformed row {}", path.display(), k + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(CentroidStats {
                p: f[0].parse().map_err(|_| bad())?,
                centroid_norm: f[1].parse().map_err(|_| bad())?,
                n_p: f[2].parse().map_err(|_| bad())?,
                mean_j: f[3].parse().map_err(|_| bad())?,
                sum_j: f[4].parse().map_err(|_| bad())?,
                unconverged: 0,
            })
        })
        .collect()
}
