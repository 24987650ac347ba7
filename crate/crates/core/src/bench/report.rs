//! Hit ratios and CSV emission.

use std::path::Path;

use super::TrialRecord;
use crate::error::{Error, Result};
use crate::estimate::Estimate;

pub const RECORD_COLUMNS: [&str; 14] = [
    "trial",
    "snr_db",
    "density",
    "algorithm",
    "truth_x0",
    "truth_x1",
    "est_x0",
    "est_x1",
    "truth_v0",
    "truth_v1",
    "est_v0",
    "est_v1",
    "t_offline_ns",
    "t_online_ns",
];

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "algorithm",
    "density",
    "snr_db",
    "threshold",
    "hit_ratio",
    "mean_online_ns",
];

const VELOCITY_COLUMNS: [&str; 6] = ["algorithm", "density", "snr_db", "threshold", "hits", "velocity_rmse"];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Fraction of `records` whose `algorithm` estimate lies within `threshold` m of the truth.
pub fn hit_ratio(records: &[TrialRecord], algorithm: &str, threshold: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("hit ratio of an empty record set".into()));
    }
    let mut hits = 0usize;
    for r in records {
        let o = r.outcome(algorithm).ok_or_else(|| Error::UnknownAlgorithm {
            name: algorithm.to_string(),
        })?;
        if o.position.distance(r.truth.position) <= threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

/// Velocity RMSE over the frames that hit at `threshold`, with the hit count.
pub fn velocity_rmse(records: &[TrialRecord], algorithm: &str, threshold: f64) -> Result<(usize, f64)> {
    let mut hits = 0usize;
    let mut sq = 0.0;
    for r in records {
        let o = r.outcome(algorithm).ok_or_else(|| Error::UnknownAlgorithm {
            name: algorithm.to_string(),
        })?;
        if o.position.distance(r.truth.position) <= threshold {
            hits += 1;
            let d = o.velocity - r.truth.velocity;
            sq += d.dot(d);
        }
    }
    let rmse = if hits == 0 { f64::NAN } else { (sq / hits as f64).sqrt() };
    Ok((hits, rmse))
}

/// One (algorithm, density, SNR, threshold) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub density: f64,
    pub snr_db: f64,
    pub threshold: f64,
    pub hit_ratio: f64,
    pub mean_online_ns: f64,
    pub hits: usize,
    pub velocity_rmse: f64,
}

fn first_seen<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Aggregates records per algorithm, density, SNR and threshold, in that order.
pub fn summarize(records: &[TrialRecord], thresholds: &[f64]) -> Result<Vec<SummaryRow>> {
    let algorithms: Vec<&str> = records
        .first()
        .map(|r| r.outcomes.iter().map(|o| o.algorithm.as_str()).collect())
        .unwrap_or_default();
    let densities = first_seen(records.iter().map(|r| r.density.to_bits()));
    let snrs = first_seen(records.iter().map(|r| r.snr_db.to_bits()));
    let mut rows = Vec::new();
    for alg in &algorithms {
        for &d in &densities {
            for &s in &snrs {
                let cell: Vec<TrialRecord> = records
                    .iter()
                    .filter(|r| r.density.to_bits() == d && r.snr_db.to_bits() == s)
                    .cloned()
                    .collect();
                if cell.is_empty() {
                    continue;
                }
                let mut online = 0.0;
                for r in &cell {
                    online += r
                        .outcome(alg)
                        .ok_or_else(|| Error::UnknownAlgorithm { name: alg.to_string() })?
                        .t_online_ns as f64;
                }
                let mean_online_ns = online / cell.len() as f64;
                for &threshold in thresholds {
                    let (hits, velocity_rmse) = velocity_rmse(&cell, alg, threshold)?;
                    rows.push(SummaryRow {
                        algorithm: alg.to_string(),
                        density: f64::from_bits(d),
                        snr_db: f64::from_bits(s),
                        threshold,
                        hit_ratio: hit_ratio(&cell, alg, threshold)?,
                        mean_online_ns,
                        hits,
                        velocity_rmse,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Per-trial CSV, one row per record and algorithm.
pub fn emit_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(RECORD_COLUMNS).map_err(|e| csv_error(path, e))?;
    for r in records {
        for o in &r.outcomes {
            w.write_record([
                r.trial.to_string(),
                r.snr_db.to_string(),
                r.density.to_string(),
                o.algorithm.clone(),
                r.truth.position.x.to_string(),
                r.truth.position.y.to_string(),
                o.position.x.to_string(),
                o.position.y.to_string(),
                r.truth.velocity.x.to_string(),
                r.truth.velocity.y.to_string(),
                o.velocity.x.to_string(),
                o.velocity.y.to_string(),
                o.t_offline_ns.to_string(),
                o.t_online_ns.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Hit-ratio summary over `thresholds`.
pub fn emit_summary(records: &[TrialRecord], thresholds: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows = summarize(records, thresholds)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(SUMMARY_COLUMNS).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record([
            row.algorithm,
            row.density.to_string(),
            row.snr_db.to_string(),
            row.threshold.to_string(),
            row.hit_ratio.to_string(),
            row.mean_online_ns.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Velocity RMSE among location hits, per threshold.
pub fn emit_velocity_summary(records: &[TrialRecord], thresholds: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows = summarize(records, thresholds)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(VELOCITY_COLUMNS).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record([
            row.algorithm,
            row.density.to_string(),
            row.snr_db.to_string(),
            row.threshold.to_string(),
            row.hits.to_string(),
            row.velocity_rmse.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Estimates for replayed frames: `frame, algorithm, est_x0, est_x1, est_v0, est_v1, score, t_online_ns`.
pub fn emit_estimates(rows: &[(usize, String, Estimate)], timing: bool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "frame",
        "algorithm",
        "est_x0",
        "est_x1",
        "est_v0",
        "est_v1",
        "score",
        "t_online_ns",
    ])
    .map_err(|e| csv_error(path, e))?;
    for (frame, alg, est) in rows {
        let online = if timing { est.timings.total().as_nanos() } else { 0 };
        w.write_record([
            frame.to_string(),
            alg.clone(),
            est.position.x.to_string(),
            est.position.y.to_string(),
            est.velocity.x.to_string(),
            est.velocity.y.to_string(),
            est.score.to_string(),
            online.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
