//! On-disk formats: CSV tables for samples, sweeps and success rates, and
//! TOML model files for thresholds and HMMs.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibratedHmm, OfflineSample, ThresholdModel};
use crate::error::{Error, Result};
use crate::harness::{ExperimentResult, MetricSweepRow, SuccessRow};

pub const OFFLINE_COLUMNS: [&str; 5] = ["distance_m", "orientation_deg", "trial", "snr_db", "eta"];
pub const SWEEP_COLUMNS: [&str; 5] = ["distance_m", "snr_db", "q50_eta", "q10_eta", "q90_eta"];
pub const SUCCESS_COLUMNS: [&str; 5] = ["snr_db", "region", "method", "success_rate", "trials"];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], columns: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if rows.is_empty() {
        w.write_record(columns).map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_owned).collect();
    if headers != columns {
        let missing: Vec<_> = columns.iter().filter(|c| !headers.iter().any(|h| h == *c)).collect();
        let extra: Vec<_> = headers.iter().filter(|h| !columns.contains(&h.as_str())).collect();
        return Err(Error::parse(
            path,
            format!("columns {headers:?} do not match {columns:?} (missing {missing:?}, unexpected {extra:?})"),
        ));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn write_offline_samples(path: &Path, samples: &[OfflineSample]) -> Result<()> {
    write_csv(path, samples, &OFFLINE_COLUMNS)
}

pub fn read_offline_samples(path: &Path) -> Result<Vec<OfflineSample>> {
    let rows: Vec<OfflineSample> = read_csv(path, &OFFLINE_COLUMNS)?;
    if let Some(s) = rows.iter().find(|s| !(s.eta >= 0.0)) {
        return Err(Error::parse(path, format!("negative η {}", s.eta)));
    }
    Ok(rows)
}

pub fn write_metric_sweep(path: &Path, rows: &[MetricSweepRow]) -> Result<()> {
    write_csv(path, rows, &SWEEP_COLUMNS)
}

pub fn read_metric_sweep(path: &Path) -> Result<Vec<MetricSweepRow>> {
    read_csv(path, &SWEEP_COLUMNS)
}

pub fn write_success_rates(path: &Path, result: &ExperimentResult) -> Result<()> {
    write_csv(path, &result.rows, &SUCCESS_COLUMNS)
}

pub fn read_success_rates(path: &Path) -> Result<ExperimentResult> {
    let rows: Vec<SuccessRow> = read_csv(path, &SUCCESS_COLUMNS)?;
    if let Some(r) = rows.iter().find(|r| !(0.0..=1.0).contains(&r.success_rate)) {
        return Err(Error::parse(path, format!("success rate {} outside [0, 1]", r.success_rate)));
    }
    Ok(ExperimentResult { rows })
}

#[derive(Serialize, Deserialize)]
struct ThresholdFile {
    threshold: Vec<ThresholdModel>,
}

#[derive(Serialize, Deserialize)]
struct HmmFile {
    hmm: Vec<CalibratedHmm>,
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::parse(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_thresholds(path: &Path, thresholds: &[ThresholdModel]) -> Result<()> {
    write_toml(path, &ThresholdFile { threshold: thresholds.to_vec() })
}

pub fn read_thresholds(path: &Path) -> Result<Vec<ThresholdModel>> {
    let f: ThresholdFile = read_toml(path)?;
    if let Some(t) = f.threshold.iter().find(|t| !(t.gamma >= 0.0)) {
        return Err(Error::parse(path, format!("γ = {} is negative", t.gamma)));
    }
    Ok(f.threshold)
}

pub fn write_hmms(path: &Path, hmms: &[CalibratedHmm]) -> Result<()> {
    write_toml(path, &HmmFile { hmm: hmms.to_vec() })
}

pub fn read_hmms(path: &Path) -> Result<Vec<CalibratedHmm>> {
    let f: HmmFile = read_toml(path)?;
    for h in &f.hmm {
        h.model.validate().map_err(|e| Error::parse(path, e.to_string()))?;
    }
    Ok(f.hmm)
}
