//! CSV inputs and outputs.

use std::path::Path;

use plumeseg_core::evaluation::Confusion;
use plumeseg_core::panelfe::{FEResult, PanelObservation, Pm25Record, Station};
use plumeseg_core::training::EpochRecord;
use serde::{Deserialize, Serialize};

use crate::error::{write_file, AppError, Result};
use crate::timefmt::{format_day, parse_day};

fn to_csv<T: Serialize>(rows: &[T], header_if_empty: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header_if_empty).map_err(|e| AppError::csv(Path::new("<memory>"), e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| AppError::csv(Path::new("<memory>"), e))?;
    }
    w.into_inner().map_err(|e| AppError::format(e.to_string()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    write_file(path, &to_csv(rows, header)?)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| AppError::csv(path, e))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_dice: f64,
    pub val_dice: f64,
    pub lr: f64,
}

pub const HISTORY_HEADER: [&str; 6] = ["epoch", "train_loss", "val_loss", "train_dice", "val_dice", "lr"];

impl From<&EpochRecord> for HistoryRow {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
            train_dice: r.train_dice,
            val_dice: r.val_dice,
            lr: r.lr,
        }
    }
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    write_csv(path, rows, &HISTORY_HEADER)
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    read_csv(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scene_id: String,
    pub dice: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl MetricsRow {
    pub fn new(scene_id: impl Into<String>, c: &Confusion) -> Self {
        Self {
            scene_id: scene_id.into(),
            dice: c.dice(),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
        }
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(path, rows, &["scene_id", "dice", "tp", "fp", "fn", "tn"])
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(path)
}

#[derive(Debug, Serialize, Deserialize)]
struct StationRow {
    station_id: String,
    x: f64,
    y: f64,
    crs: String,
}

pub fn write_stations(path: &Path, stations: &[Station]) -> Result<()> {
    let rows: Vec<StationRow> = stations
        .iter()
        .map(|s| StationRow {
            station_id: s.id.clone(),
            x: s.x,
            y: s.y,
            crs: s.crs.clone(),
        })
        .collect();
    write_csv(path, &rows, &["station_id", "x", "y", "crs"])
}

pub fn read_stations(path: &Path) -> Result<Vec<Station>> {
    Ok(read_csv::<StationRow>(path)?
        .into_iter()
        .map(|r| Station {
            id: r.station_id,
            x: r.x,
            y: r.y,
            crs: r.crs,
        })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct Pm25Row {
    station_id: String,
    date: String,
    pm25: f64,
}

pub fn write_pm25(path: &Path, records: &[Pm25Record]) -> Result<()> {
    let rows: Vec<Pm25Row> = records
        .iter()
        .map(|r| Pm25Row {
            station_id: r.station_id.clone(),
            date: format_day(r.date),
            pm25: r.pm25,
        })
        .collect();
    write_csv(path, &rows, &["station_id", "date", "pm25"])
}

pub fn read_pm25(path: &Path) -> Result<Vec<Pm25Record>> {
    read_csv::<Pm25Row>(path)?
        .into_iter()
        .map(|r| {
            Ok(Pm25Record {
                station_id: r.station_id,
                date: parse_day(&r.date)?,
                pm25: r.pm25,
            })
        })
        .collect()
}

/// One row of the source comparison. Failed fits keep empty numeric cells
/// and carry the reason in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub source: String,
    pub beta1: Option<f64>,
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    pub within_r2: Option<f64>,
    pub within_adj_r2: Option<f64>,
    pub n_obs: usize,
    pub n_stations: usize,
    pub smoke_days: usize,
    pub error: String,
}

impl ComparisonRow {
    pub fn fitted(source: &str, fit: &FEResult, smoke_days: usize) -> Self {
        Self {
            source: source.into(),
            beta1: Some(fit.beta1),
            r2: Some(fit.r2),
            adj_r2: Some(fit.adj_r2),
            within_r2: Some(fit.within_r2),
            within_adj_r2: Some(fit.within_adj_r2),
            n_obs: fit.n_obs,
            n_stations: fit.n_stations,
            smoke_days,
            error: String::new(),
        }
    }

    pub fn failed(source: &str, n_obs: usize, n_stations: usize, smoke_days: usize, error: String) -> Self {
        Self {
            source: source.into(),
            beta1: None,
            r2: None,
            adj_r2: None,
            within_r2: None,
            within_adj_r2: None,
            n_obs,
            n_stations,
            smoke_days,
            error,
        }
    }
}

pub const COMPARISON_HEADER: [&str; 10] = [
    "source",
    "beta1",
    "r2",
    "adj_r2",
    "within_r2",
    "within_adj_r2",
    "n_obs",
    "n_stations",
    "smoke_days",
    "error",
];

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    write_csv(path, rows, &COMPARISON_HEADER)
}

pub fn read_comparison(path: &Path) -> Result<Vec<ComparisonRow>> {
    read_csv(path)
}

#[derive(Debug, Serialize)]
struct ResidualRow<'a> {
    station_id: &'a str,
    date: String,
    pm25: f64,
    smoke: u8,
    residual: f64,
}

pub fn write_residuals(path: &Path, panel: &[PanelObservation], residuals: &[f64]) -> Result<()> {
    let rows: Vec<ResidualRow> = panel
        .iter()
        .zip(residuals)
        .map(|(o, &r)| ResidualRow {
            station_id: &o.station_id,
            date: format_day(o.date),
            pm25: o.pm25,
            smoke: o.smoke,
            residual: r,
        })
        .collect();
    write_csv(path, &rows, &["station_id", "date", "pm25", "smoke", "residual"])
}

pub fn write_panel(path: &Path, panel: &[PanelObservation]) -> Result<()> {
    let rows: Vec<(String, String, f64, u8)> = panel
        .iter()
        .map(|o| (o.station_id.clone(), format_day(o.date), o.pm25, o.smoke))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mem = Path::new("<memory>");
    w.write_record(["station_id", "date", "pm25", "smoke"]).map_err(|e| AppError::csv(mem, e))?;
    for r in &rows {
        w.serialize(r).map_err(|e| AppError::csv(mem, e))?;
    }
    write_file(path, &w.into_inner().map_err(|e| AppError::format(e.to_string()))?)
}
