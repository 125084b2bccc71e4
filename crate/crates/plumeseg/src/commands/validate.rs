use std::collections::BTreeMap;

use plumeseg_core::annotations::AnnotationSet;
use plumeseg_core::panelfe::{build_panel, fe_fit, Exposure, FEResult, Panel};
use plumeseg_core::time::Day;
use plumeseg_core::Error;
use serde_json::{json, Value};

use super::{fresh_dir, list_scenes, scene_mask, write_manifest, Command};
use crate::config::{Resolved, SourceKind, SourceSpec};
use crate::error::{write_file, AppError, Result};
use crate::geojson::parse_annotations;
use crate::grd::read_scene;
use crate::svg::bar_chart;
use crate::tables::{read_pm25, read_stations, write_comparison, write_panel, write_residuals, ComparisonRow};

/// Daily exposure of one smoke source. Polygons count on every day their
/// validity window touches.
pub fn load_exposure(spec: &SourceSpec, default_crs: &str) -> Result<BTreeMap<Day, Vec<Exposure>>> {
    let mut out: BTreeMap<Day, Vec<Exposure>> = BTreeMap::new();
    match spec.kind {
        SourceKind::Annotations => {
            let (set, _) = parse_annotations(&spec.path, default_crs)?;
            let mut by_day: BTreeMap<Day, Vec<_>> = BTreeMap::new();
            for p in &set.polygons {
                for d in p.start.day().0..=p.end.day().0 {
                    by_day.entry(Day(d)).or_default().push(p.clone());
                }
            }
            for (day, polys) in by_day {
                out.entry(day).or_default().push(Exposure::Polygons(AnnotationSet::new(polys, set.crs.clone())));
            }
        }
        SourceKind::Masks => {
            let files = list_scenes(&spec.path)?;
            if files.is_empty() {
                return Err(Error::Empty(format!("no masks in {}", spec.path.display())).into());
            }
            for f in files {
                let scene = read_scene(&f)?;
                let mask = scene_mask(&scene)?;
                out.entry(scene.timestamp.day()).or_default().push(Exposure::Mask(mask, scene.crs.clone()));
            }
        }
    }
    Ok(out)
}

/// Panel and fit of one source.
pub struct SourceFit {
    pub panel: Panel,
    pub fit: plumeseg_core::Result<FEResult>,
}

fn fe_json(fit: &FEResult) -> Value {
    json!({
        "beta1": fit.beta1,
        "r2": fit.r2,
        "adj_r2": fit.adj_r2,
        "within_r2": fit.within_r2,
        "within_adj_r2": fit.within_adj_r2,
        "n_obs": fit.n_obs,
        "n_stations": fit.n_stations,
    })
}

fn file_safe(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Fits the fixed-effects model once per smoke source. Sources without
/// within variation or degrees of freedom are flagged and the run goes on;
/// sources that cannot be read fail the command after the report is
/// written.
pub fn run(cfg: &Resolved) -> Result<Value> {
    let stations = read_stations(&cfg.stations_csv)?;
    let records = read_pm25(&cfg.pm25_csv)?;
    let first = cfg.day_range.0.or_else(|| records.iter().map(|r| r.date).min());
    let last = cfg.day_range.1.or_else(|| records.iter().map(|r| r.date).max());
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::Empty("no PM2.5 records".into()).into());
    };
    let dir = cfg.layout.validate();
    fresh_dir(&dir)?;
    let crs = stations.first().map(|s| s.crs.clone()).unwrap_or_else(|| cfg.synth.crs.clone());

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for spec in &cfg.sources {
        let exposure = match load_exposure(spec, &crs) {
            Ok(e) => e,
            Err(e) => {
                eprintln!("source {}: {e}", spec.name);
                failures.push(format!("{}: {e}", spec.name));
                rows.push(ComparisonRow::failed(&spec.name, 0, 0, 0, e.to_string()));
                continue;
            }
        };
        let panel = build_panel(&stations, &records, &exposure, (first, last))?;
        if panel.skipped_sources > 0 {
            log::warn!("source {}: {} exposure lookups skipped (off-grid or CRS mismatch)", spec.name, panel.skipped_sources);
        }
        let smoke_days = panel.rows.iter().filter(|o| o.smoke == 1).count();
        let n_stations = {
            let mut ids: Vec<&str> = panel.rows.iter().map(|o| o.station_id.as_str()).collect();
            ids.dedup();
            ids.len()
        };
        let tag = file_safe(&spec.name);
        write_panel(&dir.join(format!("panel_{tag}.csv")), &panel.rows)?;
        match fe_fit(&panel.rows) {
            Ok(fit) => {
                write_residuals(&dir.join(format!("residuals_{tag}.csv")), &panel.rows, &fit.residuals)?;
                let text = serde_json::to_string_pretty(&fe_json(&fit)).expect("serializable");
                write_file(&dir.join(format!("fe_{tag}.json")), text.as_bytes())?;
                rows.push(ComparisonRow::fitted(&spec.name, &fit, smoke_days));
            }
            Err(e @ (Error::NoWithinVariation | Error::Dof { .. })) => {
                eprintln!("source {}: {e}", spec.name);
                rows.push(ComparisonRow::failed(&spec.name, panel.rows.len(), n_stations, smoke_days, e.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_comparison(&dir.join("comparison.csv"), &rows)?;
    let bars: Vec<(&str, Option<f64>)> = rows.iter().map(|r| (r.source.as_str(), r.within_adj_r2)).collect();
    write_file(&dir.join("within_adj_r2.svg"), bar_chart("within adjusted R2 by smoke source", &bars).as_bytes())?;
    let summary = json!({
        "sources": rows.iter().map(|r| json!({
            "source": r.source,
            "beta1": r.beta1,
            "within_adj_r2": r.within_adj_r2,
            "error": r.error,
        })).collect::<Vec<_>>(),
    });
    write_manifest(&dir, Command::Validate, cfg, &summary)?;
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(AppError::Partial { count: failures.len(), items: failures.join("; ") })
    }
}
