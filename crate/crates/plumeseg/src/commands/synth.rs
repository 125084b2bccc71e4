use std::collections::BTreeMap;

use plumeseg_core::annotations::{AnnotationSet, PlumePolygon};
use plumeseg_core::dataset::synth::LABEL_THRESHOLD;
use plumeseg_core::dataset::generate_synthetic;
use plumeseg_core::panelfe::{smoke_indicator, Exposure, Pm25Record, Station};
use plumeseg_core::rng::derive;
use plumeseg_core::time::{Day, Timestamp, SECONDS_PER_DAY};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use super::{fresh_dir, mask_scene, write_manifest, Command};
use crate::config::Resolved;
use crate::error::{AppError, Result};
use crate::geojson::write_annotations;
use crate::grd::write_scene;
use crate::tables::{write_pm25, write_stations};

/// Outline vertices per plume polygon.
const OUTLINE_VERTICES: usize = 64;
/// Half-width of an annotation's validity window, seconds.
const ANNOTATION_HALF_WINDOW: i64 = 1800;

pub fn scene_id(k: usize) -> String {
    format!("scene_{k:04}")
}

/// Acquisition time of scene `k`: `images_per_day` images spread over
/// 12:00-24:00 UTC of consecutive days.
pub fn scene_time(first: Day, k: usize, per_day: usize) -> Timestamp {
    let day = Day(first.0 + (k / per_day) as i64);
    let offset = (k % per_day) as i64 * (SECONDS_PER_DAY / 2) / per_day as i64;
    Timestamp(day.at_hour(12).0 + offset)
}

/// Writes scenes, clean (`truth/`) and noisy (`labels/`) label masks, plume
/// outlines as GeoJSON, and a station panel whose PM2.5 responds to the
/// clean labels.
pub fn run(cfg: &Resolved) -> Result<Value> {
    let dir = cfg.layout.synth();
    fresh_dir(&dir)?;
    for sub in ["scenes", "truth", "labels"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| AppError::io(&d, e))?;
    }
    let s = &cfg.raw.synth;
    let mut polygons = Vec::new();
    let mut by_day: BTreeMap<Day, Vec<Exposure>> = BTreeMap::new();
    let mut positive_pixels = 0usize;
    for k in 0..s.count {
        let id = scene_id(k);
        let t = scene_time(cfg.first_day, k, s.images_per_day);
        let mut sc = cfg.synth.clone();
        sc.timestamp = t;
        let out = generate_synthetic(&sc, &mut derive(cfg.raw.seed, &format!("synth/{id}")))?;
        write_scene(&out.scene, &dir.join("scenes").join(format!("{id}.grd")))?;
        write_scene(&mask_scene(&out.label, &out.scene)?, &dir.join("truth").join(format!("{id}.grd")))?;
        write_scene(&mask_scene(&out.noisy_label, &out.scene)?, &dir.join("labels").join(format!("{id}.grd")))?;
        for (j, p) in out.plumes.iter().enumerate() {
            if let Some(ring) = p.outline(LABEL_THRESHOLD, OUTLINE_VERTICES, &sc.transform) {
                polygons.push(PlumePolygon::new(
                    vec![ring],
                    Timestamp(t.0 - ANNOTATION_HALF_WINDOW),
                    Timestamp(t.0 + ANNOTATION_HALF_WINDOW),
                    format!("{id}_p{j}"),
                )?);
            }
        }
        positive_pixels += out.label.count_ones();
        by_day.entry(t.day()).or_default().push(Exposure::Mask(out.label, sc.crs.clone()));
    }
    write_annotations(&AnnotationSet::new(polygons, cfg.synth.crs.clone()), &dir.join("annotations.geojson"))?;

    let (stations, records) = station_panel(cfg, &by_day)?;
    write_stations(&dir.join("stations.csv"), &stations)?;
    write_pm25(&dir.join("pm25.csv"), &records)?;
    let total = s.count * s.width * s.height;
    let summary = json!({
        "scenes": s.count,
        "stations": stations.len(),
        "pm25_records": records.len(),
        "positive_fraction": if total == 0 { 0.0 } else { positive_pixels as f64 / total as f64 },
    });
    write_manifest(&dir, Command::Synth, cfg, &summary)?;
    Ok(summary)
}

/// Stations at random map points of the grid; daily PM2.5 is a station
/// baseline plus `smoke_effect` on days a clean label covers the station,
/// plus Gaussian noise, floored at zero.
fn station_panel(cfg: &Resolved, by_day: &BTreeMap<Day, Vec<Exposure>>) -> Result<(Vec<Station>, Vec<Pm25Record>)> {
    let st = &cfg.raw.synth.stations;
    let sc = &cfg.synth;
    let mut rng = derive(cfg.raw.seed, "synth/stations");
    let noise = Normal::new(0.0, st.noise_sd).map_err(|e| AppError::config(e.to_string()))?;
    let mut stations = Vec::with_capacity(st.count);
    let mut baselines = Vec::with_capacity(st.count);
    for i in 0..st.count {
        let (row, col) = (rng.random_range(0.0..sc.height as f64), rng.random_range(0.0..sc.width as f64));
        let (x, y) = sc.transform.map(row, col);
        stations.push(Station { id: format!("ST{i:03}"), x, y, crs: sc.crs.clone() });
        baselines.push(rng.random_range(st.baseline[0]..=st.baseline[1]));
    }
    let mut records = Vec::new();
    for (station, base) in stations.iter().zip(&baselines) {
        for (day, sources) in by_day {
            let smoke = smoke_indicator(station, sources).smoke as f64;
            let pm25 = (base + st.smoke_effect * smoke + noise.sample(&mut rng)).max(0.0);
            records.push(Pm25Record { station_id: station.id.clone(), date: *day, pm25 });
        }
    }
    Ok((stations, records))
}

/// Clean label of a scene written by this command.
pub fn truth_path(cfg: &Resolved, scene_stem: &str) -> std::path::PathBuf {
    cfg.layout.synth().join("truth").join(format!("{scene_stem}.grd"))
}

