//! GeoJSON FeatureCollections of plume polygons with `Start`/`End`
//! properties.

use std::path::Path;

use plumeseg_core::annotations::{AnnotationSet, PlumePolygon, Point};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{read_file, write_file, AppError, Result};
use crate::timefmt::{format_timestamp, parse_timestamp};

/// A feature that could not be turned into polygons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reject {
    pub feature: usize,
    pub id: Option<String>,
    pub reason: String,
}

fn ring(v: &Value) -> Option<Vec<Point>> {
    v.as_array()?
        .iter()
        .map(|p| {
            let p = p.as_array()?;
            Some((p.first()?.as_f64()?, p.get(1)?.as_f64()?))
        })
        .collect()
}

fn polygon(v: &Value) -> Option<Vec<Vec<Point>>> {
    v.as_array()?.iter().map(ring).collect()
}

fn feature_id(f: &Value, index: usize) -> String {
    match f.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => f
            .pointer("/properties/source_id")
            .and_then(Value::as_str)
            .map_or_else(|| format!("feature{index}"), str::to_string),
    }
}

fn parse_feature(f: &Value, index: usize) -> std::result::Result<Vec<PlumePolygon>, String> {
    let props = f.get("properties").ok_or("missing properties")?;
    let time = |key: &str| -> std::result::Result<_, String> {
        let s = props.get(key).and_then(Value::as_str).ok_or(format!("missing {key}"))?;
        parse_timestamp(s).map_err(|e| format!("{key}: {e}"))
    };
    let (start, end) = (time("Start")?, time("End")?);
    let geom = f.get("geometry").ok_or("missing geometry")?;
    let coords = geom.get("coordinates").ok_or("missing coordinates")?;
    let parts = match geom.get("type").and_then(Value::as_str) {
        Some("Polygon") => vec![polygon(coords).ok_or("malformed Polygon coordinates")?],
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or("malformed MultiPolygon coordinates")?
            .iter()
            .map(polygon)
            .collect::<Option<Vec<_>>>()
            .ok_or("malformed MultiPolygon coordinates")?,
        other => return Err(format!("unsupported geometry {other:?}")),
    };
    let id = feature_id(f, index);
    let many = parts.len() > 1;
    parts
        .into_iter()
        .enumerate()
        .map(|(k, rings)| {
            let sid = if many { format!("{id}_{k}") } else { id.clone() };
            PlumePolygon::new(rings, start, end, sid).map_err(|e| e.to_string())
        })
        .collect()
}

/// Parses a FeatureCollection. The CRS comes from a legacy top-level
/// `crs.properties.name` member when present, else `default_crs`.
pub fn parse_annotations_str(text: &str, default_crs: &str) -> Result<(AnnotationSet, Vec<Reject>)> {
    let doc: Value = serde_json::from_str(text).map_err(|e| AppError::format(format!("invalid JSON: {e}")))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(AppError::format("not a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| AppError::format("FeatureCollection without features"))?;
    let crs = doc
        .pointer("/crs/properties/name")
        .and_then(Value::as_str)
        .unwrap_or(default_crs);
    let mut polygons = Vec::new();
    let mut rejects = Vec::new();
    for (i, f) in features.iter().enumerate() {
        match parse_feature(f, i) {
            Ok(p) => polygons.extend(p),
            Err(reason) => rejects.push(Reject {
                feature: i,
                id: f.get("id").map(|v| v.to_string().trim_matches('"').to_string()),
                reason,
            }),
        }
    }
    Ok((AnnotationSet::new(polygons, crs), rejects))
}

pub fn parse_annotations(path: &Path, default_crs: &str) -> Result<(AnnotationSet, Vec<Reject>)> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| AppError::format(format!("{}: {e}", path.display())))?;
    let (set, rejects) = parse_annotations_str(text, default_crs)?;
    for r in &rejects {
        log::warn!("{}: rejected feature {}: {}", path.display(), r.feature, r.reason);
    }
    Ok((set, rejects))
}

/// One JSON object per line.
pub fn rejects_report(rejects: &[Reject]) -> String {
    rejects
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

pub fn annotations_to_geojson(set: &AnnotationSet) -> Value {
    let features: Vec<Value> = set
        .polygons
        .iter()
        .map(|p| {
            let rings: Vec<Vec<[f64; 2]>> = p.rings().iter().map(|r| r.iter().map(|&(x, y)| [x, y]).collect()).collect();
            json!({
                "type": "Feature",
                "id": p.source_id,
                "properties": {"Start": format_timestamp(p.start), "End": format_timestamp(p.end)},
                "geometry": {"type": "Polygon", "coordinates": rings},
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": set.crs}},
        "features": features,
    })
}

pub fn write_annotations(set: &AnnotationSet, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&annotations_to_geojson(set)).expect("serializable");
    write_file(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use plumeseg_core::time::Timestamp;

    const SQUARE: &str = "[[0,0],[4,0],[4,4],[0,4],[0,0]]";

    fn collection(features: &[String]) -> String {
        format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(","))
    }

    fn feature(geometry: &str, start: &str, end: &str) -> String {
        format!(r#"{{"type":"Feature","properties":{{"Start":"{start}","End":"{end}"}},"geometry":{geometry}}}"#)
    }

    #[test]
    fn empty_collection() {
        let (set, rejects) = parse_annotations_str(&collection(&[]), "EPSG:4326").unwrap();
        assert!(set.is_empty() && rejects.is_empty());
        assert_eq!(set.crs, "EPSG:4326");
    }

    #[test]
    fn multipolygon_flattens() {
        let g = format!(r#"{{"type":"MultiPolygon","coordinates":[[{SQUARE}],[[[10,10],[12,10],[12,12],[10,10]]]]}}"#);
        let text = collection(&[feature(&g, "2020-08-01T12:00:00Z", "2020-08-01T18:00:00Z")]);
        let (set, rejects) = parse_annotations_str(&text, "x").unwrap();
        assert!(rejects.is_empty());
        assert_eq!(set.len(), 2);
        assert_eq!(set.polygons[0].start, set.polygons[1].start);
        assert_ne!(set.polygons[0].source_id, set.polygons[1].source_id);
    }

    #[test]
    fn bad_features_go_to_rejects() {
        let g = format!(r#"{{"type":"Polygon","coordinates":[{SQUARE}]}}"#);
        let text = collection(&[
            feature(&g, "2020-08-02T00:00:00Z", "2020-08-01T00:00:00Z"),
            format!(r#"{{"type":"Feature","properties":{{}},"geometry":{g}}}"#),
            feature(&g, "2020-08-01T00:00:00Z", "2020-08-01T00:00:00Z"),
        ]);
        let (set, rejects) = parse_annotations_str(&text, "x").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(rejects.iter().map(|r| r.feature).collect::<Vec<_>>(), vec![0, 1]);
        assert!(rejects[1].reason.contains("Start"));
        assert_eq!(rejects_report(&rejects).lines().count(), 2);
    }

    #[test]
    fn not_a_collection() {
        assert!(parse_annotations_str(r#"{"type":"Feature"}"#, "x").is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let ring = vec![(0.0, 0.0), (3.0, 0.0), (3.0, 2.0), (0.0, 0.0)];
        let p = PlumePolygon::new(vec![ring], Timestamp(100), Timestamp(200), "a").unwrap();
        let set = AnnotationSet::new(vec![p], "EPSG:5070");
        let text = annotations_to_geojson(&set).to_string();
        let (back, rejects) = parse_annotations_str(&text, "other").unwrap();
        assert!(rejects.is_empty());
        assert_eq!(back, set);
    }
}
