//! Scene container: `"GRD1"`, little-endian `u32` header length, JSON
//! header, then one little-endian `f32` plane per channel, row-major.

use std::path::Path;

use plumeseg_core::raster::{ChannelId, GeoTransform, NanFill, RasterScene, DEFAULT_MAX_NAN_FRACTION};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, AppError, Result};
use crate::timefmt::{format_timestamp, parse_timestamp};

pub const MAGIC: &[u8; 4] = b"GRD1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    width: usize,
    height: usize,
    channels: Vec<String>,
    transform: [f64; 6],
    crs: String,
    timestamp: String,
}

/// Serializes a scene. Scenes without channels are rejected.
pub fn encode_scene(scene: &RasterScene) -> Result<Vec<u8>> {
    if scene.channels().is_empty() {
        return Err(AppError::format("scene has no channels"));
    }
    let header = Header {
        width: scene.width(),
        height: scene.height(),
        channels: scene.channels().iter().map(|c| c.name().to_string()).collect(),
        transform: scene.transform.to_array(),
        crs: scene.crs.clone(),
        timestamp: format_timestamp(scene.timestamp),
    };
    let json = serde_json::to_vec(&header).map_err(|e| AppError::format(e.to_string()))?;
    let n = scene.width() * scene.height();
    let mut out = Vec::with_capacity(8 + json.len() + 4 * n * scene.channels().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for plane in scene.planes() {
        for v in plane {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a container without value sanitation.
pub fn decode_scene(bytes: &[u8]) -> Result<RasterScene> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(AppError::format("missing GRD1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes
        .get(8..8 + hlen)
        .ok_or_else(|| AppError::format(format!("header length {hlen} exceeds file size")))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| AppError::format(format!("bad header: {e}")))?;
    let channels = header
        .channels
        .iter()
        .map(|n| ChannelId::from_name(n).ok_or_else(|| AppError::format(format!("unknown channel {n:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let n = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| AppError::format("scene dimensions overflow"))?;
    let data = &bytes[8 + hlen..];
    let expected = n * 4 * channels.len();
    if data.len() != expected {
        return Err(AppError::format(format!(
            "{} plane bytes, expected {expected} for {} channels of {}x{}",
            data.len(),
            channels.len(),
            header.width,
            header.height
        )));
    }
    let planes = data
        .chunks_exact(4 * n.max(1))
        .take(channels.len())
        .map(|p| p.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect())
        .collect();
    let transform = GeoTransform::from_array(header.transform)?;
    Ok(RasterScene::new(
        header.width,
        header.height,
        channels,
        planes,
        transform,
        header.crs,
        parse_timestamp(&header.timestamp)?,
    )?)
}

/// Reads and sanitizes a scene, returning the NaN repairs made.
pub fn read_scene_with(path: &Path, max_nan_fraction: f64) -> Result<(RasterScene, Vec<NanFill>)> {
    let mut scene = decode_scene(&read_file(path)?)?;
    let fills = scene.sanitize(max_nan_fraction)?;
    for f in &fills {
        log::warn!("{}: filled {} NaN pixels of {} with {}", path.display(), f.count, f.channel, f.median);
    }
    Ok((scene, fills))
}

pub fn read_scene(path: &Path) -> Result<RasterScene> {
    read_scene_with(path, DEFAULT_MAX_NAN_FRACTION).map(|(s, _)| s)
}

pub fn write_scene(scene: &RasterScene, path: &Path) -> Result<()> {
    write_file(path, &encode_scene(scene)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use plumeseg_core::time::Timestamp;

    fn scene(planes: Vec<Vec<f32>>, channels: Vec<ChannelId>, w: usize, h: usize) -> RasterScene {
        let t = GeoTransform::north_up(100.0, 200.0, 2.0, -2.0).unwrap();
        RasterScene::new(w, h, channels, planes, t, "EPSG:5070", Timestamp(1_600_000_000)).unwrap()
    }

    #[test]
    fn minimal_round_trip() {
        let s = scene(vec![vec![0.0, 0.5, 1.0, 0.25]], vec![ChannelId::Red], 2, 2);
        let bytes = encode_scene(&s).unwrap();
        assert_eq!(&bytes[..4], b"GRD1");
        let back = decode_scene(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_scene(&back).unwrap(), bytes);
    }

    #[test]
    fn rejects_truncated_planes_and_bad_magic() {
        let s = scene(vec![vec![0.1; 6], vec![300.0; 6]], vec![ChannelId::Blue, ChannelId::C07], 3, 2);
        let mut bytes = encode_scene(&s).unwrap();
        bytes.pop();
        assert!(matches!(decode_scene(&bytes), Err(AppError::Core(plumeseg_core::Error::Format(_)))));
        bytes[0] = b'X';
        assert!(decode_scene(&bytes).is_err());
    }

    #[test]
    fn nan_budget() {
        let n = 100;
        let mut plane = vec![0.5f32; n];
        plane[3] = f32::NAN;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.grd");
        write_scene(&scene(vec![plane.clone()], vec![ChannelId::Red], 10, 10), &path).unwrap();
        let (s, fills) = read_scene_with(&path, 0.01).unwrap();
        assert_eq!(fills.len(), 1);
        assert_eq!(s.plane(ChannelId::Red).unwrap()[3], 0.5);
        plane[4] = f32::NAN;
        write_scene(&scene(vec![plane], vec![ChannelId::Red], 10, 10), &path).unwrap();
        assert!(matches!(read_scene(&path), Err(AppError::Core(plumeseg_core::Error::Data(_)))));
    }

    #[test]
    fn zero_channels_rejected_on_write() {
        let s = scene(vec![], vec![], 2, 2);
        assert!(encode_scene(&s).is_err());
    }
}
