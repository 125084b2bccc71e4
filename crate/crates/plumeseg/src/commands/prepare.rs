use std::path::Path;

use plumeseg_core::annotations::{rasterize_scene, AnnotationSet};
use plumeseg_core::dataset::{group_split, sample_crops, Sample, Split, SplitManifest};
use plumeseg_core::mask::BitMask;
use plumeseg_core::raster::{ChannelId, RasterScene};
use plumeseg_core::rng::derive;
use plumeseg_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{fresh_dir, list_scenes, scene_mask, stem, with_composite, write_manifest, Command};
use crate::config::{LabelSource, Resolved};
use crate::error::{read_file, write_file, AppError, Result};
use crate::geojson::{parse_annotations, rejects_report};
use crate::grd::{read_scene, read_scene_with, write_scene};

/// Entry of `samples.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub base_id: String,
    pub positive: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
    base_assignment: std::collections::BTreeMap<String, String>,
}

/// Label source for scenes, shared with `predict` for scoring.
pub enum Labels {
    Polygons(AnnotationSet),
    Masks(std::path::PathBuf),
}

impl Labels {
    pub fn load(cfg: &Resolved, crs: &str) -> Result<(Self, String)> {
        match cfg.raw.data.label_source {
            LabelSource::Annotations => {
                let (set, rejects) = parse_annotations(&cfg.annotations, crs)?;
                Ok((Labels::Polygons(set), rejects_report(&rejects)))
            }
            LabelSource::Masks => Ok((Labels::Masks(cfg.labels_dir.clone()), String::new())),
        }
    }

    /// Label of `scene`, read from `<name>.grd` for mask sources.
    pub fn for_scene(&self, scene: &RasterScene, name: &str) -> Result<BitMask> {
        match self {
            Labels::Polygons(set) => Ok(rasterize_scene(&set.match_time(scene.timestamp), scene)?),
            Labels::Masks(dir) => {
                let m = scene_mask(&read_scene(&dir.join(format!("{name}.grd")))?)?;
                if (m.width(), m.height()) != (scene.width(), scene.height()) {
                    return Err(Error::Shape(format!("label {name} does not match its scene")).into());
                }
                Ok(m)
            }
        }
    }
}

fn sample_scene(sample: &Sample, like: &RasterScene) -> Result<RasterScene> {
    let n = sample.size * sample.size;
    let mut channels = sample.channels.clone();
    channels.push(ChannelId::Mask);
    let mut planes: Vec<Vec<f32>> = (0..sample.channels.len()).map(|k| sample.plane(k).to_vec()).collect();
    planes.push(sample.label.to_plane());
    debug_assert!(planes.iter().all(|p| p.len() == n));
    Ok(RasterScene::new(
        sample.size,
        sample.size,
        channels,
        planes,
        sample.label.transform,
        like.crs.clone(),
        like.timestamp,
    )?)
}

/// Rasterizes labels, cuts crops, splits by source scene and writes the
/// samples with their split manifest.
pub fn run(cfg: &Resolved) -> Result<Value> {
    let scenes = list_scenes(&cfg.scenes_dir)?;
    if scenes.is_empty() {
        return Err(Error::Empty(format!("no scenes in {}", cfg.scenes_dir.display())).into());
    }
    let dir = cfg.layout.prepare();
    fresh_dir(&dir)?;
    let mut labels: Option<Labels> = None;
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for path in &scenes {
        let name = stem(path);
        let (scene, _) = read_scene_with(path, cfg.raw.data.max_nan_fraction)?;
        let scene = with_composite(scene, cfg)?;
        if labels.is_none() {
            let (l, rejects) = Labels::load(cfg, &scene.crs)?;
            if !rejects.is_empty() {
                write_file(&dir.join("rejects.jsonl"), rejects.as_bytes())?;
            }
            labels = Some(l);
        }
        let mask = labels.as_ref().expect("loaded above").for_scene(&scene, &name)?;
        let mut rng = derive(cfg.raw.seed, &format!("crops/{name}"));
        match sample_crops(&scene, &mask, &name, &cfg.crops, &mut rng) {
            Ok(crops) => {
                for c in crops {
                    write_scene(&sample_scene(&c, &scene)?, &dir.join("samples").join(format!("{}.grd", c.id)))?;
                    samples.push(c);
                }
            }
            Err(Error::Bounds(msg)) => {
                log::warn!("skipping {name}: {msg}");
                skipped.push(name);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if samples.is_empty() {
        return Err(Error::Empty("no crops could be cut from the scenes".into()).into());
    }
    let split = group_split(&samples, cfg.raw.split, &mut derive(cfg.raw.seed, "split"))?;
    let index: Vec<SampleEntry> = samples
        .iter()
        .map(|s| SampleEntry { id: s.id.clone(), base_id: s.base_id.clone(), positive: s.positive })
        .collect();
    write_file(&dir.join("samples.json"), serde_json::to_string_pretty(&index).expect("serializable").as_bytes())?;
    write_split(&dir.join("split.json"), &split)?;
    let positives = samples.iter().filter(|s| s.positive).count();
    let summary = json!({
        "scenes": scenes.len(),
        "skipped_scenes": skipped,
        "samples": samples.len(),
        "positive_samples": positives,
        "train": split.train.len(),
        "val": split.val.len(),
        "test": split.test.len(),
    });
    write_manifest(&dir, Command::Prepare, cfg, &summary)?;
    Ok(summary)
}

pub fn write_split(path: &Path, m: &SplitManifest) -> Result<()> {
    let doc = SplitFile {
        train: m.train.clone(),
        val: m.val.clone(),
        test: m.test.clone(),
        base_assignment: m.base_assignment.iter().map(|(k, v)| (k.clone(), v.name().to_string())).collect(),
    };
    write_file(path, serde_json::to_string_pretty(&doc).expect("serializable").as_bytes())
}

pub fn read_split(path: &Path) -> Result<SplitManifest> {
    let doc: SplitFile = serde_json::from_slice(&read_file(path)?).map_err(|e| AppError::json(path, e))?;
    let base_assignment = doc
        .base_assignment
        .into_iter()
        .map(|(k, v)| Split::from_name(&v).map(|s| (k, s)).ok_or_else(|| AppError::format(format!("unknown split {v:?}"))))
        .collect::<Result<_>>()?;
    Ok(SplitManifest { train: doc.train, val: doc.val, test: doc.test, base_assignment })
}

pub fn read_index(path: &Path) -> Result<Vec<SampleEntry>> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| AppError::json(path, e))
}

/// Loads one persisted sample: every channel but the trailing `Mask` is
/// input.
pub fn load_sample(dir: &Path, entry: &SampleEntry) -> Result<Sample> {
    let scene = read_scene(&dir.join("samples").join(format!("{}.grd", entry.id)))?;
    let label = scene_mask(&scene)?;
    let channels: Vec<ChannelId> = scene.channels().iter().copied().filter(|&c| c != ChannelId::Mask).collect();
    let mut input = Vec::with_capacity(channels.len() * scene.width() * scene.height());
    for &c in &channels {
        input.extend_from_slice(scene.require(c)?);
    }
    Ok(Sample::new(entry.id.clone(), entry.base_id.clone(), channels, input, label)?)
}
