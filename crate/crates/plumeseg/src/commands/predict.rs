use plumeseg_core::evaluation::{confusion, predict_scene, threshold, FrozenUNet};
use plumeseg_core::nn::UNet;
use plumeseg_core::Error;
use serde_json::{json, Value};

use super::prepare::Labels;
use super::{fresh_dir, list_scenes, mask_scene, stem, with_composite, write_manifest, Command};
use crate::checkpoint::{latest_checkpoint, read_checkpoint};
use crate::config::{LabelSource, Resolved};
use crate::error::{AppError, Result};
use crate::grd::{read_scene_with, write_scene};
use crate::tables::{write_metrics, MetricsRow};

/// Tiled inference over every scene. Masks go to `masks/`; when labels
/// are available, per-scene scores go to `metrics.csv`.
pub fn run(cfg: &Resolved) -> Result<Value> {
    let ckpt_path = match &cfg.raw.predict.checkpoint {
        Some(p) => p.clone(),
        None => latest_checkpoint(&cfg.layout.train())?
            .map(|(_, p)| p)
            .ok_or_else(|| AppError::config(format!("no checkpoint in {}", cfg.layout.train().display())))?,
    };
    let scenes_dir = cfg.raw.predict.scenes.clone().unwrap_or_else(|| cfg.scenes_dir.clone());
    let scenes = list_scenes(&scenes_dir)?;
    let ck = read_checkpoint(&ckpt_path)?;
    if ck.config.in_channels != cfg.band_mode.plane_count() {
        return Err(Error::Channel(format!(
            "checkpoint expects {} input planes, band mode {} has {}",
            ck.config.in_channels,
            cfg.band_mode.name(),
            cfg.band_mode.plane_count()
        ))
        .into());
    }
    let net = UNet::new(ck.config)?;
    let model = FrozenUNet { net: &net, params: &ck.state.params };
    let dir = cfg.layout.predict();
    fresh_dir(&dir)?;

    let labels_available = match cfg.raw.data.label_source {
        LabelSource::Annotations => cfg.annotations.exists(),
        LabelSource::Masks => cfg.labels_dir.exists(),
    };
    let mut labels: Option<Labels> = None;
    let mut rows = Vec::new();
    let mut positive = 0usize;
    for path in &scenes {
        let name = stem(path);
        let (scene, _) = read_scene_with(path, cfg.raw.data.max_nan_fraction)?;
        let scene = with_composite(scene, cfg)?;
        let prob = predict_scene(&model, &scene, cfg.band_mode, &cfg.norm, cfg.raw.predict.tile)?;
        let mask = threshold(&prob, cfg.train.threshold)?;
        positive += mask.count_ones();
        write_scene(&mask_scene(&mask, &scene)?, &dir.join("masks").join(format!("{name}.grd")))?;
        if labels_available {
            if labels.is_none() {
                labels = Some(Labels::load(cfg, &scene.crs)?.0);
            }
            let truth = labels.as_ref().expect("loaded above").for_scene(&scene, &name)?;
            rows.push(MetricsRow::new(name, &confusion(&mask, &truth)?));
        }
    }
    if labels_available {
        write_metrics(&dir.join("metrics.csv"), &rows)?;
    }
    let mean_dice = (!rows.is_empty()).then(|| rows.iter().map(|r| r.dice).sum::<f64>() / rows.len() as f64);
    let summary = json!({
        "checkpoint": ckpt_path,
        "scenes": scenes.len(),
        "positive_pixels": positive,
        "mean_dice": mean_dice,
    });
    write_manifest(&dir, Command::Predict, cfg, &summary)?;
    Ok(summary)
}
