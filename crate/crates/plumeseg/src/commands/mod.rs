//! The five pipeline commands. Each reads a resolved configuration, writes
//! under its own directory of the output root and finishes with a
//! `manifest.json`.

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use plumeseg_core::mask::BitMask;
use plumeseg_core::raster::{ChannelId, RasterScene};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{Overrides, Resolved, RunConfig};
use crate::error::{read_file, write_file, AppError, Result};

pub mod predict;
pub mod prepare;
pub mod synth;
pub mod train;
pub mod validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Prepare,
    Train,
    Predict,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Prepare => "prepare",
            Command::Train => "train",
            Command::Predict => "predict",
            Command::Validate => "validate",
        }
    }
}

/// Loads, overrides and validates a config, then runs one command.
pub fn run_from_file(cmd: Command, config: &Path, overrides: &Overrides) -> Result<Value> {
    let mut raw = RunConfig::load(config)?;
    raw.apply(overrides);
    run(cmd, &raw.resolve()?)
}

pub fn run(cmd: Command, cfg: &Resolved) -> Result<Value> {
    match cmd {
        Command::Synth => synth::run(cfg),
        Command::Prepare => prepare::run(cfg),
        Command::Train => train::run(cfg),
        Command::Predict => predict::run(cfg),
        Command::Validate => validate::run(cfg),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    path: String,
    sha256: String,
}

/// Writes `dir/manifest.json` with the resolved config, a summary and the
/// checksum of every other file under `dir`.
pub fn write_manifest(dir: &Path, cmd: Command, cfg: &Resolved, summary: &Value) -> Result<()> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut outputs = Vec::new();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap_or(&f).to_string_lossy().replace('\\', "/");
        if rel == "manifest.json" {
            continue;
        }
        outputs.push(OutputEntry {
            sha256: sha256_hex(&read_file(&f)?),
            path: rel,
        });
    }
    let doc = serde_json::json!({
        "command": cmd.name(),
        "created_at": Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        "config": cfg.raw,
        "summary": summary,
        "outputs": outputs,
    });
    write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(&doc).expect("serializable").as_bytes())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(AppError::io(dir, e)),
    };
    for entry in entries {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// `*.grd` files of a directory in name order; a missing directory is empty.
pub fn list_scenes(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(AppError::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "grd") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Removes and recreates a command's output directory.
pub fn fresh_dir(dir: &Path) -> Result<()> {
    match std::fs::remove_dir_all(dir) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(AppError::io(dir, e)),
    }
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

pub fn mask_scene(mask: &BitMask, like: &RasterScene) -> Result<RasterScene> {
    Ok(RasterScene::new(
        mask.width(),
        mask.height(),
        vec![ChannelId::Mask],
        vec![mask.to_plane()],
        mask.transform,
        like.crs.clone(),
        like.timestamp,
    )?)
}

/// The `Mask` plane of a scene as a bit mask.
pub fn scene_mask(scene: &RasterScene) -> Result<BitMask> {
    let plane = scene.require(ChannelId::Mask)?;
    Ok(BitMask::from_plane(scene.width(), scene.height(), plane, scene.transform)?)
}

/// Adds the synthetic green band when the band mode needs it.
pub fn with_composite(scene: RasterScene, cfg: &Resolved) -> Result<RasterScene> {
    if cfg.band_mode.channels().contains(&ChannelId::GreenSynth) && !scene.has(ChannelId::GreenSynth) {
        Ok(scene.composite_true_color()?)
    } else {
        Ok(scene)
    }
}
