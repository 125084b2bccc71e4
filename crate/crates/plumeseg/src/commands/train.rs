use std::collections::BTreeMap;
use std::path::Path;

use plumeseg_core::dataset::{normalize, Sample, Split};
use plumeseg_core::nn::{ModelState, UNet};
use plumeseg_core::rng::derive;
use plumeseg_core::training::{train, EpochRecord};
use plumeseg_core::Error;
use serde_json::{json, Value};

use super::prepare::{load_sample, read_index, read_split};
use super::{write_manifest, Command};
use crate::checkpoint::{checkpoint_name, latest_checkpoint, read_checkpoint, write_checkpoint};
use crate::config::Resolved;
use crate::error::{write_file, AppError, Result};
use crate::svg::{line_chart, Series};
use crate::tables::{read_history, write_history, HistoryRow};

/// Normalized samples of one split.
pub fn load_split(cfg: &Resolved, split: Split) -> Result<Vec<Sample>> {
    let dir = cfg.layout.prepare();
    let manifest = read_split(&dir.join("split.json"))?;
    let index: BTreeMap<String, _> = read_index(&dir.join("samples.json"))?
        .into_iter()
        .map(|e| (e.id.clone(), e))
        .collect();
    manifest
        .ids(split)
        .iter()
        .map(|id| {
            let entry = index.get(id).ok_or_else(|| AppError::data(format!("sample {id} missing from index")))?;
            let s = load_sample(&dir, entry)?;
            if s.channels != cfg.band_mode.channels() {
                return Err(Error::Channel(format!(
                    "sample {id} has channels {:?}, band mode {} needs {:?}",
                    s.channels,
                    cfg.band_mode.name(),
                    cfg.band_mode.channels()
                ))
                .into());
            }
            Ok(normalize(&s, &cfg.norm)?)
        })
        .collect()
}

fn write_curves(dir: &Path, rows: &[HistoryRow]) -> Result<()> {
    let pts = |f: fn(&HistoryRow) -> f64| rows.iter().map(|r| (r.epoch as f64, f(r))).collect::<Vec<_>>();
    let loss = line_chart(
        "loss",
        "epoch",
        &[
            Series { name: "train_loss", points: pts(|r| r.train_loss) },
            Series { name: "val_loss", points: pts(|r| r.val_loss) },
        ],
    );
    let dice = line_chart(
        "Dice",
        "epoch",
        &[
            Series { name: "train_dice", points: pts(|r| r.train_dice) },
            Series { name: "val_dice", points: pts(|r| r.val_dice) },
        ],
    );
    write_file(&dir.join("loss.svg"), loss.as_bytes())?;
    write_file(&dir.join("dice.svg"), dice.as_bytes())
}

/// Trains on the prepared split, checkpointing as configured. With
/// `train.resume` the latest checkpoint is loaded and the history continues
/// at the following epoch.
pub fn run(cfg: &Resolved) -> Result<Value> {
    let train_set = load_split(cfg, Split::Train)?;
    let val_set = load_split(cfg, Split::Val)?;
    let dir = cfg.layout.train();
    let net = UNet::new(cfg.unet)?;

    let (mut state, start, mut history) = match latest_checkpoint(&dir)?.filter(|_| cfg.raw.train.resume) {
        Some((epoch, path)) => {
            let ck = read_checkpoint(&path)?;
            if ck.config != cfg.unet {
                return Err(AppError::config(format!(
                    "checkpoint {} was trained with {:?}, config asks for {:?}",
                    path.display(),
                    ck.config,
                    cfg.unet
                )));
            }
            let rows = read_history(&dir.join("history.csv"))?
                .into_iter()
                .filter(|r| r.epoch <= epoch)
                .collect::<Vec<_>>();
            log::info!("resuming from {} at epoch {}", path.display(), epoch + 1);
            (ck.state, epoch + 1, rows)
        }
        None => {
            super::fresh_dir(&dir)?;
            (net.init::<f32, _>(&mut derive(cfg.raw.seed, "init")), 0, Vec::new())
        }
    };

    let every = cfg.train.checkpoint_every;
    let last = cfg.train.hyper.epochs.saturating_sub(1);
    let mut observer = |rec: &EpochRecord, st: &ModelState| -> plumeseg_core::Result<()> {
        let io = |e: AppError| Error::Format(e.to_string());
        if every > 0 && ((rec.epoch + 1) % every == 0 || rec.epoch == last) {
            write_checkpoint(&dir.join(checkpoint_name(rec.epoch)), &cfg.unet, st, rec.epoch).map_err(io)?;
        }
        history.push(HistoryRow::from(rec));
        write_history(&dir.join("history.csv"), &history).map_err(io)?;
        write_curves(&dir, &history).map_err(io)?;
        Ok(())
    };
    let records = train(&net, &mut state, &train_set, &val_set, &cfg.train, start, &mut observer)?;
    let dropped: Vec<&String> = records.iter().flat_map(|r| &r.dropped_sample_ids).collect();
    let summary = json!({
        "train_samples": train_set.len(),
        "val_samples": val_set.len(),
        "start_epoch": start,
        "epochs_run": records.len(),
        "final": records.last().map(|r| json!({
            "epoch": r.epoch,
            "train_loss": r.train_loss,
            "val_loss": r.val_loss,
            "val_dice": r.val_dice,
        })),
        "dropped_samples": dropped.len(),
        "steps": state.step,
    });
    write_manifest(&dir, Command::Train, cfg, &summary)?;
    Ok(summary)
}
