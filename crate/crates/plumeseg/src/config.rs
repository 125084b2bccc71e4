//! Run configuration: one JSON document per run, validated into core types
//! before any command touches the filesystem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plumeseg_core::dataset::{CropConfig, NoiseKind, NormStats, SynthConfig};
use plumeseg_core::nn::{LossKind, TrainHyper, UNetConfig};
use plumeseg_core::raster::{BandMode, ChannelId, GeoTransform};
use plumeseg_core::time::Day;
use plumeseg_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, AppError, Result};
use crate::timefmt::{format_day, parse_day};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    Dilate(usize),
    Shift(i64, i64),
    DropPlume(f64),
}

impl From<NoiseSpec> for NoiseKind {
    fn from(n: NoiseSpec) -> Self {
        match n {
            NoiseSpec::None => NoiseKind::None,
            NoiseSpec::Dilate(r) => NoiseKind::Dilate(r),
            NoiseSpec::Shift(dx, dy) => NoiseKind::Shift(dx, dy),
            NoiseSpec::DropPlume(p) => NoiseKind::DropPlume(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationSection {
    pub count: usize,
    /// Range of station baseline PM2.5, ug/m3.
    pub baseline: [f64; 2],
    pub smoke_effect: f64,
    pub noise_sd: f64,
}

impl Default for StationSection {
    fn default() -> Self {
        Self {
            count: 12,
            baseline: [4.0, 14.0],
            smoke_effect: 10.0,
            noise_sd: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub plume_count: [usize; 2],
    pub plume_intensity: [f64; 2],
    pub plume_sigma: [f64; 2],
    pub plume_aspect: [f64; 2],
    pub cloud_count: [usize; 2],
    pub cloud_sigma: [f64; 2],
    pub cloud_albedo: [f64; 2],
    pub texture_seed: u64,
    pub noise: Vec<NoiseSpec>,
    pub aot_blur_radius: usize,
    pub transform: [f64; 6],
    pub crs: String,
    pub start_date: String,
    pub images_per_day: usize,
    pub stations: StationSection,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            count: 12,
            width: d.width,
            height: d.height,
            plume_count: [d.plume_count.0, d.plume_count.1],
            plume_intensity: d.plume_intensity.into(),
            plume_sigma: d.plume_sigma.into(),
            plume_aspect: d.plume_aspect.into(),
            cloud_count: [d.cloud_count.0, d.cloud_count.1],
            cloud_sigma: d.cloud_sigma.into(),
            cloud_albedo: d.cloud_albedo.into(),
            texture_seed: d.texture_seed,
            noise: Vec::new(),
            aot_blur_radius: d.aot_blur_radius,
            transform: d.transform.to_array(),
            crs: d.crs,
            start_date: "2020-08-01".into(),
            images_per_day: 3,
            stations: StationSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// Rasterize time-matched GeoJSON polygons.
    Annotations,
    /// Use `Mask` scenes with the same file names as the input scenes.
    Masks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub scenes: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub label_source: LabelSource,
    pub stations: Option<PathBuf>,
    pub pm25: Option<PathBuf>,
    pub max_nan_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            scenes: None,
            annotations: None,
            labels: None,
            label_source: LabelSource::Annotations,
            stations: None,
            pm25: None,
            max_nan_fraction: plumeseg_core::raster::DEFAULT_MAX_NAN_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CropSection {
    pub size: usize,
    pub n_max: usize,
    pub pos_frac: f64,
    pub min_positive_pixels: usize,
    pub max_attempts: usize,
}

impl Default for CropSection {
    fn default() -> Self {
        let d = CropConfig::default();
        Self {
            size: d.size,
            n_max: d.n_max,
            pos_frac: d.pos_frac,
            min_positive_pixels: d.min_positive_pixels,
            max_attempts: d.max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UNetSection {
    pub depth: usize,
    pub base_filters: usize,
    pub prelu_init: f64,
}

impl Default for UNetSection {
    fn default() -> Self {
        let d = UNetConfig::default();
        Self {
            depth: d.depth,
            base_filters: d.base_filters,
            prelu_init: d.prelu_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr0: f64,
    pub gamma: f64,
    pub step_epochs: usize,
    pub epochs: usize,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: String,
    pub drop_highest: bool,
    pub drop_count: usize,
    pub checkpoint_every: usize,
    pub threshold: f64,
    /// Continue from the latest checkpoint in the training directory.
    pub resume: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let h = TrainHyper::default();
        let t = TrainConfig::default();
        Self {
            lr0: h.lr0,
            gamma: h.gamma,
            step_epochs: h.step_epochs,
            epochs: h.epochs,
            batch: h.batch,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
            loss: t.loss.name().into(),
            drop_highest: t.drop_highest,
            drop_count: t.drop_count,
            checkpoint_every: t.checkpoint_every,
            threshold: t.threshold,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub tile: usize,
    /// Defaults to the latest checkpoint of the training run.
    pub checkpoint: Option<PathBuf>,
    /// Defaults to `data.scenes`.
    pub scenes: Option<PathBuf>,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            tile: 300,
            checkpoint: None,
            scenes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Annotations,
    Masks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub kind: SourceKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Defaults to the annotations plus the predicted masks.
    pub sources: Vec<SourceSpec>,
    pub first_day: Option<String>,
    pub last_day: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub band_mode: String,
    pub split: [f64; 3],
    /// Per-channel `[lo, hi]` overrides of the physical ranges.
    pub norm: BTreeMap<String, [f32; 2]>,
    pub synth: SynthSection,
    pub data: DataSection,
    pub crops: CropSection,
    pub unet: UNetSection,
    pub train: TrainSection,
    pub predict: PredictSection,
    pub validate: ValidateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            band_mode: BandMode::OneBand.name().into(),
            split: [0.70, 0.15, 0.15],
            norm: BTreeMap::new(),
            synth: SynthSection::default(),
            data: DataSection::default(),
            crops: CropSection::default(),
            unet: UNetSection::default(),
            train: TrainSection::default(),
            predict: PredictSection::default(),
            validate: ValidateSection::default(),
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub band_mode: Option<String>,
    pub loss: Option<String>,
    pub drop_highest: Option<bool>,
}

/// Output layout under `out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn synth(&self) -> PathBuf {
        self.root.join("synth")
    }
    pub fn prepare(&self) -> PathBuf {
        self.root.join("prepare")
    }
    pub fn train(&self) -> PathBuf {
        self.root.join("train")
    }
    pub fn predict(&self) -> PathBuf {
        self.root.join("predict")
    }
    pub fn validate(&self) -> PathBuf {
        self.root.join("validate")
    }
}

/// Fully validated configuration in core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The document after overrides and path resolution.
    pub raw: RunConfig,
    pub layout: Layout,
    pub band_mode: BandMode,
    pub synth: SynthConfig,
    pub first_day: Day,
    pub crops: CropConfig,
    pub norm: NormStats,
    pub unet: UNetConfig,
    pub train: TrainConfig,
    pub scenes_dir: PathBuf,
    pub annotations: PathBuf,
    pub labels_dir: PathBuf,
    pub stations_csv: PathBuf,
    pub pm25_csv: PathBuf,
    pub sources: Vec<SourceSpec>,
    pub day_range: (Option<Day>, Option<Day>),
}

fn pair<T: Copy>(a: [T; 2]) -> (T, T) {
    (a[0], a[1])
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AppError::config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = std::str::from_utf8(&bytes).map_err(|e| AppError::config(e.to_string()))?;
        let mut cfg = Self::from_json(text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        self.out = resolve(base, &self.out);
        for p in [
            &mut self.data.scenes,
            &mut self.data.annotations,
            &mut self.data.labels,
            &mut self.data.stations,
            &mut self.data.pm25,
            &mut self.predict.checkpoint,
            &mut self.predict.scenes,
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(base, p);
        }
        for s in &mut self.validate.sources {
            s.path = resolve(base, &s.path);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(t) = o.threshold {
            self.train.threshold = t;
        }
        if let Some(b) = &o.band_mode {
            self.band_mode = b.clone();
        }
        if let Some(l) = &o.loss {
            self.train.loss = l.clone();
        }
        if let Some(d) = o.drop_highest {
            self.train.drop_highest = d;
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let band_mode = BandMode::from_name(&self.band_mode)
            .ok_or_else(|| AppError::config(format!("unknown band mode {:?}", self.band_mode)))?;
        let s = &self.synth;
        let synth = SynthConfig {
            width: s.width,
            height: s.height,
            plume_count: pair(s.plume_count),
            plume_intensity: pair(s.plume_intensity),
            plume_sigma: pair(s.plume_sigma),
            plume_aspect: pair(s.plume_aspect),
            cloud_count: pair(s.cloud_count),
            cloud_sigma: pair(s.cloud_sigma),
            cloud_albedo: pair(s.cloud_albedo),
            texture_seed: s.texture_seed,
            noise: s.noise.iter().cloned().map(NoiseKind::from).collect(),
            aot_blur_radius: s.aot_blur_radius,
            transform: GeoTransform::from_array(s.transform)?,
            crs: s.crs.clone(),
            timestamp: Default::default(),
        };
        synth.validate()?;
        if s.images_per_day == 0 {
            return Err(AppError::config("images_per_day must be positive"));
        }
        let st = &s.stations;
        if !(st.baseline[0] <= st.baseline[1]) || !(st.noise_sd >= 0.0) || !st.smoke_effect.is_finite() {
            return Err(AppError::config("invalid station panel settings"));
        }
        let first_day = parse_day(&s.start_date).map_err(|e| AppError::config(e.to_string()))?;

        let c = &self.crops;
        let crops = CropConfig {
            size: c.size,
            n_max: c.n_max,
            pos_frac: c.pos_frac,
            min_positive_pixels: c.min_positive_pixels,
            max_attempts: c.max_attempts,
            band_mode,
        };
        if c.size == 0 || !(0.0..=1.0).contains(&c.pos_frac) {
            return Err(AppError::config("crop size must be positive and pos_frac within [0, 1]"));
        }
        let total: f64 = self.split.iter().sum();
        if self.split.iter().any(|f| !(*f >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(AppError::config(format!("split fractions {:?} must be non-negative and sum to 1", self.split)));
        }
        if !(self.data.max_nan_fraction >= 0.0 && self.data.max_nan_fraction <= 1.0) {
            return Err(AppError::config("max_nan_fraction outside [0, 1]"));
        }

        let mut norm = NormStats::physical();
        for (name, [lo, hi]) in &self.norm {
            let ch = ChannelId::from_name(name).ok_or_else(|| AppError::config(format!("unknown channel {name:?}")))?;
            norm.set(ch, *lo, *hi)?;
        }

        let unet = UNetConfig {
            in_channels: band_mode.plane_count(),
            depth: self.unet.depth,
            base_filters: self.unet.base_filters,
            prelu_init: self.unet.prelu_init,
        };
        let net = plumeseg_core::nn::UNet::new(unet)?;
        let t = &self.train;
        let loss = match t.loss.as_str() {
            "bce" => LossKind::Bce,
            "mae" => LossKind::Mae,
            other => return Err(AppError::config(format!("unknown loss {other:?}"))),
        };
        let train = TrainConfig {
            hyper: TrainHyper {
                lr0: t.lr0,
                gamma: t.gamma,
                step_epochs: t.step_epochs,
                epochs: t.epochs,
                batch: t.batch,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.eps,
            },
            loss,
            drop_highest: t.drop_highest,
            drop_count: t.drop_count,
            band_mode,
            seed: self.seed,
            checkpoint_every: t.checkpoint_every,
            threshold: t.threshold,
        };
        train.validate(&net)?;
        if self.predict.tile == 0 {
            return Err(AppError::config("tile must be positive"));
        }

        let layout = Layout { root: self.out.clone() };
        let synth_dir = layout.synth();
        let or = |p: &Option<PathBuf>, default: PathBuf| p.clone().unwrap_or(default);
        let annotations = or(&self.data.annotations, synth_dir.join("annotations.geojson"));
        let sources = if self.validate.sources.is_empty() {
            vec![
                SourceSpec {
                    name: "annotations".into(),
                    kind: SourceKind::Annotations,
                    path: annotations.clone(),
                },
                SourceSpec {
                    name: "model".into(),
                    kind: SourceKind::Masks,
                    path: layout.predict().join("masks"),
                },
            ]
        } else {
            self.validate.sources.clone()
        };
        let mut names: Vec<&str> = sources.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(AppError::config("validation source names must be unique"));
        }
        let day = |s: &Option<String>| s.as_deref().map(parse_day).transpose().map_err(|e| AppError::config(e.to_string()));
        let day_range = (day(&self.validate.first_day)?, day(&self.validate.last_day)?);

        Ok(Resolved {
            raw: self.clone(),
            band_mode,
            synth,
            first_day,
            crops,
            norm,
            unet,
            train,
            scenes_dir: or(&self.data.scenes, synth_dir.join("scenes")),
            annotations,
            labels_dir: or(&self.data.labels, synth_dir.join("labels")),
            stations_csv: or(&self.data.stations, synth_dir.join("stations.csv")),
            pm25_csv: or(&self.data.pm25, synth_dir.join("pm25.csv")),
            sources,
            day_range,
            layout,
        })
    }
}

impl Resolved {
    pub fn first_day_str(&self) -> String {
        format_day(self.first_day)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(r.unet.in_channels, 3);
        assert_eq!(r.train.hyper.epochs, 21);
        assert_eq!(r.scenes_dir, PathBuf::from("out/synth/scenes"));
        assert_eq!(r.sources.len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"seed": 1, "sede": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"epochz": 2}}"#).is_err());
        let c = RunConfig::from_json(r#"{"train": {"epochs": 2}, "synth": {"noise": [{"dilate": 6}, {"drop_plume": 0.2}, "none"]}}"#).unwrap();
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.synth.noise, vec![NoiseSpec::Dilate(6), NoiseSpec::DropPlume(0.2), NoiseSpec::None]);
    }

    #[test]
    fn overrides_and_validation() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            band_mode: Some("3band".into()),
            loss: Some("mae".into()),
            drop_highest: Some(true),
            threshold: Some(0.3),
            ..Overrides::default()
        });
        let r = c.resolve().unwrap();
        assert_eq!(r.unet.in_channels, 5);
        assert_eq!(r.train.loss, LossKind::Mae);
        assert!(r.train.drop_highest);
        assert_eq!(r.train.threshold, 0.3);
        c.band_mode = "2band".into();
        assert!(c.resolve().is_err());
        let mut c = RunConfig::default();
        c.split = [0.5, 0.2, 0.2];
        assert!(c.resolve().is_err());
        let mut c = RunConfig::default();
        c.norm.insert("C07".into(), [300.0, 200.0]);
        assert!(c.resolve().is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut c = RunConfig::from_json(r#"{"out": "runs/a", "data": {"scenes": "/abs/scenes", "pm25": "pm.csv"}}"#).unwrap();
        c.rebase(Path::new("/cfg"));
        assert_eq!(c.out, PathBuf::from("/cfg/runs/a"));
        assert_eq!(c.data.scenes, Some(PathBuf::from("/abs/scenes")));
        assert_eq!(c.data.pm25, Some(PathBuf::from("/cfg/pm.csv")));
    }
}
