//! Thresholding, Dice, tiled scene inference and confusion counts.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::NormStats;
use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::nn::{Tensor, UNet};
use crate::raster::{BandMode, GeoTransform, RasterScene};

/// Per-pixel smoke probabilities on a georeferenced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    pub transform: GeoTransform,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>, transform: GeoTransform) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} probabilities for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("probability {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
            transform,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }
}

/// `1` where `p >= t`.
pub fn threshold(prob: &ProbMap, t: f64) -> Result<BitMask> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!("threshold {t} outside (0, 1)")));
    }
    let bits = threshold_values(&prob.values, t);
    BitMask::from_bits(prob.width, prob.height, bits, prob.transform)
}

pub(crate) fn threshold_values(values: &[f32], t: f64) -> Vec<u8> {
    values.iter().map(|&p| u8::from(p as f64 >= t)).collect()
}

fn overlap_counts(a: &[u8], b: &[u8]) -> (u64, u64, u64) {
    let mut inter = 0u64;
    let mut na = 0u64;
    let mut nb = 0u64;
    for (&x, &y) in a.iter().zip(b) {
        inter += (x & y) as u64;
        na += x as u64;
        nb += y as u64;
    }
    (inter, na, nb)
}

/// `2|A ∩ B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &BitMask, b: &BitMask) -> Result<f64> {
    a.same_shape(b)?;
    Ok(dice_bits(a.bits(), b.bits()))
}

pub(crate) fn dice_bits(a: &[u8], b: &[u8]) -> f64 {
    let (inter, na, nb) = overlap_counts(a, b);
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `2tp / (2tp + fp + fn)`, 1 when all three are zero.
    pub fn dice(&self) -> f64 {
        let d = 2 * self.tp + self.fp + self.fn_;
        if d == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / d as f64
        }
    }
}

pub fn confusion(pred: &BitMask, truth: &BitMask) -> Result<Confusion> {
    pred.same_shape(truth)?;
    let mut c = Confusion::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// Anything that maps a normalized `(1, C, h, w)` tile to `(1, 1, h, w)`
/// probabilities.
pub trait TileModel {
    fn predict_tile(&self, input: &Tensor<f32>) -> Result<Tensor<f32>>;
}

/// A U-Net with frozen parameters.
#[derive(Debug, Clone, Copy)]
pub struct FrozenUNet<'a> {
    pub net: &'a UNet,
    pub params: &'a [Tensor<f32>],
}

impl TileModel for FrozenUNet<'_> {
    fn predict_tile(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.net.predict_any(self.params, input)
    }
}

/// Tile start offsets along one axis: a regular grid of `tile`, plus one
/// tile flush with the far edge when `size` is not a multiple.
pub fn tile_origins(size: usize, tile: usize) -> Vec<usize> {
    let tile = tile.min(size);
    if tile == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (0..size / tile).map(|k| k * tile).collect();
    if size % tile != 0 {
        out.push(size - tile);
    }
    out
}

/// Normalizes the band-mode planes of `scene`, runs `model` tile by tile in
/// row-major order and averages overlapping predictions.
pub fn predict_scene<M: TileModel + ?Sized>(
    model: &M,
    scene: &RasterScene,
    mode: BandMode,
    stats: &NormStats,
    tile: usize,
) -> Result<ProbMap> {
    if tile == 0 {
        return Err(Error::Config("tile size must be positive".into()));
    }
    let (w, h) = (scene.width(), scene.height());
    let channels = mode.channels();
    let mut planes = Vec::with_capacity(channels.len());
    for (&c, p) in channels.iter().zip(scene.stack_input(mode)?) {
        let mut plane = p.to_vec();
        stats.apply(c, &mut plane)?;
        planes.push(plane);
    }
    let (th, tw) = (tile.min(h), tile.min(w));
    let mut sum = vec![0.0f64; w * h];
    let mut count = vec![0u32; w * h];
    let mut buf = Vec::with_capacity(channels.len() * th * tw);
    for &row0 in &tile_origins(h, tile) {
        for &col0 in &tile_origins(w, tile) {
            buf.clear();
            for p in &planes {
                for r in row0..row0 + th {
                    buf.extend_from_slice(&p[r * w + col0..r * w + col0 + tw]);
                }
            }
            let input = Tensor::from_vec([1, channels.len(), th, tw], core::mem::take(&mut buf))?;
            let out = model.predict_tile(&input)?;
            if out.shape() != [1, 1, th, tw] {
                return Err(Error::Shape(format!(
                    "model returned {:?} for a {th}x{tw} tile",
                    out.shape()
                )));
            }
            out.check_finite("tile prediction")?;
            for r in 0..th {
                for c in 0..tw {
                    let i = (row0 + r) * w + col0 + c;
                    sum[i] += out.data()[r * tw + c] as f64;
                    count[i] += 1;
                }
            }
            buf = input.into_vec();
        }
    }
    let values = sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| ((s / n as f64) as f32).clamp(0.0, 1.0))
        .collect();
    ProbMap::new(w, h, values, scene.transform)
}
