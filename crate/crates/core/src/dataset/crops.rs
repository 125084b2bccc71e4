use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::Sample;
use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::raster::{crop_plane, BandMode, RasterScene};

#[derive(Debug, Clone, PartialEq)]
pub struct CropConfig {
    pub size: usize,
    pub n_max: usize,
    pub pos_frac: f64,
    /// Labeled pixels a window needs to count as a positive draw.
    pub min_positive_pixels: usize,
    pub max_attempts: usize,
    pub band_mode: BandMode,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            size: 300,
            n_max: 15,
            pos_frac: 0.6,
            min_positive_pixels: 1,
            max_attempts: 200,
            band_mode: BandMode::OneBand,
        }
    }
}

/// Summed-area table with a zero first row and column.
struct Integral {
    stride: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(mask: &BitMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let stride = w + 1;
        let mut sums = alloc::vec![0u32; stride * (h + 1)];
        for r in 0..h {
            let mut row = 0u32;
            for c in 0..w {
                row += mask.bits()[r * w + c] as u32;
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + row;
            }
        }
        Self { stride, sums }
    }

    fn window(&self, row0: usize, col0: usize, size: usize) -> usize {
        let s = self.stride;
        let (r1, c1) = (row0 + size, col0 + size);
        (self.sums[r1 * s + c1] + self.sums[row0 * s + col0]
            - self.sums[row0 * s + c1]
            - self.sums[r1 * s + col0]) as usize
    }
}

/// Cuts up to `cfg.n_max` square crops from `scene`, aiming for
/// `round(pos_frac * n_max)` positives when the mask has any labeled pixel.
/// Window origins are unique; failed draws shrink the output.
pub fn sample_crops<R: Rng + ?Sized>(
    scene: &RasterScene,
    mask: &BitMask,
    base_id: &str,
    cfg: &CropConfig,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    let (w, h, size) = (scene.width(), scene.height(), cfg.size);
    if size == 0 || w < size || h < size {
        return Err(Error::Bounds(format!(
            "scene {w}x{h} is smaller than a {size}x{size} crop"
        )));
    }
    if (mask.width(), mask.height()) != (w, h) {
        return Err(Error::Shape(format!(
            "mask {}x{} does not match scene {w}x{h}",
            mask.width(),
            mask.height()
        )));
    }
    if !(0.0..=1.0).contains(&cfg.pos_frac) {
        return Err(Error::Config(format!("pos_frac {} outside [0, 1]", cfg.pos_frac)));
    }
    let planes = scene.stack_input(cfg.band_mode)?;
    let integral = Integral::new(mask);
    let ones: Vec<usize> = mask
        .bits()
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| (b == 1).then_some(i))
        .collect();
    let n_pos = if ones.is_empty() {
        0
    } else {
        libm::round(cfg.pos_frac * cfg.n_max as f64) as usize
    };
    let n_neg = cfg.n_max - n_pos;
    let min_pos = cfg.min_positive_pixels.max(1);

    let mut used = BTreeSet::new();
    let mut origins = Vec::with_capacity(cfg.n_max);
    'pos: for _ in 0..n_pos {
        for _ in 0..cfg.max_attempts {
            let idx = ones[rng.random_range(0..ones.len())];
            let (r, c) = (idx / w, idx % w);
            let row0 = rng.random_range(r.saturating_sub(size - 1)..=r.min(h - size));
            let col0 = rng.random_range(c.saturating_sub(size - 1)..=c.min(w - size));
            if integral.window(row0, col0, size) >= min_pos && used.insert((row0, col0)) {
                origins.push((row0, col0));
                continue 'pos;
            }
        }
        break;
    }
    'neg: for _ in 0..n_neg {
        for _ in 0..cfg.max_attempts {
            let row0 = rng.random_range(0..=h - size);
            let col0 = rng.random_range(0..=w - size);
            if integral.window(row0, col0, size) == 0 && used.insert((row0, col0)) {
                origins.push((row0, col0));
                continue 'neg;
            }
        }
        break;
    }

    origins
        .into_iter()
        .enumerate()
        .map(|(k, (row0, col0))| {
            let mut input = Vec::with_capacity(planes.len() * size * size);
            for p in &planes {
                input.extend(crop_plane(p, w, row0, col0, size));
            }
            Sample::new(
                format!("{base_id}_r{row0}_c{col0}_{k:02}"),
                base_id,
                cfg.band_mode.channels().to_vec(),
                input,
                mask.crop_window(row0, col0, size)?,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{ChannelId, GeoTransform};
    use crate::rng::seeded;
    use crate::time::Timestamp;
    use alloc::string::String;

    fn scene(w: usize, h: usize) -> RasterScene {
        let grid = GeoTransform::north_up(0.0, 0.0, 1.0, -1.0).unwrap();
        let chans = BandMode::ThreeBand.channels().to_vec();
        let planes = chans
            .iter()
            .enumerate()
            .map(|(k, _)| (0..w * h).map(|i| ((i * (k + 3)) % 97) as f32 / 100.0).collect())
            .collect();
        RasterScene::new(w, h, chans, planes, grid, "EPSG:5070", Timestamp(0)).unwrap()
    }

    fn blob_mask(w: usize, h: usize) -> BitMask {
        let mut m = BitMask::zeros(w, h, GeoTransform::north_up(0.0, 0.0, 1.0, -1.0).unwrap());
        for r in 10..20 {
            for c in 10..20 {
                m.set(r, c, true);
            }
        }
        m
    }

    fn cfg(size: usize) -> CropConfig {
        CropConfig { size, ..CropConfig::default() }
    }

    #[test]
    fn nine_positive_six_negative() {
        let s = scene(120, 120);
        let crops = sample_crops(&s, &blob_mask(120, 120), "b", &cfg(30), &mut seeded(1)).unwrap();
        assert_eq!(crops.len(), 15);
        assert_eq!(crops.iter().filter(|c| c.positive).count(), 9);
        for c in &crops {
            assert_eq!(c.positive, c.label.any());
            assert_eq!(c.channels, BandMode::OneBand.channels());
        }
    }

    #[test]
    fn empty_mask_gives_only_negatives() {
        let s = scene(100, 100);
        let m = BitMask::zeros(100, 100, s.transform);
        let crops = sample_crops(&s, &m, "b", &cfg(30), &mut seeded(2)).unwrap();
        assert_eq!(crops.len(), 15);
        assert!(crops.iter().all(|c| !c.positive));
    }

    #[test]
    fn deterministic_and_unique_origins() {
        let s = scene(90, 90);
        let m = blob_mask(90, 90);
        let ids = |seed| -> Vec<String> {
            sample_crops(&s, &m, "b", &cfg(30), &mut seeded(seed))
                .unwrap()
                .into_iter()
                .map(|c| c.id)
                .collect()
        };
        let a = ids(7);
        assert_eq!(a, ids(7));
        let mut origins: Vec<&str> = a.iter().map(|id| id.rsplit_once('_').unwrap().0).collect();
        origins.sort();
        origins.dedup();
        assert_eq!(origins.len(), a.len());
    }

    #[test]
    fn crop_contents_match_source() {
        let s = scene(64, 64);
        let m = blob_mask(64, 64);
        for c in sample_crops(&s, &m, "b", &cfg(16), &mut seeded(3)).unwrap() {
            let parts: Vec<&str> = c.id.split('_').collect();
            let row0: usize = parts[1][1..].parse().unwrap();
            let col0: usize = parts[2][1..].parse().unwrap();
            let red = s.plane(ChannelId::Red).unwrap();
            assert_eq!(c.plane(0)[5 * 16 + 7], red[(row0 + 5) * 64 + col0 + 7]);
            assert_eq!(c.label.get(3, 4), m.get(row0 + 3, col0 + 4));
        }
    }

    #[test]
    fn shortfall_reduces_count() {
        // Every 30x30 window of a 40x40 scene touches the central blob.
        let s = scene(40, 40);
        let mut m = BitMask::zeros(40, 40, s.transform);
        m.set(20, 20, true);
        let crops = sample_crops(&s, &m, "b", &cfg(30), &mut seeded(4)).unwrap();
        assert!(crops.iter().all(|c| c.positive));
        assert_eq!(crops.len(), 9);
    }

    #[test]
    fn small_scene_is_bounds_error() {
        let s = scene(20, 20);
        let m = BitMask::zeros(20, 20, s.transform);
        assert!(matches!(sample_crops(&s, &m, "b", &cfg(30), &mut seeded(0)), Err(Error::Bounds(_))));
    }
}
