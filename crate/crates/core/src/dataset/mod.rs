//! Training corpus construction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::nn::Tensor;
use crate::raster::ChannelId;

mod crops;
mod noise;
mod split;
pub mod synth;

pub use crops::{sample_crops, CropConfig};
pub use noise::{connected_components, inject_label_noise, NoiseKind};
pub use split::{group_split, Split, SplitManifest};
pub use synth::{generate_synthetic, Plume, SynthConfig, SyntheticScene};

/// One training/evaluation unit: stacked input planes, label, and the
/// identity of the scene it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub base_id: String,
    pub channels: Vec<ChannelId>,
    pub size: usize,
    /// `channels.len() * size * size` values, channel-major.
    pub input: Vec<f32>,
    pub label: BitMask,
    pub positive: bool,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        base_id: impl Into<String>,
        channels: Vec<ChannelId>,
        input: Vec<f32>,
        label: BitMask,
    ) -> Result<Self> {
        let size = label.width();
        if label.height() != size {
            return Err(Error::Shape(format!(
                "label must be square, got {}x{}",
                label.width(),
                label.height()
            )));
        }
        if input.len() != channels.len() * size * size {
            return Err(Error::Shape(format!(
                "{} input values for {} channels of {size}x{size}",
                input.len(),
                channels.len()
            )));
        }
        let positive = label.any();
        Ok(Self {
            id: id.into(),
            base_id: base_id.into(),
            channels,
            size,
            input,
            label,
            positive,
        })
    }

    pub fn input_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec([1, self.channels.len(), self.size, self.size], self.input.clone())
            .expect("validated at construction")
    }

    pub fn label_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec([1, 1, self.size, self.size], self.label.to_plane()).expect("square label")
    }

    pub fn plane(&self, k: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.input[k * n..(k + 1) * n]
    }
}

/// Per-channel min-max ranges.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormStats {
    ranges: BTreeMap<ChannelId, (f32, f32)>,
}

impl NormStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, channel: ChannelId, lo: f32, hi: f32) -> Result<Self> {
        self.set(channel, lo, hi)?;
        Ok(self)
    }

    pub fn set(&mut self, channel: ChannelId, lo: f32, hi: f32) -> Result<()> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Stats(format!("{channel}: lo {lo} must be below hi {hi}")));
        }
        self.ranges.insert(channel, (lo, hi));
        Ok(())
    }

    pub fn get(&self, channel: ChannelId) -> Option<(f32, f32)> {
        self.ranges.get(&channel).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChannelId, (f32, f32))> + '_ {
        self.ranges.iter().map(|(c, r)| (*c, *r))
    }

    /// Fixed physical ranges: reflectances over `[0, 1.3]`, brightness
    /// temperatures in kelvin, optical thickness over `[0, 2]`.
    pub fn physical() -> Self {
        let mut s = Self::new();
        for c in [ChannelId::Blue, ChannelId::Red, ChannelId::Veggie, ChannelId::GreenSynth] {
            s.ranges.insert(c, (0.0, 1.3));
        }
        s.ranges.insert(ChannelId::C07, (200.0, 400.0));
        s.ranges.insert(ChannelId::C11, (180.0, 330.0));
        s.ranges.insert(ChannelId::Aot, (0.0, 2.0));
        s
    }

    fn range_for(&self, channel: ChannelId) -> Result<(f32, f32)> {
        let (lo, hi) = self
            .get(channel)
            .ok_or_else(|| Error::Stats(format!("no range for channel {channel}")))?;
        if !(lo < hi) {
            return Err(Error::Stats(format!("{channel}: lo {lo} must be below hi {hi}")));
        }
        Ok((lo, hi))
    }

    /// Maps `plane` of `channel` into `[0, 1]` in place.
    pub fn apply(&self, channel: ChannelId, plane: &mut [f32]) -> Result<()> {
        let (lo, hi) = self.range_for(channel)?;
        let span = hi - lo;
        for v in plane {
            *v = ((*v - lo) / span).clamp(0.0, 1.0);
        }
        Ok(())
    }
}

/// Min-max scales every channel of `sample` and clamps to `[0, 1]`.
pub fn normalize(sample: &Sample, stats: &NormStats) -> Result<Sample> {
    let mut out = sample.clone();
    let n = sample.size * sample.size;
    for (k, &c) in sample.channels.iter().enumerate() {
        stats.apply(c, &mut out.input[k * n..(k + 1) * n])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use crate::rng::seeded;
    use alloc::vec;
    use rand::Rng;

    fn grid() -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    fn sample(values: Vec<f32>) -> Sample {
        let size = 2;
        let c = values.len() / 4;
        let chans = [ChannelId::Red, ChannelId::C07, ChannelId::Aot][..c].to_vec();
        Sample::new("s", "b", chans, values, BitMask::zeros(size, size, grid())).unwrap()
    }

    #[test]
    fn endpoints_and_clamping() {
        let stats = NormStats::new().with(ChannelId::Red, 0.2, 0.6).unwrap();
        let s = normalize(&sample(vec![0.2, 0.6, 0.0, 1.0]), &stats).unwrap();
        assert_eq!(s.input, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn bad_stats_rejected() {
        assert!(matches!(NormStats::new().with(ChannelId::Red, 1.0, 1.0), Err(Error::Stats(_))));
        let stats = NormStats::new().with(ChannelId::Red, 0.0, 1.0).unwrap();
        let s = sample(vec![0.1; 8]);
        assert!(matches!(normalize(&s, &stats), Err(Error::Stats(_))));
    }

    #[test]
    fn inverse_map_recovers_clamped_values() {
        let stats = NormStats::physical();
        let mut rng = seeded(5);
        let values: Vec<f32> = (0..12)
            .map(|i| match i / 4 {
                0 => rng.random_range(-0.2..1.5),
                1 => rng.random_range(150.0..450.0),
                _ => rng.random_range(-0.5..2.5),
            })
            .collect();
        let s = sample(values.clone());
        let out = normalize(&s, &stats).unwrap();
        for (k, c) in s.channels.iter().enumerate() {
            let (lo, hi) = stats.get(*c).unwrap();
            for j in 0..4 {
                let x = out.input[k * 4 + j];
                assert!((0.0..=1.0).contains(&x));
                let back = lo + x * (hi - lo);
                let expect = values[k * 4 + j].clamp(lo, hi);
                assert!((back - expect).abs() <= 1e-6 * (hi - lo).max(1.0), "{back} vs {expect}");
            }
        }
    }

    #[test]
    fn positive_flag_follows_label() {
        let mut m = BitMask::zeros(2, 2, grid());
        m.set(1, 0, true);
        let s = Sample::new("a", "b", vec![ChannelId::Red], vec![0.0; 4], m).unwrap();
        assert!(s.positive);
        assert!(Sample::new("a", "b", vec![ChannelId::Red], vec![0.0; 3], BitMask::zeros(2, 2, grid())).is_err());
    }
}
