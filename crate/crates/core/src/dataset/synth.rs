//! Synthetic scenes: smooth background texture, anisotropic Gaussian smoke
//! plumes with a thermal hotspot at the upwind end, and bright clouds that
//! never enter the label.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::noise::{inject_label_noise, NoiseKind};
use crate::annotations::Point;
use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::raster::{ChannelId, GeoTransform, RasterScene, REFLECTANCE_CEILING};
use crate::rng::seeded;
use crate::time::Timestamp;

/// Plume intensity above which a pixel is labeled smoke.
pub const LABEL_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Inclusive bounds.
    pub plume_count: (usize, usize),
    pub plume_intensity: (f64, f64),
    /// Standard deviation along the plume axis, pixels.
    pub plume_sigma: (f64, f64),
    /// Cross-axis to along-axis sigma ratio.
    pub plume_aspect: (f64, f64),
    /// Inclusive bounds.
    pub cloud_count: (usize, usize),
    pub cloud_sigma: (f64, f64),
    pub cloud_albedo: (f64, f64),
    pub texture_seed: u64,
    /// Applied in order to produce `SyntheticScene::noisy_label`.
    pub noise: Vec<NoiseKind>,
    pub aot_blur_radius: usize,
    pub transform: GeoTransform,
    pub crs: String,
    pub timestamp: Timestamp,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            plume_count: (1, 3),
            plume_intensity: (0.35, 0.8),
            plume_sigma: (5.0, 12.0),
            plume_aspect: (0.35, 0.7),
            cloud_count: (0, 2),
            cloud_sigma: (3.0, 8.0),
            cloud_albedo: (0.4, 0.8),
            texture_seed: 0,
            noise: Vec::new(),
            aot_blur_radius: 3,
            transform: GeoTransform::north_up(0.0, 0.0, 2000.0, -2000.0).expect("valid grid"),
            crs: String::from("EPSG:5070"),
            timestamp: Timestamp(0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        let ok = self.width > 0
            && self.height > 0
            && self.plume_count.0 <= self.plume_count.1
            && self.cloud_count.0 <= self.cloud_count.1
            && ordered(self.plume_intensity)
            && ordered(self.plume_sigma)
            && self.plume_sigma.0 > 0.0
            && ordered(self.plume_aspect)
            && self.plume_aspect.0 > 0.0
            && ordered(self.cloud_sigma)
            && self.cloud_sigma.0 > 0.0
            && ordered(self.cloud_albedo);
        if !ok {
            return Err(Error::Config(alloc::format!("invalid synthetic config {self:?}")));
        }
        for n in &self.noise {
            n.validate()?;
        }
        self.transform.validate()
    }
}

/// Anisotropic Gaussian blob in pixel coordinates (column `cx`, row `cy`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plume {
    pub cx: f64,
    pub cy: f64,
    pub sigma_major: f64,
    pub sigma_minor: f64,
    /// Major-axis direction, radians from the column axis.
    pub theta: f64,
    pub intensity: f64,
}

impl Plume {
    /// Field value at fractional pixel position `(x, y)` = `(col, row)`.
    pub fn field(&self, x: f64, y: f64) -> f64 {
        let (s, c) = libm::sincos(self.theta);
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.sigma_major;
        let v = (-dx * s + dy * c) / self.sigma_minor;
        self.intensity * libm::exp(-0.5 * (u * u + v * v))
    }

    /// Fire location: upwind end of the major axis.
    pub fn source(&self) -> (f64, f64) {
        let (s, c) = libm::sincos(self.theta);
        (self.cx - 1.5 * self.sigma_major * c, self.cy - 1.5 * self.sigma_major * s)
    }

    /// Closed polygon in map coordinates approximating the `level` contour,
    /// or `None` when the peak does not exceed `level`.
    pub fn outline(&self, level: f64, vertices: usize, grid: &GeoTransform) -> Option<Vec<Point>> {
        if self.intensity <= level || vertices < 3 {
            return None;
        }
        let k = libm::sqrt(2.0 * libm::log(self.intensity / level));
        let (s, c) = libm::sincos(self.theta);
        let mut ring: Vec<Point> = (0..vertices)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / vertices as f64;
                let (u, v) = (k * self.sigma_major * libm::cos(a), k * self.sigma_minor * libm::sin(a));
                let (x, y) = (self.cx + u * c - v * s, self.cy + u * s + v * c);
                grid.map(y, x)
            })
            .collect();
        ring.push(ring[0]);
        Some(ring)
    }
}

/// Isotropic bright blob in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cloud {
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub albedo: f64,
}

impl Cloud {
    pub fn field(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        self.albedo * libm::exp(-0.5 * (dx * dx + dy * dy) / (self.sigma * self.sigma))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub scene: RasterScene,
    /// Pixels whose summed plume field exceeds [`LABEL_THRESHOLD`].
    pub label: BitMask,
    /// `label` after the configured noise kinds.
    pub noisy_label: BitMask,
    pub plumes: Vec<Plume>,
    pub clouds: Vec<Cloud>,
}

struct Wave {
    amp: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

/// Low-frequency texture in `[-1, 1]`.
fn texture(cfg: &SynthConfig) -> Vec<f64> {
    let mut rng = seeded(cfg.texture_seed);
    let waves: Vec<Wave> = (0..4)
        .map(|_| {
            let dir = rng.random_range(0.0..PI);
            let cycles = rng.random_range(0.5..2.5);
            Wave {
                amp: rng.random_range(0.3..1.0),
                kx: 2.0 * PI * cycles * libm::cos(dir) / cfg.width as f64,
                ky: 2.0 * PI * cycles * libm::sin(dir) / cfg.height as f64,
                phase: rng.random_range(0.0..2.0 * PI),
            }
        })
        .collect();
    let norm: f64 = waves.iter().map(|w| w.amp).sum();
    let mut out = Vec::with_capacity(cfg.width * cfg.height);
    for r in 0..cfg.height {
        for c in 0..cfg.width {
            let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
            let t: f64 = waves.iter().map(|w| w.amp * libm::sin(w.kx * x + w.ky * y + w.phase)).sum();
            out.push(t / norm);
        }
    }
    out
}

/// Mean over the clipped `(2r+1)^2` window.
fn box_blur(plane: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let pass = |src: &[f64], len: usize, count: usize, at: &dyn Fn(usize, usize) -> usize| {
        let mut out = alloc::vec![0.0; src.len()];
        for line in 0..count {
            for i in 0..len {
                let (lo, hi) = (i.saturating_sub(r), (i + r).min(len - 1));
                let s: f64 = (lo..=hi).map(|k| src[at(line, k)]).sum();
                out[at(line, i)] = s / (hi - lo + 1) as f64;
            }
        }
        out
    };
    let rows = pass(plane, w, h, &|line, k| line * w + k);
    pass(&rows, h, w, &|line, k| k * w + line)
}

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Summed plume field at each pixel center, row-major.
pub fn plume_field(plumes: &[Plume], width: usize, height: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
            out.push(plumes.iter().map(|p| p.field(x, y)).sum());
        }
    }
    out
}

/// Builds one synthetic scene. Plume and cloud geometry come from `rng`;
/// the background texture comes from `cfg.texture_seed`.
pub fn generate_synthetic<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<SyntheticScene> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let (wf, hf) = (w as f64, h as f64);

    let n_plumes = rng.random_range(cfg.plume_count.0..=cfg.plume_count.1);
    let plumes: Vec<Plume> = (0..n_plumes)
        .map(|_| {
            let sigma_major = draw(rng, cfg.plume_sigma);
            Plume {
                cx: draw(rng, (0.1 * wf, 0.9 * wf)),
                cy: draw(rng, (0.1 * hf, 0.9 * hf)),
                sigma_major,
                sigma_minor: sigma_major * draw(rng, cfg.plume_aspect),
                theta: draw(rng, (0.0, 2.0 * PI)),
                intensity: draw(rng, cfg.plume_intensity),
            }
        })
        .collect();
    let n_clouds = rng.random_range(cfg.cloud_count.0..=cfg.cloud_count.1);
    let clouds: Vec<Cloud> = (0..n_clouds)
        .map(|_| Cloud {
            cx: draw(rng, (0.0, wf)),
            cy: draw(rng, (0.0, hf)),
            sigma: draw(rng, cfg.cloud_sigma),
            albedo: draw(rng, cfg.cloud_albedo),
        })
        .collect();

    let tex = texture(cfg);
    let smoke = plume_field(&plumes, w, h);
    let label_bits: Vec<u8> = smoke.iter().map(|&p| u8::from(p > LABEL_THRESHOLD)).collect();
    let label = BitMask::from_bits(w, h, label_bits, cfg.transform)?;
    let label_f: Vec<f64> = label.bits().iter().map(|&b| b as f64).collect();
    let aot_signal = box_blur(&label_f, w, h, cfg.aot_blur_radius);

    let cap = REFLECTANCE_CEILING as f64;
    let mut planes: [Vec<f32>; 6] = Default::default();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
            let t = tex[i];
            let p = smoke[i];
            let cl: f64 = clouds.iter().map(|k| k.field(x, y)).sum();
            let heat: f64 = plumes
                .iter()
                .map(|pl| {
                    let (sx, sy) = pl.source();
                    let s = 0.35 * pl.sigma_minor + 1.0;
                    let d2 = (x - sx) * (x - sx) + (y - sy) * (y - sy);
                    25.0 * pl.intensity * libm::exp(-0.5 * d2 / (s * s))
                })
                .sum();
            planes[0].push((0.08 + 0.03 * t + 0.45 * p + cl).clamp(0.0, cap) as f32);
            planes[1].push((0.10 + 0.05 * t + 0.55 * p + cl).clamp(0.0, cap) as f32);
            planes[2].push((0.25 + 0.10 * t + 0.30 * p + cl).clamp(0.0, cap) as f32);
            planes[3].push((295.0 + 6.0 * t + heat - 5.0 * cl) as f32);
            planes[4].push((275.0 + 6.0 * t - 45.0 * cl) as f32);
            planes[5].push((0.1 + 0.05 * (t + 1.0) + 0.8 * aot_signal[i]) as f32);
        }
    }
    let channels = alloc::vec![
        ChannelId::Blue,
        ChannelId::Red,
        ChannelId::Veggie,
        ChannelId::C07,
        ChannelId::C11,
        ChannelId::Aot,
    ];
    let scene = RasterScene::new(
        w,
        h,
        channels,
        planes.into_iter().collect(),
        cfg.transform,
        cfg.crs.clone(),
        cfg.timestamp,
    )?
    .composite_true_color()?;

    let mut noisy_label = label.clone();
    for &kind in &cfg.noise {
        noisy_label = inject_label_noise(&noisy_label, kind, rng)?;
    }
    Ok(SyntheticScene {
        scene,
        label,
        noisy_label,
        plumes,
        clouds,
    })
}
