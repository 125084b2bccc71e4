use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::BitMask;

/// Simulated annotation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Dilation by a disk of radius `r` pixels.
    Dilate(usize),
    /// Translation by `(dx, dy)` pixels (columns, rows) with zero fill.
    Shift(i64, i64),
    /// Removes each 8-connected component with probability `p`.
    DropPlume(f64),
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseKind::DropPlume(p) if !(0.0..=1.0).contains(&p) => {
                Err(Error::Config(alloc::format!("drop probability {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// 8-connected component labels (0 for background, 1.. per component) and
/// the number of components. Components are numbered in raster order of
/// their first pixel.
pub fn connected_components(mask: &BitMask) -> (Vec<u32>, u32) {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut labels = vec![0u32; w * h];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if bits[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    let j = nr * w + nc;
                    if bits[j] == 1 && labels[j] == 0 {
                        labels[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

fn dilate(mask: &BitMask, r: usize) -> BitMask {
    if r == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let ri = r as isize;
    let offsets: Vec<(isize, isize)> = (-ri..=ri)
        .flat_map(|dy| (-ri..=ri).map(move |dx| (dy, dx)))
        .filter(|(dy, dx)| dy * dy + dx * dx <= ri * ri)
        .collect();
    let mut out = BitMask::zeros(w, h, mask.transform);
    for row in 0..h {
        for col in 0..w {
            if !mask.get(row, col) {
                continue;
            }
            for &(dy, dx) in &offsets {
                let (y, x) = (row as isize + dy, col as isize + dx);
                if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                    out.set(y as usize, x as usize, true);
                }
            }
        }
    }
    out
}

fn shift(mask: &BitMask, dx: i64, dy: i64) -> BitMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = BitMask::zeros(mask.width(), mask.height(), mask.transform);
    for row in 0..h {
        for col in 0..w {
            let (sr, sc) = (row - dy, col - dx);
            if sr >= 0 && sc >= 0 && sr < h && sc < w && mask.get(sr as usize, sc as usize) {
                out.set(row as usize, col as usize, true);
            }
        }
    }
    out
}

/// Applies one kind of label noise. Only `DropPlume` consumes randomness:
/// one uniform draw per component, in component order.
pub fn inject_label_noise<R: Rng + ?Sized>(mask: &BitMask, kind: NoiseKind, rng: &mut R) -> Result<BitMask> {
    kind.validate()?;
    Ok(match kind {
        NoiseKind::None => mask.clone(),
        NoiseKind::Dilate(r) => dilate(mask, r),
        NoiseKind::Shift(dx, dy) => shift(mask, dx, dy),
        NoiseKind::DropPlume(p) => {
            let (labels, n) = connected_components(mask);
            let keep: Vec<bool> = (0..n).map(|_| rng.random::<f64>() >= p).collect();
            let bits = labels
                .iter()
                .map(|&l| u8::from(l > 0 && keep[l as usize - 1]))
                .collect();
            BitMask::from_bits(mask.width(), mask.height(), bits, mask.transform)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_mask(w: usize, h: usize, seed: u64, density: f64) -> BitMask {
        let mut rng = seeded(seed);
        let bits = (0..w * h).map(|_| u8::from(rng.random::<f64>() < density)).collect();
        BitMask::from_bits(w, h, bits, GeoTransform::north_up(0.0, 0.0, 1.0, -1.0).unwrap()).unwrap()
    }

    #[test]
    fn dilate_zero_is_identity() {
        let m = random_mask(20, 15, 1, 0.2);
        assert_eq!(inject_label_noise(&m, NoiseKind::Dilate(0), &mut seeded(0)).unwrap(), m);
    }

    #[test]
    fn dilate_single_pixel_is_a_disk() {
        let mut m = random_mask(11, 11, 0, 0.0);
        m.set(5, 5, true);
        let d = inject_label_noise(&m, NoiseKind::Dilate(2), &mut seeded(0)).unwrap();
        // Lattice points with dx^2 + dy^2 <= 4.
        assert_eq!(d.count_ones(), 13);
        assert!(d.get(3, 5) && d.get(4, 4) && !d.get(3, 4));
    }

    #[test]
    fn drop_all_and_none() {
        let m = random_mask(30, 30, 4, 0.1);
        assert!(!inject_label_noise(&m, NoiseKind::DropPlume(1.0), &mut seeded(0)).unwrap().any());
        assert_eq!(inject_label_noise(&m, NoiseKind::DropPlume(0.0), &mut seeded(0)).unwrap(), m);
        assert!(inject_label_noise(&m, NoiseKind::DropPlume(1.5), &mut seeded(0)).is_err());
    }

    #[test]
    fn components_use_eight_connectivity() {
        let mut m = random_mask(4, 4, 0, 0.0);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(3, 3, true);
        let (labels, n) = connected_components(&m);
        assert_eq!(n, 2);
        assert_eq!(labels[0], labels[5]);
        assert_ne!(labels[0], labels[15]);
    }

    #[test]
    fn dropped_output_is_union_of_whole_components() {
        let m = random_mask(40, 40, 9, 0.08);
        let out = inject_label_noise(&m, NoiseKind::DropPlume(0.5), &mut seeded(2)).unwrap();
        let (labels, n) = connected_components(&m);
        for comp in 1..=n {
            let states: Vec<bool> = (0..1600).filter(|&i| labels[i] == comp).map(|i| out.bits()[i] == 1).collect();
            assert!(states.iter().all(|&s| s == states[0]));
        }
        assert!(out.is_subset_of(&m));
    }

    proptest! {
        #[test]
        fn dilation_is_monotone(seed in 0u64..1000, r in 0usize..4) {
            let m = random_mask(17, 13, seed, 0.1);
            let d = inject_label_noise(&m, NoiseKind::Dilate(r), &mut seeded(0)).unwrap();
            prop_assert!(m.is_subset_of(&d));
        }

        #[test]
        fn shift_round_trip_away_from_border(seed in 0u64..1000, dx in -4i64..5, dy in -4i64..5) {
            let (w, h) = (20usize, 16usize);
            let m = random_mask(w, h, seed, 0.3);
            let mut rng = seeded(0);
            let there = inject_label_noise(&m, NoiseKind::Shift(dx, dy), &mut rng).unwrap();
            let back = inject_label_noise(&there, NoiseKind::Shift(-dx, -dy), &mut rng).unwrap();
            let (ax, ay) = (dx.unsigned_abs() as usize, dy.unsigned_abs() as usize);
            for r in 0..h {
                for c in 0..w {
                    let interior = r >= ay && r + ay < h && c >= ax && c + ax < w;
                    if interior {
                        prop_assert_eq!(back.get(r, c), m.get(r, c));
                    } else if back.get(r, c) {
                        prop_assert!(m.get(r, c));
                    }
                }
            }
        }
    }
}
