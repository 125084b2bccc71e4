//! Binary label and prediction masks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::{check_window, crop_plane, GeoTransform};

/// Row-major binary plane on a georeferenced grid. Every entry is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
    pub transform: GeoTransform,
}

impl BitMask {
    pub fn zeros(width: usize, height: usize, transform: GeoTransform) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
            transform,
        }
    }

    pub fn from_bits(
        width: usize,
        height: usize,
        bits: Vec<u8>,
        transform: GeoTransform,
    ) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::Data(format!("mask value {} at index {i}", bits[i])));
        }
        Ok(Self {
            width,
            height,
            bits,
            transform,
        })
    }

    /// Mask from a float plane holding exactly 0.0 or 1.0.
    pub fn from_plane(
        width: usize,
        height: usize,
        plane: &[f32],
        transform: GeoTransform,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(plane.len());
        for (i, &v) in plane.iter().enumerate() {
            bits.push(match v {
                0.0 => 0,
                1.0 => 1,
                _ => return Err(Error::Data(format!("mask value {v} at index {i}"))),
            });
        }
        Self::from_bits(width, height, bits, transform)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.bits[row * self.width + col] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b != 0)
    }

    pub fn to_plane(&self) -> Vec<f32> {
        self.bits.iter().map(|&b| f32::from(b)).collect()
    }

    pub fn same_shape(&self, other: &BitMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Shape(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Pixelwise OR.
    pub fn union(&self, other: &BitMask) -> Result<BitMask> {
        self.same_shape(other)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a | b)
            .collect();
        Ok(BitMask {
            bits,
            ..self.clone()
        })
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn crop_window(&self, row0: usize, col0: usize, size: usize) -> Result<BitMask> {
        check_window(self.width, self.height, row0, col0, size)?;
        Ok(BitMask {
            width: size,
            height: size,
            bits: crop_plane(&self.bits, self.width, row0, col0, size),
            transform: self.transform.translated(row0, col0),
        })
    }
}
