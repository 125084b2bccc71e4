//! Wildfire smoke plume segmentation toolkit: algorithmic core.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (an allocator is required). File formats, the CLI
//! and plotting live in the `plumeseg` companion crate.
//!
//! Module map:
//!
//! - [`raster`]: multi-band scenes, georeferencing, compositing, cropping,
//!   nearest-neighbour resampling and band stacking.
//! - [`annotations`]: plume polygons, time matching, point-in-polygon and
//!   pixel-center rasterization into [`mask::BitMask`]s.
//! - [`dataset`]: crop sampling, group-aware splitting, normalization,
//!   synthetic scenes and label-noise injection.
//! - [`nn`]: a small tensor engine with analytic backward passes, Adam, the
//!   step learning-rate schedule and the U-Net builder.
//! - [`training`]: the training loop with BCE/MAE and drop-highest-loss.
//! - [`evaluation`]: thresholding, Dice, tiled scene prediction, confusion.
//! - [`panelfe`]: station-day panel construction and the within estimator.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod annotations;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod mask;
pub mod nn;
pub mod panelfe;
pub mod raster;
pub mod rng;
pub mod time;
pub mod training;

pub use error::{Error, Result};
