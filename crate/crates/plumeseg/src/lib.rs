//! File formats, reporting and the pipeline commands around
//! `plumeseg-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod geojson;
pub mod grd;
pub mod svg;
pub mod tables;
pub mod timefmt;

pub use error::{AppError, Result};
