//! Allocation-only primitives for measuring localization hallucinations of
//! GUI agents.
//!
//! Everything here is pure: normalized-coordinate geometry, the four-way
//! response taxonomy, the Peak Sharpness Score over digit-token
//! distributions, crop planning for two-pass refinement, seeded scene
//! layout and compositing, and the statistics behind the report tables.
//! File formats, the CLI and PNG I/O live in the `glens` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod math;

pub mod cropgen;
pub mod geometry;
pub mod pss;
pub mod raster;
pub mod record;
pub mod scenegen;
pub mod stats;
pub mod taxonomy;

pub use cropgen::{plan_crop, remap_to_full, CropConfig, CropWindow};
pub use geometry::{contains, point_to_box_distance, BBox, PixelDims, Point};
pub use pss::{pss, DigitDistribution, PssConfig, PssResult};
pub use raster::Raster;
pub use taxonomy::{classify, ClassificationResult, ClassifierConfig, ResponseCategory};
