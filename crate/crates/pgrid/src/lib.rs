//! Reconstruction of power-distribution-grid layouts from overhead raster
//! imagery.
//!
//! The library detects electrical poles from point supervision, segments
//! electrical lines at patch level, evaluates both with distance-thresholded
//! metrics, and unifies the raster outputs into a georeferenced vector
//! layout. A built-in synthetic scene generator provides ground truth for
//! end-to-end verification; the `pgrid` binary exposes the whole pipeline as
//! subcommands.
//!
//! Module map:
//! - [`geo`] — rasters, the PGRD container, GeoJSON layers, affine georefs.
//! - [`rasterops`] — connected components, watershed, thinning, buffering,
//!   resampling, polygonization.
//! - [`poleloss`] — the point-supervised multi-component pole loss with
//!   analytic gradients.
//! - [`scorer`] — fixed convolutional feature bank + trainable per-pixel
//!   logistic head.
//! - [`lineseg`] — patch-scaled line segmentation (labels, loss, upsampling).
//! - [`metrics`] — strict/all distance matching, P/R/F1, average precision,
//!   buffered pixel metrics.
//! - [`unify`] — probability rasters to vectorized grid layout.
//! - [`coverage`] — grid-cell occupancy comparison against external layouts.
//! - [`synth`] — deterministic synthetic overhead scenes with ground truth.

pub mod coverage;
pub mod error;
pub mod geo;
pub mod lineseg;
pub mod metrics;
pub mod poleloss;
pub mod rasterops;
pub mod scalar;
pub mod scorer;
pub mod synth;
pub mod unify;

pub use error::{PgridError, Result};
pub use scalar::Real;

use geo::Raster;

/// Concrete raster aliases. The pipeline computes in f64 and stores imagery
/// and probability maps as f32 (the PGRD payload type).
pub type RasterU8 = Raster<u8>;
pub type RasterF32 = Raster<f32>;
pub type RasterF64 = Raster<f64>;
/// Label rasters from connected components / watershed (0 = background).
pub type LabelRaster = Raster<u32>;
