//! Morphological and geometric raster primitives.
//!
//! Everything here is a pure function of its inputs; callers may parallelize
//! over independent rasters or tiles without affecting results.

mod buffer;
mod components;
mod resample;
mod skeleton;
mod watershed;
mod polygonize;

pub use buffer::{
    buffer_polylines, rasterize_polygons, rasterize_polylines, stamp_polylines, vector_buffer,
};
pub use components::{connected_components, BlobLabels, BlobStats, Connectivity};
pub use polygonize::{polygonize, skeleton_to_polylines};
pub use resample::bilinear_resample;
pub use skeleton::{is_thin, skeletonize};
pub use watershed::{watershed, WatershedResult};

use crate::geo::Raster;
use crate::scalar::Real;

/// Binarizes one channel of a float raster at a threshold (>= is foreground).
pub fn threshold_mask<F: Real>(raster: &Raster<F>, channel: usize, threshold: f64) -> Raster<u8> {
    let th = F::of(threshold);
    let (w, h) = (raster.width(), raster.height());
    let mut out = Raster::filled(w, h, 1, 0u8, *raster.georef());
    let plane = raster.channel(channel);
    let data = out.channel_mut(0);
    for (o, &v) in data.iter_mut().zip(plane.iter()) {
        *o = u8::from(v >= th);
    }
    out
}
