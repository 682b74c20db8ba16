//! Georeferenced data types and file I/O shared by every other module.
//!
//! All types are immutable after construction and safe to share across
//! threads; I/O is single-writer per path.

pub mod geojson;
pub mod geom;
pub mod pgrd;
mod raster;
mod vector;

pub use pgrd::{read_raster, write_raster, AnyRaster};
pub use raster::{AffineGeoref, Raster};
pub use vector::{
    AnnotatedPoint, GridLayout, PointAnnotations, Polarity, PolygonGeom, Polyline, PolylineSet,
    Provenance,
};
