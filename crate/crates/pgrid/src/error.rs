//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PgridError>;

#[derive(Debug, Error)]
pub enum PgridError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic at offset 0: expected \"PGRD\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported container version {found} at offset 4 (expected 1)")]
    UnsupportedVersion { found: u8 },

    #[error("unsupported dtype code {code} at offset 5 (expected 0=uint8 or 1=float32)")]
    UnsupportedDtype { code: u8 },

    #[error("truncated payload at offset {offset}: needed {needed} more bytes, found {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("trailing garbage: file has {actual} bytes, container ends at {expected}")]
    TrailingBytes { expected: usize, actual: usize },

    #[error("nodata flag is 0 at offset 68 but value field is {value} (expected 0.0)")]
    MalformedNodata { value: f64 },

    #[error("raster dtype mismatch: expected {expected}, file holds {found}")]
    DtypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("georef is singular: |det| = {det:e} for linear part [[{px_w}, {rot_x}], [{rot_y}, {px_h}]]")]
    SingularGeoref {
        px_w: f64,
        rot_x: f64,
        rot_y: f64,
        px_h: f64,
        det: f64,
    },

    #[error("raster shape mismatch: data length {data_len} != {width}x{height}x{channels}")]
    RasterShape {
        width: usize,
        height: usize,
        channels: usize,
        data_len: usize,
    },

    #[error("expected a {expected} raster, got {found}")]
    RasterKind {
        expected: &'static str,
        found: String,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: not a FeatureCollection (type = {found})")]
    NotFeatureCollection { path: String, found: String },

    #[error("mixed geometry types in one layer: expected {expected}, offending feature ids: {offending:?}")]
    MixedGeometry {
        expected: &'static str,
        offending: Vec<u64>,
    },

    #[error("duplicate feature id {id}")]
    DuplicateId { id: u64 },

    #[error("polyline {id} invalid: {reason}")]
    InvalidPolyline { id: u64, reason: String },

    #[error("point {id} invalid: {reason}")]
    InvalidPoint { id: u64, reason: String },

    #[error("point {id} at pixel ({col}, {row}) lies outside the {width}x{height} raster")]
    PointOutOfBounds {
        id: u64,
        col: i64,
        row: i64,
        width: usize,
        height: usize,
    },

    #[error("watershed seed {id} at ({col}, {row}) lies outside the region mask")]
    SeedOutsideMask { id: usize, col: usize, row: usize },

    #[error("watershed seeds {a} and {b} share pixel ({col}, {row})")]
    DuplicateSeed {
        a: usize,
        b: usize,
        col: usize,
        row: usize,
    },

    #[error("topography contains a non-finite value at ({col}, {row})")]
    NonFiniteTopography { col: usize, row: usize },

    #[error("skeleton input is not thin: 2x2 foreground block at ({col}, {row})")]
    NotThin { col: usize, row: usize },

    #[error("shape mismatch: {context}: {a} vs {b}")]
    ShapeMismatch {
        context: &'static str,
        a: String,
        b: String,
    },

    #[error("prediction {id} carries no confidence (required for average precision)")]
    MissingConfidence { id: u64 },

    #[error("coordinate system mismatch: epsg {a} vs epsg {b}")]
    CrsMismatch { a: u32, b: u32 },

    #[error("cell lattices differ: {reason}")]
    LatticeMismatch { reason: String },

    #[error("ground-truth lines (bbox {lines_bbox:?}) do not intersect the raster extent {raster_bbox:?}")]
    ExtentMismatch {
        lines_bbox: [f64; 4],
        raster_bbox: [f64; 4],
    },

    #[error("extent {width}m x {height}m too small for a single {min_span}m span")]
    ExtentTooSmall {
        width: f64,
        height: f64,
        min_span: f64,
    },

    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },
}

impl PgridError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        PgridError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        PgridError::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
