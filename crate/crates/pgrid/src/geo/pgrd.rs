//! PGRD raster container: a minimal little-endian binary format with a fixed
//! 77-byte header and a channel-planar row-major payload.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                                                    |
//! |-------:|-----:|----------------------------------------------------------|
//! |      0 |    4 | magic `"PGRD"`                                           |
//! |      4 |    1 | version, currently 1                                     |
//! |      5 |    1 | dtype: 0 = uint8, 1 = float32                            |
//! |      6 |    2 | channels (u16)                                           |
//! |      8 |    4 | width (u32)                                              |
//! |     12 |    4 | height (u32)                                             |
//! |     16 |   48 | affine, 6 x f64: origin_x, px_w, rot_x, origin_y, rot_y, px_h |
//! |     64 |    4 | epsg (u32)                                               |
//! |     68 |    1 | nodata flag                                              |
//! |     69 |    8 | nodata value (f64, must be 0.0 when flag is 0)           |
//! |     77 |    — | payload, width*height*channels*dtype_size bytes          |
//!
//! Encode/decode round-trips are bit-exact in both directions.

use std::fs;
use std::path::Path;

use crate::error::{PgridError, Result};
use crate::geo::{AffineGeoref, Raster};

pub const MAGIC: [u8; 4] = *b"PGRD";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 77;

/// Payload element types the container can carry.
pub trait PgrdScalar: Copy {
    const DTYPE: u8;
    const SIZE: usize;
    const NAME: &'static str;

    fn put(self, out: &mut Vec<u8>);
    fn take(bytes: &[u8]) -> Self;
}

impl PgrdScalar for u8 {
    const DTYPE: u8 = 0;
    const SIZE: usize = 1;
    const NAME: &'static str = "uint8";

    fn put(self, out: &mut Vec<u8>) {
        out.push(self);
    }

    fn take(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

impl PgrdScalar for f32 {
    const DTYPE: u8 = 1;
    const SIZE: usize = 4;
    const NAME: &'static str = "float32";

    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn take(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

/// A decoded raster whose element type was chosen by the file's dtype field.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyRaster {
    U8(Raster<u8>),
    F32(Raster<f32>),
}

impl AnyRaster {
    pub fn dtype_name(&self) -> &'static str {
        match self {
            AnyRaster::U8(_) => u8::NAME,
            AnyRaster::F32(_) => f32::NAME,
        }
    }

    pub fn expect_f32(self) -> Result<Raster<f32>> {
        match self {
            AnyRaster::F32(r) => Ok(r),
            AnyRaster::U8(_) => Err(PgridError::DtypeMismatch {
                expected: f32::NAME,
                found: u8::NAME,
            }),
        }
    }

    pub fn expect_u8(self) -> Result<Raster<u8>> {
        match self {
            AnyRaster::U8(r) => Ok(r),
            AnyRaster::F32(_) => Err(PgridError::DtypeMismatch {
                expected: u8::NAME,
                found: f32::NAME,
            }),
        }
    }

    /// Widen to f64 for the numeric core (uint8 values are kept as counts,
    /// not rescaled).
    pub fn to_f64(&self) -> Raster<f64> {
        match self {
            AnyRaster::U8(r) => r.map(|v| v as f64),
            AnyRaster::F32(r) => r.map(|v| v as f64),
        }
    }
}

pub fn encode<T: PgrdScalar>(raster: &Raster<T>) -> Vec<u8> {
    let payload_len = raster.data().len() * T::SIZE;
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(T::DTYPE);
    out.extend_from_slice(&(raster.channels() as u16).to_le_bytes());
    out.extend_from_slice(&(raster.width() as u32).to_le_bytes());
    out.extend_from_slice(&(raster.height() as u32).to_le_bytes());
    let g = raster.georef();
    for v in [g.origin_x, g.px_w, g.rot_x, g.origin_y, g.rot_y, g.px_h] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&g.epsg.to_le_bytes());
    match raster.nodata() {
        Some(v) => {
            out.push(1);
            out.extend_from_slice(&v.to_le_bytes());
        }
        None => {
            out.push(0);
            out.extend_from_slice(&0.0f64.to_le_bytes());
        }
    }
    debug_assert_eq!(out.len(), HEADER_LEN);
    for &v in raster.data() {
        v.put(&mut out);
    }
    out
}

fn need(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    if bytes.len() < offset + len {
        return Err(PgridError::Truncated {
            offset,
            needed: offset + len - bytes.len(),
            available: bytes.len().saturating_sub(offset),
        });
    }
    Ok(&bytes[offset..offset + len])
}

fn f64_at(bytes: &[u8], offset: usize) -> Result<f64> {
    let b = need(bytes, offset, 8)?;
    Ok(f64::from_le_bytes(b.try_into().unwrap()))
}

pub fn decode(bytes: &[u8]) -> Result<AnyRaster> {
    let magic = need(bytes, 0, 4)?;
    if magic != MAGIC {
        return Err(PgridError::BadMagic {
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = need(bytes, 4, 1)?[0];
    if version != VERSION {
        return Err(PgridError::UnsupportedVersion { found: version });
    }
    let dtype = need(bytes, 5, 1)?[0];
    let channels = u16::from_le_bytes(need(bytes, 6, 2)?.try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(need(bytes, 8, 4)?.try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(need(bytes, 12, 4)?.try_into().unwrap()) as usize;
    let georef = AffineGeoref {
        origin_x: f64_at(bytes, 16)?,
        px_w: f64_at(bytes, 24)?,
        rot_x: f64_at(bytes, 32)?,
        origin_y: f64_at(bytes, 40)?,
        rot_y: f64_at(bytes, 48)?,
        px_h: f64_at(bytes, 56)?,
        epsg: u32::from_le_bytes(need(bytes, 64, 4)?.try_into().unwrap()),
    };
    let nodata_flag = need(bytes, 68, 1)?[0];
    let nodata_value = f64_at(bytes, 69)?;
    let nodata = match nodata_flag {
        0 => {
            if nodata_value != 0.0 {
                return Err(PgridError::MalformedNodata {
                    value: nodata_value,
                });
            }
            None
        }
        _ => Some(nodata_value),
    };

    let count = width * height * channels;
    match dtype {
        0 => {
            let payload = need(bytes, HEADER_LEN, count * u8::SIZE)?;
            finish_decode::<u8>(bytes, payload, width, height, channels, georef, nodata)
                .map(AnyRaster::U8)
        }
        1 => {
            let payload = need(bytes, HEADER_LEN, count * f32::SIZE)?;
            finish_decode::<f32>(bytes, payload, width, height, channels, georef, nodata)
                .map(AnyRaster::F32)
        }
        code => Err(PgridError::UnsupportedDtype { code }),
    }
}

fn finish_decode<T: PgrdScalar>(
    bytes: &[u8],
    payload: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    georef: AffineGeoref,
    nodata: Option<f64>,
) -> Result<Raster<T>> {
    let expected = HEADER_LEN + payload.len();
    if bytes.len() != expected {
        return Err(PgridError::TrailingBytes {
            expected,
            actual: bytes.len(),
        });
    }
    let data: Vec<T> = payload.chunks_exact(T::SIZE).map(T::take).collect();
    let mut raster = Raster::from_data(width, height, channels, data, georef)?;
    raster.set_nodata(nodata);
    Ok(raster)
}

pub fn write_raster<T: PgrdScalar>(raster: &Raster<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(raster)).map_err(|e| PgridError::io(path, e))
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<AnyRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PgridError::io(path, e))?;
    decode(&bytes)
}
