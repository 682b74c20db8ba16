//! Georeferenced rasters and the affine pixel/world mapping.

use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::scalar::Real;

/// Six-parameter affine mapping from fractional pixel coordinates to world
/// meters, plus an EPSG code carried opaquely (0 = local Cartesian meters).
///
/// `px_h` is negative for north-up rasters: row indices grow southwards while
/// world y grows northwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineGeoref {
    pub origin_x: f64,
    pub origin_y: f64,
    /// Meters per pixel along the column axis.
    pub px_w: f64,
    /// Meters per pixel along the row axis (negative for north-up).
    pub px_h: f64,
    /// Row shear term, meters per pixel.
    pub rot_x: f64,
    /// Column shear term, meters per pixel.
    pub rot_y: f64,
    pub epsg: u32,
}

impl AffineGeoref {
    /// Identity mapping: 1 m pixels, north-up, local Cartesian.
    pub fn identity() -> Self {
        Self::north_up(0.0, 0.0, 1.0, 0)
    }

    /// Axis-aligned north-up georef with square pixels of `pixel_size` meters
    /// and the raster origin (top-left corner) at (`origin_x`, `origin_y`).
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64, epsg: u32) -> Self {
        AffineGeoref {
            origin_x,
            origin_y,
            px_w: pixel_size,
            px_h: -pixel_size,
            rot_x: 0.0,
            rot_y: 0.0,
            epsg,
        }
    }

    pub fn det(&self) -> f64 {
        self.px_w * self.px_h - self.rot_x * self.rot_y
    }

    pub fn validate(&self) -> Result<()> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(PgridError::SingularGeoref {
                px_w: self.px_w,
                rot_x: self.rot_x,
                rot_y: self.rot_y,
                px_h: self.px_h,
                det,
            });
        }
        Ok(())
    }

    /// Fractional pixel (col, row) to world (x, y) meters.
    #[inline]
    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_x + self.px_w * col + self.rot_x * row,
            self.origin_y + self.rot_y * col + self.px_h * row,
        )
    }

    /// World (x, y) meters to fractional pixel (col, row). Inverse of
    /// [`Self::pixel_to_world`]; requires a non-singular linear part.
    #[inline]
    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        let det = self.det();
        (
            (dx * self.px_h - dy * self.rot_x) / det,
            (dy * self.px_w - dx * self.rot_y) / det,
        )
    }

    /// World coordinates of the center of integer pixel (col, row).
    #[inline]
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        self.pixel_to_world(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Area of one pixel in square meters.
    pub fn pixel_area(&self) -> f64 {
        self.det().abs()
    }

    /// Representative linear pixel size in meters (sqrt of the pixel area).
    pub fn pixel_size(&self) -> f64 {
        self.pixel_area().sqrt()
    }
}

impl Default for AffineGeoref {
    fn default() -> Self {
        Self::identity()
    }
}

/// Georeferenced multi-channel raster with channel-planar row-major storage:
/// `data[c * w * h + row * w + col]`. Channel-planar keeps per-channel
/// morphology scans contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    channels: usize,
    georef: AffineGeoref,
    nodata: Option<f64>,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, channels: usize, value: T, georef: AffineGeoref) -> Self {
        Raster {
            width,
            height,
            channels,
            georef,
            nodata: None,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<T>,
        georef: AffineGeoref,
    ) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(PgridError::RasterShape {
                width,
                height,
                channels,
                data_len: data.len(),
            });
        }
        Ok(Raster {
            width,
            height,
            channels,
            georef,
            nodata: None,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn georef(&self) -> &AffineGeoref {
        &self.georef
    }

    pub fn set_georef(&mut self, georef: AffineGeoref) {
        self.georef = georef;
    }

    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }

    pub fn set_nodata(&mut self, nodata: Option<f64>) {
        self.nodata = nodata;
    }

    #[inline]
    pub fn idx(&self, channel: usize, row: usize, col: usize) -> usize {
        debug_assert!(channel < self.channels && row < self.height && col < self.width);
        (channel * self.height + row) * self.width + col
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> T {
        self.data[self.idx(channel, row, col)]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: T) {
        let i = self.idx(channel, row, col);
        self.data[i] = value;
    }

    /// Contiguous row-major view of one channel plane.
    pub fn channel(&self, channel: usize) -> &[T] {
        let plane = self.width * self.height;
        &self.data[channel * plane..(channel + 1) * plane]
    }

    pub fn channel_mut(&mut self, channel: usize) -> &mut [T] {
        let plane = self.width * self.height;
        &mut self.data[channel * plane..(channel + 1) * plane]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            georef: self.georef,
            nodata: self.nodata,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Empty raster with the same shape and georef, filled with `value`.
    pub fn like<U: Copy>(&self, value: U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            georef: self.georef,
            nodata: self.nodata,
            data: vec![value; self.data.len()],
        }
    }

    pub fn same_shape<U: Copy>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// World-space bounding box [min_x, min_y, max_x, max_y] of the raster
    /// extent (all four pixel corners considered, so shear is handled).
    pub fn world_bbox(&self) -> [f64; 4] {
        let corners = [
            self.georef.pixel_to_world(0.0, 0.0),
            self.georef.pixel_to_world(self.width as f64, 0.0),
            self.georef.pixel_to_world(0.0, self.height as f64),
            self.georef.pixel_to_world(self.width as f64, self.height as f64),
        ];
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, y) in corners {
            bbox[0] = bbox[0].min(x);
            bbox[1] = bbox[1].min(y);
            bbox[2] = bbox[2].max(x);
            bbox[3] = bbox[3].max(y);
        }
        bbox
    }
}

impl Raster<u8> {
    /// Checks the raster is a single-channel {0,1} mask.
    pub fn ensure_binary_mask(&self) -> Result<()> {
        if self.channels != 1 {
            return Err(PgridError::RasterKind {
                expected: "single-channel binary mask",
                found: format!("{} channels", self.channels),
            });
        }
        if let Some(&v) = self.data.iter().find(|&&v| v > 1) {
            return Err(PgridError::RasterKind {
                expected: "binary mask with values in {0,1}",
                found: format!("value {v}"),
            });
        }
        Ok(())
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

impl<F: Real> Raster<F> {
    pub fn to_f32(&self) -> Raster<f32> {
        self.map(|v| v.as_f64() as f32)
    }

    pub fn to_f64(&self) -> Raster<f64> {
        self.map(|v| v.as_f64())
    }

    /// Min/max over all channels. Returns None for empty rasters.
    pub fn min_max(&self) -> Option<(F, F)> {
        let mut it = self.data.iter();
        let first = *it.next()?;
        let mut mn = first;
        let mut mx = first;
        for &v in it {
            if v < mn {
                mn = v;
            }
            if v > mx {
                mx = v;
            }
        }
        Some((mn, mx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_pixel_to_world() {
        let g = AffineGeoref::identity();
        assert_eq!(g.pixel_to_world(3.0, 2.0), (3.0, -2.0));
    }

    #[test]
    fn offset_georef_pixel_to_world() {
        // origin (100, 500), 0.06 m pixels, north-up
        let g = AffineGeoref::north_up(100.0, 500.0, 0.06, 0);
        let (x, y) = g.pixel_to_world(10.0, 10.0);
        // hand arithmetic: 100 + 0.06*10 = 100.6; 500 - 0.06*10 = 499.4
        assert!((x - 100.6).abs() < 1e-12);
        assert!((y - 499.4).abs() < 1e-12);
    }

    #[test]
    fn world_pixel_round_trip_random() {
        let g = AffineGeoref {
            origin_x: 412.5,
            origin_y: -73.25,
            px_w: 0.06,
            px_h: -0.055,
            rot_x: 0.003,
            rot_y: -0.001,
            epsg: 32636,
        };
        g.validate().unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let col: f64 = rng.random_range(-1000.0..1000.0);
            let row: f64 = rng.random_range(-1000.0..1000.0);
            let (x, y) = g.pixel_to_world(col, row);
            let (c2, r2) = g.world_to_pixel(x, y);
            let (x2, y2) = g.pixel_to_world(c2, r2);
            assert!((x2 - x).abs() < 1e-9 && (y2 - y).abs() < 1e-9);
            assert!((c2 - col).abs() < 1e-6 && (r2 - row).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_georef_rejected() {
        let g = AffineGeoref {
            origin_x: 0.0,
            origin_y: 0.0,
            px_w: 1.0,
            px_h: 1.0,
            rot_x: 1.0,
            rot_y: 1.0,
            epsg: 0,
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn raster_layout_is_channel_planar() {
        let mut r = Raster::filled(3, 2, 2, 0u8, AffineGeoref::identity());
        r.set(1, 1, 2, 9);
        assert_eq!(r.data()[1 * 6 + 1 * 3 + 2], 9);
        assert_eq!(r.get(1, 1, 2), 9);
        assert_eq!(r.channel(0).len(), 6);
    }

    #[test]
    fn from_data_validates_length() {
        let err = Raster::from_data(4, 4, 1, vec![0u8; 15], AffineGeoref::identity());
        assert!(matches!(err, Err(PgridError::RasterShape { .. })));
    }
}
