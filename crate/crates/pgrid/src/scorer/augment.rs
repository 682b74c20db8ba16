//! Training-time augmentation: axis flips, quarter-turn rotations, and
//! channel-wise brightness gain, applied identically to rasters and to
//! annotation pixels so alignment is preserved.

use rand::Rng;

use crate::geo::Raster;
use crate::poleloss::PixelPoint;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub flip_h: bool,
    pub flip_v: bool,
    /// Counter-clockwise quarter turns, 0..=3.
    pub quarter_turns: u8,
    /// Multiplicative gain per source image channel.
    pub channel_gain: Vec<f64>,
}

impl Augmentation {
    pub fn identity(channels: usize) -> Self {
        Augmentation {
            flip_h: false,
            flip_v: false,
            quarter_turns: 0,
            channel_gain: vec![1.0; channels],
        }
    }

    /// Uniform flips and rotations, gains in [1 - jitter, 1 + jitter].
    pub fn sample<R: Rng>(rng: &mut R, channels: usize, jitter: f64) -> Self {
        Augmentation {
            flip_h: rng.random_bool(0.5),
            flip_v: rng.random_bool(0.5),
            quarter_turns: rng.random_range(0..4u8),
            channel_gain: (0..channels)
                .map(|_| rng.random_range(1.0 - jitter..=1.0 + jitter))
                .collect(),
        }
    }

    /// Coordinate transform for a pixel of a (width, height) grid; returns
    /// the new pixel and the transformed grid dimensions.
    pub fn map_pixel(&self, row: usize, col: usize, width: usize, height: usize) -> (usize, usize) {
        let (mut r, mut c) = (row, col);
        let (mut w, mut h) = (width, height);
        if self.flip_h {
            c = w - 1 - c;
        }
        if self.flip_v {
            r = h - 1 - r;
        }
        for _ in 0..self.quarter_turns {
            let (nr, nc) = (w - 1 - c, r);
            r = nr;
            c = nc;
            std::mem::swap(&mut w, &mut h);
        }
        (r, c)
    }

    pub fn map_dims(&self, width: usize, height: usize) -> (usize, usize) {
        if self.quarter_turns % 2 == 1 {
            (height, width)
        } else {
            (width, height)
        }
    }

    /// Applies the geometric transform to every channel and multiplies each
    /// output channel by `gain_of(channel)`.
    pub fn apply_raster<F: Real>(&self, src: &Raster<F>, gain_of: impl Fn(usize) -> f64) -> Raster<F> {
        let (w, h) = (src.width(), src.height());
        let (ow, oh) = self.map_dims(w, h);
        let mut out = Raster::filled(ow, oh, src.channels(), F::zero(), *src.georef());
        for ch in 0..src.channels() {
            let gain = F::of(gain_of(ch));
            let src_plane = src.channel(ch);
            let dst_plane = out.channel_mut(ch);
            for row in 0..h {
                for col in 0..w {
                    let (nr, nc) = self.map_pixel(row, col, w, h);
                    dst_plane[nr * ow + nc] = src_plane[row * w + col] * gain;
                }
            }
        }
        out
    }

    /// Geometric transform only, for binary label rasters.
    pub fn apply_mask(&self, src: &Raster<u8>) -> Raster<u8> {
        let (w, h) = (src.width(), src.height());
        let (ow, oh) = self.map_dims(w, h);
        let mut out = Raster::filled(ow, oh, src.channels(), 0u8, *src.georef());
        for ch in 0..src.channels() {
            let src_plane = src.channel(ch);
            let dst_plane = out.channel_mut(ch);
            for row in 0..h {
                for col in 0..w {
                    let (nr, nc) = self.map_pixel(row, col, w, h);
                    dst_plane[nr * ow + nc] = src_plane[row * w + col];
                }
            }
        }
        out
    }

    pub fn apply_points(&self, points: &[PixelPoint], width: usize, height: usize) -> Vec<PixelPoint> {
        points
            .iter()
            .map(|p| {
                let (row, col) = self.map_pixel(p.row, p.col, width, height);
                PixelPoint { id: p.id, row, col }
            })
            .collect()
    }
}
