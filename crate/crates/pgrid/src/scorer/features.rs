//! Fixed convolutional feature bank. Kernels are never trained.
//!
//! Per input channel, in this order: raw value, Gaussian blurs at sigma 1, 2
//! and 4 px, Sobel gradient magnitude, and local standard deviation over a
//! 5x5 window. Borders use mirror padding (no edge repeat). Every feature is
//! positively homogeneous in its source channel, which lets brightness
//! augmentation act directly on feature planes.

use crate::geo::Raster;
use crate::scalar::Real;

/// Features produced per input channel.
pub const FEATURES_PER_CHANNEL: usize = 6;
/// Bumped when the kernel set or ordering changes; stored in weight files.
pub const FEATURE_BANK_VERSION: u32 = 1;

pub const GAUSSIAN_SIGMAS: [f64; 3] = [1.0, 2.0, 4.0];

/// Mirror index without repeating the border sample; degenerate axes clamp.
#[inline]
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as i64 {
        j = period - j;
    }
    j as usize
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable convolution with the same 1D kernel along both axes.
fn separable_blur<F: Real>(plane: &[F], w: usize, h: usize, kernel: &[f64]) -> Vec<F> {
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![F::zero(); w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = F::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                let src = reflect(col as i64 + k as i64 - radius, w);
                acc = acc + F::of(kv) * plane[row * w + src];
            }
            tmp[row * w + col] = acc;
        }
    }
    let mut out = vec![F::zero(); w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = F::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                let src = reflect(row as i64 + k as i64 - radius, h);
                acc = acc + F::of(kv) * tmp[src * w + col];
            }
            out[row * w + col] = acc;
        }
    }
    out
}

fn sobel_magnitude<F: Real>(plane: &[F], w: usize, h: usize) -> Vec<F> {
    let mut out = vec![F::zero(); w * h];
    let at = |r: i64, c: i64| plane[reflect(r, h) * w + reflect(c, w)];
    for row in 0..h {
        let r = row as i64;
        for col in 0..w {
            let c = col as i64;
            let gx = at(r - 1, c + 1) + F::of(2.0) * at(r, c + 1) + at(r + 1, c + 1)
                - at(r - 1, c - 1)
                - F::of(2.0) * at(r, c - 1)
                - at(r + 1, c - 1);
            let gy = at(r + 1, c - 1) + F::of(2.0) * at(r + 1, c) + at(r + 1, c + 1)
                - at(r - 1, c - 1)
                - F::of(2.0) * at(r - 1, c)
                - at(r - 1, c + 1);
            out[row * w + col] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

fn local_std<F: Real>(plane: &[F], w: usize, h: usize) -> Vec<F> {
    let mut out = vec![F::zero(); w * h];
    let inv_n = F::of(1.0 / 25.0);
    for row in 0..h {
        for col in 0..w {
            let mut sum = F::zero();
            let mut sum2 = F::zero();
            for dr in -2i64..=2 {
                for dc in -2i64..=2 {
                    let v = plane[reflect(row as i64 + dr, h) * w + reflect(col as i64 + dc, w)];
                    sum = sum + v;
                    sum2 = sum2 + v * v;
                }
            }
            let mean = sum * inv_n;
            let var = (sum2 * inv_n - mean * mean).max(F::zero());
            out[row * w + col] = var.sqrt();
        }
    }
    out
}

/// Runs the bank over every input channel. Output has
/// `channels * FEATURES_PER_CHANNEL` planes; plane `c * 6 + k` derives from
/// input channel `c`.
pub fn extract_features<F: Real>(image: &Raster<F>) -> Raster<F> {
    let (w, h, channels) = (image.width(), image.height(), image.channels());
    let mut out = Raster::filled(
        w,
        h,
        channels * FEATURES_PER_CHANNEL,
        F::zero(),
        *image.georef(),
    );
    for c in 0..channels {
        let plane = image.channel(c);
        let base = c * FEATURES_PER_CHANNEL;
        out.channel_mut(base).copy_from_slice(plane);
        for (s, &sigma) in GAUSSIAN_SIGMAS.iter().enumerate() {
            let blurred = separable_blur(plane, w, h, &gaussian_kernel(sigma));
            out.channel_mut(base + 1 + s).copy_from_slice(&blurred);
        }
        out.channel_mut(base + 4)
            .copy_from_slice(&sobel_magnitude(plane, w, h));
        out.channel_mut(base + 5)
            .copy_from_slice(&local_std(plane, w, h));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::AffineGeoref;

    #[test]
    fn constant_image_has_flat_features() {
        let img = Raster::filled(16, 16, 2, 0.4f64, AffineGeoref::identity());
        let f = extract_features(&img);
        assert_eq!(f.channels(), 12);
        for c in 0..2 {
            let base = c * FEATURES_PER_CHANNEL;
            // raw + blurs equal the constant
            for k in 0..4 {
                assert!(f.channel(base + k).iter().all(|&v| (v - 0.4).abs() < 1e-12));
            }
            // gradient magnitude and std-dev vanish
            for k in 4..6 {
                assert!(f.channel(base + k).iter().all(|&v| v.abs() < 1e-9));
            }
        }
    }

    /// Independent oracle: the blur of an impulse is the normalized 2D kernel
    /// evaluated from the closed form.
    #[test]
    fn impulse_matches_gaussian_closed_form() {
        let mut img = Raster::filled(33, 33, 1, 0.0f64, AffineGeoref::identity());
        img.set(0, 16, 16, 1.0);
        let f = extract_features(&img);
        for (s, &sigma) in GAUSSIAN_SIGMAS.iter().enumerate() {
            let radius = (3.0 * sigma).ceil() as i64;
            let norm: f64 = (-radius..=radius)
                .map(|x| (-(x as f64).powi(2) / (2.0 * sigma * sigma)).exp())
                .sum();
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    let expected = (-(dr as f64).powi(2) / (2.0 * sigma * sigma)).exp()
                        * (-(dc as f64).powi(2) / (2.0 * sigma * sigma)).exp()
                        / (norm * norm);
                    let got = f.get(1 + s, (16 + dr) as usize, (16 + dc) as usize);
                    assert!(
                        (got - expected).abs() < 1e-12,
                        "sigma {sigma} at ({dr},{dc}): {got} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn feature_count_independent_of_size() {
        for (w, h) in [(8, 8), (31, 17), (64, 128)] {
            let img = Raster::filled(w, h, 3, 0.1f64, AffineGeoref::identity());
            assert_eq!(extract_features(&img).channels(), 18);
        }
    }

    #[test]
    fn features_scale_linearly_with_brightness() {
        let mut img = Raster::filled(12, 12, 1, 0.0f64, AffineGeoref::identity());
        for (i, v) in img.channel_mut(0).iter_mut().enumerate() {
            *v = (i % 7) as f64 * 0.1;
        }
        let f1 = extract_features(&img);
        let scaled = img.map(|v| v * 1.7);
        let f2 = extract_features(&scaled);
        for (a, b) in f1.data().iter().zip(f2.data().iter()) {
            assert!((a * 1.7 - b).abs() < 1e-9);
        }
    }
}
