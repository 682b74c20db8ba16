//! Bilinear resampling (align-corners-false, edge clamp).

use crate::geo::{AffineGeoref, Raster};
use crate::scalar::Real;

/// Bilinear resample to `out_width` x `out_height`. Output pixel centers map
/// to source coordinates via `(i + 0.5) * in/out - 0.5` (align-corners-false)
/// with edge-clamped sampling, so constants are preserved and outputs stay
/// within the source min/max. The output georef covers the same world extent.
pub fn bilinear_resample<F: Real>(src: &Raster<F>, out_width: usize, out_height: usize) -> Raster<F> {
    let (w_in, h_in, channels) = (src.width(), src.height(), src.channels());
    let sx = w_in as f64 / out_width as f64;
    let sy = h_in as f64 / out_height as f64;

    let g = src.georef();
    let georef = AffineGeoref {
        origin_x: g.origin_x,
        origin_y: g.origin_y,
        px_w: g.px_w * sx,
        px_h: g.px_h * sy,
        rot_x: g.rot_x * sy,
        rot_y: g.rot_y * sx,
        epsg: g.epsg,
    };

    let mut out = Raster::filled(out_width, out_height, channels, F::zero(), georef);
    out.set_nodata(src.nodata());

    for c in 0..channels {
        let plane = src.channel(c);
        for row in 0..out_height {
            let fy = (row as f64 + 0.5) * sy - 0.5;
            let y0 = fy.floor();
            let ty = F::of(fy - y0);
            let r0 = (y0.max(0.0) as usize).min(h_in - 1);
            let r1 = ((y0 + 1.0).max(0.0) as usize).min(h_in - 1);
            for col in 0..out_width {
                let fx = (col as f64 + 0.5) * sx - 0.5;
                let x0 = fx.floor();
                let tx = F::of(fx - x0);
                let c0 = (x0.max(0.0) as usize).min(w_in - 1);
                let c1 = ((x0 + 1.0).max(0.0) as usize).min(w_in - 1);

                let v00 = plane[r0 * w_in + c0];
                let v01 = plane[r0 * w_in + c1];
                let v10 = plane[r1 * w_in + c0];
                let v11 = plane[r1 * w_in + c1];
                let one = F::one();
                let top = v00 * (one - tx) + v01 * tx;
                let bot = v10 * (one - tx) + v11 * tx;
                out.set(c, row, col, top * (one - ty) + bot * ty);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_maps_to_constant() {
        let src = Raster::filled(128, 128, 1, 0.7f64, AffineGeoref::identity());
        let up = bilinear_resample(&src, 512, 512);
        assert!(up.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn ramp_upsample_is_monotone_and_bounded() {
        let src = Raster::from_data(2, 1, 1, vec![0.0f64, 1.0], AffineGeoref::identity()).unwrap();
        let up = bilinear_resample(&src, 8, 1);
        let vals = up.channel(0);
        for w in vals.windows(2) {
            assert!(w[1] >= w[0], "not monotone: {vals:?}");
        }
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    /// Independent oracle: evaluate the interpolation formula directly at
    /// each output pixel.
    #[test]
    fn random_grid_matches_formula() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..64).map(|_| rng.random()).collect();
        let src = Raster::from_data(8, 8, 1, data.clone(), AffineGeoref::identity()).unwrap();
        let up = bilinear_resample(&src, 32, 32);
        for row in 0..32 {
            for col in 0..32 {
                let fx = (col as f64 + 0.5) * 0.25 - 0.5;
                let fy = (row as f64 + 0.5) * 0.25 - 0.5;
                let clamp = |v: f64| (v.max(0.0) as usize).min(7);
                let (x0, y0) = (fx.floor(), fy.floor());
                let (tx, ty) = (fx - x0, fy - y0);
                let (c0, c1) = (clamp(x0), clamp(x0 + 1.0));
                let (r0, r1) = (clamp(y0), clamp(y0 + 1.0));
                let expected = (data[r0 * 8 + c0] * (1.0 - tx) + data[r0 * 8 + c1] * tx)
                    * (1.0 - ty)
                    + (data[r1 * 8 + c0] * (1.0 - tx) + data[r1 * 8 + c1] * tx) * ty;
                let got = up.get(0, row, col);
                assert!((got - expected).abs() < 1e-12, "({row},{col})");
            }
        }
    }

    #[test]
    fn output_extent_matches_source() {
        let g = AffineGeoref::north_up(10.0, 20.0, 0.5, 0);
        let src = Raster::filled(16, 8, 1, 1.0f64, g);
        let up = bilinear_resample(&src, 64, 32);
        assert_eq!(src.world_bbox(), up.world_bbox());
    }
}
