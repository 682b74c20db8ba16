//! Property tests over arbitrary inputs for the invariants that hold
//! unconditionally.

use proptest::prelude::*;

use pgrid::geo::pgrd;
use pgrid::geo::{AffineGeoref, Raster};
use pgrid::lineseg::downscale_labels;
use pgrid::metrics::prf;

proptest! {
    /// Forward/inverse affine composition stays within 1e-9 m over a broad
    /// parameter range (well-conditioned linear parts).
    #[test]
    fn affine_round_trip(
        origin_x in -1e6f64..1e6,
        origin_y in -1e6f64..1e6,
        px in 0.01f64..10.0,
        shear in -0.2f64..0.2,
        col in -5000.0f64..5000.0,
        row in -5000.0f64..5000.0,
    ) {
        let g = AffineGeoref {
            origin_x,
            origin_y,
            px_w: px,
            px_h: -px,
            rot_x: shear,
            rot_y: -shear,
            epsg: 0,
        };
        prop_assume!(g.validate().is_ok());
        let (x, y) = g.pixel_to_world(col, row);
        let (c, r) = g.world_to_pixel(x, y);
        let (x2, y2) = g.pixel_to_world(c, r);
        prop_assert!((x2 - x).abs() < 1e-9);
        prop_assert!((y2 - y).abs() < 1e-9);
    }

    /// PGRD encode/decode is the identity on any valid float raster.
    #[test]
    fn pgrd_round_trip(
        w in 1usize..24,
        h in 1usize..24,
        channels in 1usize..4,
        seed in any::<u64>(),
        nodata in proptest::option::of(-1e6f64..1e6),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..w * h * channels).map(|_| rng.random_range(-1e3..1e3)).collect();
        let mut raster = Raster::from_data(w, h, channels, data, AffineGeoref::identity()).unwrap();
        raster.set_nodata(nodata);
        let bytes = pgrd::encode(&raster);
        let back = pgrd::decode(&bytes).unwrap().expect_f32().unwrap();
        prop_assert_eq!(&back, &raster);
        prop_assert_eq!(pgrd::encode(&back), bytes);
    }

    /// Precision/recall/F1 always land in [0,1]; F1 is zero exactly when
    /// there are no true positives.
    #[test]
    fn prf_bounds(tp in 0usize..500, fp in 0usize..500, fn_c in 0usize..500) {
        let (p, r, f1) = prf(tp, fp, fn_c);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((0.0..=1.0).contains(&f1));
        prop_assert_eq!(f1 == 0.0, tp == 0);
    }

    /// Nearest-neighbor upscaling of a patch grid covers every positive
    /// source pixel: presence is never lost by downscaling.
    #[test]
    fn downscale_presence_total(seed in any::<u64>(), sf in 1usize..9) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let data: Vec<u8> = (0..w * h).map(|_| u8::from(rng.random::<f64>() < 0.2)).collect();
        let mask = Raster::from_data(w, h, 1, data, AffineGeoref::identity()).unwrap();
        let grid = downscale_labels(&mask, sf).unwrap();
        for row in 0..h {
            for col in 0..w {
                if mask.get(0, row, col) != 0 {
                    prop_assert_eq!(grid.grid.get(0, row / sf, col / sf), 1);
                }
            }
        }
    }
}
