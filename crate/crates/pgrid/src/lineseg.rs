//! Patch-level line segmentation: scaling-factor label downscaling, patch
//! binary cross-entropy with analytic gradients, and bilinear upsampling of
//! patch predictions back to image resolution.
//!
//! A scaling factor `sf` turns an H x W pixel mask into a ceil(H/sf) x
//! ceil(W/sf) grid of patch labels; each patch states line presence or
//! absence. sf = 1 is pixel-level segmentation. The default of 4 gives the
//! best localization/detection trade-off; {1, 4, 8} are exposed for the
//! sensitivity experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{PgridError, Result};
use crate::geo::{PolylineSet, Raster};
use crate::rasterops::{bilinear_resample, rasterize_polylines};
use crate::scalar::Real;
use crate::scorer::{
    average_pool, extract_features, score, weight_gradient, Augmentation, ScorerWeights,
    TrainConfig, TrainMetadata, TrainOutcome, FEATURES_PER_CHANNEL,
};

/// Default scaling factor.
pub const DEFAULT_SF: usize = 4;

/// Patch-level binary labels derived from a full-resolution mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLabelGrid {
    pub sf: usize,
    pub grid: Raster<u8>,
    pub source_width: usize,
    pub source_height: usize,
}

/// A patch is positive iff any source pixel inside it is positive; thin lines
/// survive arbitrary downscaling. Edge patches may cover fewer pixels.
pub fn downscale_labels(mask: &Raster<u8>, sf: usize) -> Result<PatchLabelGrid> {
    mask.ensure_binary_mask()?;
    if sf == 0 {
        return Err(PgridError::InvalidConfig {
            reason: "scaling factor must be >= 1".into(),
        });
    }
    let (w, h) = (mask.width(), mask.height());
    let (pw, ph) = (w.div_ceil(sf), h.div_ceil(sf));
    let mut grid = Raster::filled(pw, ph, 1, 0u8, *mask.georef());
    for row in 0..h {
        for col in 0..w {
            if mask.get(0, row, col) != 0 {
                grid.set(0, row / sf, col / sf, 1);
            }
        }
    }
    Ok(PatchLabelGrid {
        sf,
        grid,
        source_width: w,
        source_height: h,
    })
}

/// Mean binary cross-entropy over patches plus its gradient with respect to
/// the patch logits (valid when `patch_probs` came from a per-patch sigmoid):
/// `dL/dz = (p - y) / N`.
pub fn patch_bce_loss<F: Real>(
    patch_probs: &Raster<F>,
    labels: &PatchLabelGrid,
    epsilon: f64,
) -> Result<(F, Raster<F>)> {
    if patch_probs.channels() != 1 || !patch_probs.same_shape(&labels.grid) {
        return Err(PgridError::ShapeMismatch {
            context: "patch probabilities vs labels",
            a: format!(
                "{}x{}x{}",
                patch_probs.width(),
                patch_probs.height(),
                patch_probs.channels()
            ),
            b: format!("{}x{}x1", labels.grid.width(), labels.grid.height()),
        });
    }
    let eps = F::of(epsilon);
    let n = F::of((patch_probs.width() * patch_probs.height()) as f64);
    let mut grad = patch_probs.like(F::zero());
    let mut loss = F::zero();
    for (i, (&p, &y)) in patch_probs
        .channel(0)
        .iter()
        .zip(labels.grid.channel(0).iter())
        .enumerate()
    {
        let pc = p.max(eps).min(F::one() - eps);
        let yf = F::of(y as f64);
        loss = loss - (yf * pc.ln() + (F::one() - yf) * (F::one() - pc).ln());
        grad.channel_mut(0)[i] = (p - yf) / n;
    }
    Ok((loss / n, grad))
}

/// Bilinear upsampling of patch probabilities to the recorded source size;
/// patch values are treated as patch-center samples.
pub fn upsample_predictions<F: Real>(
    patch_probs: &Raster<F>,
    out_width: usize,
    out_height: usize,
) -> Raster<F> {
    bilinear_resample(patch_probs, out_width, out_height)
}

#[inline]
fn sigmoid<F: Real>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// Patch line probabilities for one image under the given head.
pub fn predict_patches(
    image: &Raster<f64>,
    weights: &ScorerWeights,
    sf: usize,
) -> Result<Raster<f64>> {
    let pooled = average_pool(&extract_features(image), sf);
    let logits = score(&pooled, weights)?;
    Ok(logits.map(sigmoid))
}

/// Full-resolution line probability raster (patch prediction + upsampling).
pub fn segment_lines(
    image: &Raster<f64>,
    weights: &ScorerWeights,
    sf: usize,
) -> Result<Raster<f64>> {
    let patches = predict_patches(image, weights, sf)?;
    Ok(upsample_predictions(&patches, image.width(), image.height()))
}

/// Trains the pooled-patch line head with gradient descent on the patch BCE.
/// Ground-truth polylines are rasterized one pixel wide (training labels
/// align with visible lines; evaluation buffering is separate). Deterministic
/// given (dataset, sf, config).
pub fn train_lines(
    dataset: &[(Raster<f64>, PolylineSet)],
    sf: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(PgridError::InvalidConfig {
            reason: "training dataset is empty".into(),
        });
    }

    struct Sample {
        pooled: Raster<f64>,
        labels: PatchLabelGrid,
        image_channels: usize,
    }
    let samples: Vec<Sample> = dataset
        .iter()
        .map(|(image, lines)| {
            let mask = rasterize_polylines(
                lines,
                image.georef(),
                image.width(),
                image.height(),
                1.0,
            );
            let labels = downscale_labels(&mask, sf)?;
            Ok(Sample {
                pooled: average_pool(&extract_features(image), sf),
                labels,
                image_channels: image.channels(),
            })
        })
        .collect::<Result<_>>()?;

    let n_features = samples[0].pooled.channels();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut weights = ScorerWeights::zeros(n_features, 1);
    let mut velocity_w = vec![0.0f64; n_features];
    let mut velocity_b = 0.0f64;
    let mut curve = Vec::with_capacity(config.epochs);
    let mut diverged_at = None;

    for epoch in 0..config.epochs {
        let snapshot = weights.clone();
        let mut grad_w = vec![0.0f64; n_features];
        let mut grad_b = 0.0f64;
        let mut epoch_loss = 0.0;

        for sample in &samples {
            let aug = if config.augment {
                Augmentation::sample(&mut rng, sample.image_channels, config.jitter)
            } else {
                Augmentation::identity(sample.image_channels)
            };
            let pooled = aug.apply_raster(&sample.pooled, |c| {
                aug.channel_gain[c / FEATURES_PER_CHANNEL]
            });
            let grid = aug.apply_mask(&sample.labels.grid);
            let labels = PatchLabelGrid {
                sf,
                grid,
                source_width: sample.labels.source_width,
                source_height: sample.labels.source_height,
            };

            let logits = score(&pooled, &weights)?;
            let probs = logits.map(sigmoid);
            let (loss, grad_logits) = patch_bce_loss(&probs, &labels, config.epsilon)?;
            epoch_loss += loss;
            let (dw, db) = weight_gradient(&pooled, &grad_logits);
            for f in 0..n_features {
                grad_w[f] += dw[f][0];
            }
            grad_b += db[0];
        }

        let n = samples.len() as f64;
        epoch_loss /= n;
        if !epoch_loss.is_finite() {
            weights = snapshot;
            diverged_at = Some(epoch);
            break;
        }
        curve.push(epoch_loss);

        for g in grad_w.iter_mut() {
            *g /= n;
        }
        grad_b /= n;
        if config.clip_norm > 0.0 {
            let norm = (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
            if norm > config.clip_norm {
                let scale = config.clip_norm / norm;
                for g in grad_w.iter_mut() {
                    *g *= scale;
                }
                grad_b *= scale;
            }
        }

        for f in 0..n_features {
            velocity_w[f] = config.momentum * velocity_w[f] - config.lr * grad_w[f];
            weights.w[f][0] += velocity_w[f];
        }
        velocity_b = config.momentum * velocity_b - config.lr * grad_b;
        weights.b[0] += velocity_b;
        if !weights.is_finite() {
            weights = snapshot;
            diverged_at = Some(epoch);
            break;
        }
    }

    weights.metadata = TrainMetadata {
        epochs_run: curve.len(),
        final_loss: curve.last().copied().unwrap_or(f64::NAN),
        seed: config.seed,
        diverged_at,
    };
    Ok(TrainOutcome {
        weights,
        loss_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{AffineGeoref, Polyline};
    use rand::{Rng, SeedableRng};

    #[test]
    fn mask_512_at_sf_4_becomes_128() {
        let mask = Raster::filled(512, 512, 1, 0u8, AffineGeoref::identity());
        let grid = downscale_labels(&mask, 4).unwrap();
        assert_eq!((grid.grid.width(), grid.grid.height()), (128, 128));
    }

    #[test]
    fn sf_one_is_identity() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let data: Vec<u8> = (0..256).map(|_| rng.random_range(0..2u8)).collect();
        let mask = Raster::from_data(16, 16, 1, data, AffineGeoref::identity()).unwrap();
        let grid = downscale_labels(&mask, 1).unwrap();
        assert_eq!(grid.grid, mask);
    }

    #[test]
    fn single_positive_pixel_lands_in_one_patch() {
        let mut mask = Raster::filled(16, 16, 1, 0u8, AffineGeoref::identity());
        mask.set(0, 5, 5, 1);
        let grid = downscale_labels(&mask, 4).unwrap();
        assert_eq!(grid.grid.count_ones(), 1);
        assert_eq!(grid.grid.get(0, 1, 1), 1);
    }

    /// Presence is never lost: a patch is positive iff some pixel inside it
    /// is positive, checked exhaustively per pixel on random masks.
    #[test]
    fn presence_equivalence_random_masks() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        for _ in 0..200 {
            let data: Vec<u8> = (0..256).map(|_| u8::from(rng.random::<f64>() < 0.1)).collect();
            let mask = Raster::from_data(16, 16, 1, data, AffineGeoref::identity()).unwrap();
            for sf in [1usize, 4, 8] {
                let grid = downscale_labels(&mask, sf).unwrap();
                for row in 0..16 {
                    for col in 0..16 {
                        if mask.get(0, row, col) != 0 {
                            assert_eq!(grid.grid.get(0, row / sf, col / sf), 1);
                        }
                    }
                }
                for prow in 0..grid.grid.height() {
                    for pcol in 0..grid.grid.width() {
                        if grid.grid.get(0, prow, pcol) != 0 {
                            let mut any = false;
                            for row in prow * sf..((prow + 1) * sf).min(16) {
                                for col in pcol * sf..((pcol + 1) * sf).min(16) {
                                    any |= mask.get(0, row, col) != 0;
                                }
                            }
                            assert!(any, "positive patch without positive pixel");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bce_perfect_predictions_near_zero() {
        let mut mask = Raster::filled(8, 8, 1, 0u8, AffineGeoref::identity());
        mask.set(0, 2, 3, 1);
        let labels = downscale_labels(&mask, 1).unwrap();
        let probs = labels.grid.map(|y| if y != 0 { 1.0 - 1e-9 } else { 1e-9 });
        let (loss, _) = patch_bce_loss(&probs, &labels, 1e-12).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn bce_at_half_is_ln_two_regardless_of_labels() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(19);
        let data: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
        let mask = Raster::from_data(8, 8, 1, data, AffineGeoref::identity()).unwrap();
        let labels = downscale_labels(&mask, 1).unwrap();
        let probs = Raster::filled(8, 8, 1, 0.5f64, AffineGeoref::identity());
        let (loss, _) = patch_bce_loss(&probs, &labels, 1e-7).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_shape_mismatch_rejected() {
        let mask = Raster::filled(8, 8, 1, 0u8, AffineGeoref::identity());
        let labels = downscale_labels(&mask, 4).unwrap();
        let probs = Raster::filled(8, 8, 1, 0.5f64, AffineGeoref::identity());
        assert!(matches!(
            patch_bce_loss(&probs, &labels, 1e-7),
            Err(PgridError::ShapeMismatch { .. })
        ));
    }

    /// Central-difference oracle through the sigmoid.
    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        let data: Vec<u8> = (0..256).map(|_| rng.random_range(0..2u8)).collect();
        let mask = Raster::from_data(16, 16, 1, data, AffineGeoref::identity()).unwrap();
        let labels = downscale_labels(&mask, 1).unwrap();
        let logits_data: Vec<f64> = (0..256).map(|_| rng.random_range(-2.0..2.0)).collect();
        let logits = Raster::from_data(16, 16, 1, logits_data, AffineGeoref::identity()).unwrap();

        let eval = |z: &Raster<f64>| {
            let probs = z.map(sigmoid);
            patch_bce_loss(&probs, &labels, 1e-12).unwrap().0
        };
        let probs = logits.map(sigmoid);
        let (_, grad) = patch_bce_loss(&probs, &labels, 1e-12).unwrap();
        let h = 1e-4;
        let mut max_rel: f64 = 0.0;
        let mut z = logits.clone();
        for i in 0..256 {
            let orig = z.data()[i];
            z.data_mut()[i] = orig + h;
            let lp = eval(&z);
            z.data_mut()[i] = orig - h;
            let lm = eval(&z);
            z.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let a = grad.data()[i];
            max_rel = max_rel.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-12));
        }
        assert!(max_rel <= 1e-4, "max rel error {max_rel}");
    }

    #[test]
    fn upsample_constant_grid() {
        let grid = Raster::filled(32, 32, 1, 0.9f64, AffineGeoref::identity());
        let up = upsample_predictions(&grid, 128, 128);
        assert_eq!((up.width(), up.height()), (128, 128));
        assert!(up.data().iter().all(|&v| (v - 0.9).abs() < 1e-12));
        assert!(up.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn upsample_128_to_512() {
        let grid = Raster::filled(128, 128, 1, 0.25f64, AffineGeoref::identity());
        let up = upsample_predictions(&grid, 512, 512);
        assert_eq!((up.width(), up.height()), (512, 512));
    }

    fn line_dataset(n: usize, seed: u64) -> Vec<(Raster<f64>, PolylineSet)> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let (w, h) = (32usize, 32usize);
                let georef = AffineGeoref::north_up(0.0, 0.0, 1.0, 0);
                let mut img = Raster::filled(w, h, 1, 0.0f64, georef);
                for v in img.data_mut().iter_mut() {
                    *v = rng.random_range(0.4..0.5);
                }
                let y = -(rng.random_range(8.0..24.0));
                let line = Polyline::new(0, vec![[2.0, y], [30.0, y]]).unwrap();
                let lines = PolylineSet::new(vec![line]).unwrap();
                let mask = rasterize_polylines(&lines, &georef, w, h, 1.0);
                for row in 0..h {
                    for col in 0..w {
                        if mask.get(0, row, col) != 0 {
                            img.set(0, row, col, 0.05);
                        }
                    }
                }
                (img, lines)
            })
            .collect()
    }

    #[test]
    fn zero_lr_line_training_is_inert() {
        let data = line_dataset(2, 29);
        let config = TrainConfig {
            lr: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train_lines(&data, 4, &config).unwrap();
        assert!(out.weights.w.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn line_training_lowers_loss_across_seeds() {
        let data = line_dataset(5, 31);
        for seed in [1u64, 2, 3] {
            let config = TrainConfig {
                epochs: 40,
                seed,
                ..TrainConfig::default()
            };
            let out = train_lines(&data, 4, &config).unwrap();
            assert!(
                out.loss_curve.last().unwrap() < out.loss_curve.first().unwrap(),
                "seed {seed}: no improvement"
            );
        }
    }

    #[test]
    fn sf_four_run_quarters_patch_grids() {
        let data = line_dataset(1, 37);
        let (image, lines) = &data[0];
        let mask = rasterize_polylines(lines, image.georef(), image.width(), image.height(), 1.0);
        let grid = downscale_labels(&mask, 4).unwrap();
        assert_eq!(grid.grid.width(), image.width().div_ceil(4));
        assert_eq!(grid.grid.height(), image.height().div_ceil(4));
        let config = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let out = train_lines(&data, 4, &config).unwrap();
        let patches = predict_patches(image, &out.weights, 4).unwrap();
        assert_eq!(patches.width(), image.width().div_ceil(4));
    }
}
