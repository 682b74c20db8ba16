//! Gradient-descent training of the pole scorer head on the composite loss.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::geo::{PointAnnotations, Polarity, Raster};
use crate::poleloss::{composite_loss, points_to_pixels, LossConfig, PixelPoint};
use crate::scorer::{
    extract_features, score, weight_gradient, Augmentation, ScorerWeights, TrainMetadata,
    FEATURES_PER_CHANNEL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub momentum: f64,
    pub seed: u64,
    pub augment: bool,
    pub lambda_hard_neg: f64,
    pub fg_threshold: f64,
    pub epsilon: f64,
    /// Brightness jitter amplitude for augmentation.
    pub jitter: f64,
    /// Global L2 clip on the mean gradient; 0 disables. Area terms can spike
    /// by orders of magnitude when a large blob crosses the threshold, and
    /// an unclipped step drives the head into saturation.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            // toy learning rate for the shallow logistic head; deep-backbone
            // training would sit orders of magnitude lower (1e-6 scale)
            lr: 1e-2,
            epochs: 200,
            momentum: 0.9,
            seed: 0,
            augment: true,
            lambda_hard_neg: 1.0,
            fg_threshold: 0.5,
            epsilon: 1e-7,
            jitter: 0.1,
            clip_norm: 20.0,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            fg_threshold: self.fg_threshold,
            lambda_hard_neg: self.lambda_hard_neg,
            epsilon: self.epsilon,
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PgridError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| PgridError::json(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: ScorerWeights,
    /// Mean composite loss per epoch (the entry that caused an abort is not
    /// recorded).
    pub loss_curve: Vec<f64>,
}

struct Sample {
    features: Raster<f64>,
    poles: Vec<PixelPoint>,
    negatives: Vec<PixelPoint>,
    image_channels: usize,
}

fn prepare_samples(dataset: &[(Raster<f64>, PointAnnotations)]) -> Result<Vec<Sample>> {
    dataset
        .iter()
        .map(|(image, ann)| {
            let poles = points_to_pixels(
                ann.points.iter().filter(|p| p.polarity == Polarity::Pole),
                image.georef(),
                image.width(),
                image.height(),
            )?;
            let negatives = points_to_pixels(
                ann.points
                    .iter()
                    .filter(|p| p.polarity == Polarity::HardNegative),
                image.georef(),
                image.width(),
                image.height(),
            )?;
            Ok(Sample {
                features: extract_features(image),
                poles,
                negatives,
                image_channels: image.channels(),
            })
        })
        .collect()
}

/// Plain gradient descent (with optional momentum) on the mean composite
/// loss, with per-sample augmentation re-drawn each epoch. Deterministic
/// given (dataset, config): augmentation draws come from one seeded stream
/// and gradient accumulation is in fixed sample order.
pub fn train_poles(
    dataset: &[(Raster<f64>, PointAnnotations)],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(PgridError::InvalidConfig {
            reason: "training dataset is empty".into(),
        });
    }
    let samples = prepare_samples(dataset)?;
    let n_features = samples[0].features.channels();
    for s in &samples {
        if s.features.channels() != n_features {
            return Err(PgridError::ShapeMismatch {
                context: "feature channels across dataset",
                a: n_features.to_string(),
                b: s.features.channels().to_string(),
            });
        }
    }

    let loss_config = config.loss_config();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut weights = ScorerWeights::zeros(n_features, 2);
    // background-biased start: with a uniform 0.5 map the whole image is one
    // blob and the area terms (split, false-positive) crush the handful of
    // point terms before pole features can form; starting confident
    // background disables the blob terms until the point loss has raised
    // genuine pole pixels above threshold
    weights.b = vec![2.0, -2.0];
    let mut velocity_w = vec![vec![0.0f64; 2]; n_features];
    let mut velocity_b = vec![0.0f64; 2];
    let mut curve = Vec::with_capacity(config.epochs);
    let mut diverged_at = None;

    for epoch in 0..config.epochs {
        let snapshot = weights.clone();
        let mut grad_w = vec![vec![0.0f64; 2]; n_features];
        let mut grad_b = vec![0.0f64; 2];
        let mut epoch_loss = 0.0;

        for sample in &samples {
            let aug = if config.augment {
                Augmentation::sample(&mut rng, sample.image_channels, config.jitter)
            } else {
                Augmentation::identity(sample.image_channels)
            };
            // brightness gain of a feature plane is the gain of its source
            // image channel (the bank is 1-homogeneous per channel)
            let feats = aug.apply_raster(&sample.features, |c| {
                aug.channel_gain[c / FEATURES_PER_CHANNEL]
            });
            let (w0, h0) = (sample.features.width(), sample.features.height());
            let poles = aug.apply_points(&sample.poles, w0, h0);
            let negatives = aug.apply_points(&sample.negatives, w0, h0);

            let logits = score(&feats, &weights)?;
            let breakdown = composite_loss(&logits, &poles, &negatives, &loss_config)?;
            epoch_loss += breakdown.total;
            let (dw, db) = weight_gradient(&feats, &breakdown.grad_logits);
            for f in 0..n_features {
                for k in 0..2 {
                    grad_w[f][k] += dw[f][k];
                }
            }
            for k in 0..2 {
                grad_b[k] += db[k];
            }
        }

        let n = samples.len() as f64;
        epoch_loss /= n;
        if !epoch_loss.is_finite() {
            weights = snapshot;
            diverged_at = Some(epoch);
            log::warn!("training diverged at epoch {epoch}; keeping last finite weights");
            break;
        }
        curve.push(epoch_loss);

        for row in grad_w.iter_mut() {
            for g in row.iter_mut() {
                *g /= n;
            }
        }
        for g in grad_b.iter_mut() {
            *g /= n;
        }
        clip_gradient(&mut grad_w, &mut grad_b, config.clip_norm);

        for f in 0..n_features {
            for k in 0..2 {
                velocity_w[f][k] = config.momentum * velocity_w[f][k] - config.lr * grad_w[f][k];
                weights.w[f][k] += velocity_w[f][k];
            }
        }
        for k in 0..2 {
            velocity_b[k] = config.momentum * velocity_b[k] - config.lr * grad_b[k];
            weights.b[k] += velocity_b[k];
        }
        if !weights.is_finite() {
            weights = snapshot;
            diverged_at = Some(epoch);
            log::warn!("weights became non-finite at epoch {epoch}; reverting");
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

/// Scales the gradient so its global L2 norm is at most `clip`.
pub(crate) fn clip_gradient(grad_w: &mut [Vec<f64>], grad_b: &mut [f64], clip: f64) {
    if clip <= 0.0 {
        return;
    }
    let mut norm2 = 0.0;
    for row in grad_w.iter() {
        for g in row {
            norm2 += g * g;
        }
    }
    for g in grad_b.iter() {
        norm2 += g * g;
    }
    let norm = norm2.sqrt();
    if norm > clip {
        let scale = clip / norm;
        for row in grad_w.iter_mut() {
            for g in row.iter_mut() {
                *g *= scale;
            }
        }
        for g in grad_b.iter_mut() {
            *g *= scale;
        }
    }
}
