//! Desk-scale differentiable per-pixel classifier: a fixed convolution
//! feature bank feeding a trainable per-pixel logistic head. Stands in for a
//! deep segmentation backbone while exercising every loss term with exact
//! gradients.

mod augment;
mod features;
mod train;

pub use augment::Augmentation;
pub use features::{extract_features, FEATURES_PER_CHANNEL, FEATURE_BANK_VERSION, GAUSSIAN_SIGMAS};
pub use train::{train_poles, TrainConfig, TrainOutcome};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::geo::Raster;
use crate::poleloss::{composite_loss, GradCheckReport, LossConfig, PixelPoint};
use crate::scalar::Real;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMetadata {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub seed: u64,
    /// Set when training aborted on a non-finite loss; the stored weights are
    /// the last finite state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
}

/// Per-class affine head over the feature bank: `logit_k = b_k + W[..,k] . f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerWeights {
    pub feature_bank_version: u32,
    /// Feature-major matrix, `W[feature][class]`.
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub metadata: TrainMetadata,
}

impl ScorerWeights {
    pub fn zeros(n_features: usize, n_outputs: usize) -> Self {
        ScorerWeights {
            feature_bank_version: FEATURE_BANK_VERSION,
            w: vec![vec![0.0; n_outputs]; n_features],
            b: vec![0.0; n_outputs],
            metadata: TrainMetadata::default(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.w.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.b.len()
    }

    pub fn is_finite(&self) -> bool {
        self.b.iter().all(|v| v.is_finite())
            && self.w.iter().flatten().all(|v| v.is_finite())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| PgridError::json(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| PgridError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PgridError::io(path, e))?;
        let weights: ScorerWeights =
            serde_json::from_str(&text).map_err(|e| PgridError::json(path, e))?;
        Ok(weights)
    }
}

/// Per-pixel affine map from feature planes to class logits.
pub fn score<F: Real>(features: &Raster<F>, weights: &ScorerWeights) -> Result<Raster<F>> {
    if features.channels() != weights.n_features() {
        return Err(PgridError::ShapeMismatch {
            context: "feature channels vs weight rows",
            a: features.channels().to_string(),
            b: weights.n_features().to_string(),
        });
    }
    let (w, h) = (features.width(), features.height());
    let k_out = weights.n_outputs();
    let mut logits = Raster::filled(w, h, k_out, F::zero(), *features.georef());
    for k in 0..k_out {
        let bias = F::of(weights.b[k]);
        let plane = logits.channel_mut(k);
        for v in plane.iter_mut() {
            *v = bias;
        }
    }
    for (f, row_w) in weights.w.iter().enumerate() {
        let feat = features.channel(f);
        for (k, &wfk) in row_w.iter().enumerate() {
            if wfk == 0.0 {
                continue;
            }
            let wfk = F::of(wfk);
            let plane = logits.channel_mut(k);
            for (o, &x) in plane.iter_mut().zip(feat.iter()) {
                *o = *o + wfk * x;
            }
        }
    }
    Ok(logits)
}

/// Average-pools every channel over `sf` x `sf` patches (ceil division; edge
/// patches average their in-bounds pixels). The georef scales so the world
/// extent of full patches is preserved.
pub fn average_pool<F: Real>(raster: &Raster<F>, sf: usize) -> Raster<F> {
    assert!(sf >= 1, "scaling factor must be >= 1");
    let (w, h, channels) = (raster.width(), raster.height(), raster.channels());
    let (pw, ph) = (w.div_ceil(sf), h.div_ceil(sf));
    let g = raster.georef();
    let georef = crate::geo::AffineGeoref {
        origin_x: g.origin_x,
        origin_y: g.origin_y,
        px_w: g.px_w * sf as f64,
        px_h: g.px_h * sf as f64,
        rot_x: g.rot_x * sf as f64,
        rot_y: g.rot_y * sf as f64,
        epsg: g.epsg,
    };
    let mut out = Raster::filled(pw, ph, channels, F::zero(), georef);
    for c in 0..channels {
        let src = raster.channel(c);
        let dst = out.channel_mut(c);
        for pr in 0..ph {
            for pc in 0..pw {
                let r1 = ((pr + 1) * sf).min(h);
                let c1 = ((pc + 1) * sf).min(w);
                let mut acc = F::zero();
                let mut n = 0usize;
                for row in pr * sf..r1 {
                    for col in pc * sf..c1 {
                        acc = acc + src[row * w + col];
                        n += 1;
                    }
                }
                dst[pr * pw + pc] = acc / F::of(n as f64);
            }
        }
    }
    out
}

/// Gradient of the composite pole loss with respect to the head weights:
/// `dL/dW[f][k] = sum_i feat[f][i] * dL/dz[k][i]`, `dL/db[k] = sum_i dL/dz[k][i]`.
pub fn weight_gradient<F: Real>(
    features: &Raster<F>,
    grad_logits: &Raster<F>,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n_features = features.channels();
    let k_out = grad_logits.channels();
    let mut dw = vec![vec![0.0f64; k_out]; n_features];
    let mut db = vec![0.0f64; k_out];
    for k in 0..k_out {
        let gz = grad_logits.channel(k);
        db[k] = gz.iter().map(|v| v.as_f64()).sum();
        for (f, dwf) in dw.iter_mut().enumerate() {
            let feat = features.channel(f);
            let mut acc = 0.0;
            for (x, g) in feat.iter().zip(gz.iter()) {
                acc += x.as_f64() * g.as_f64();
            }
            dwf[k] = acc;
        }
    }
    (dw, db)
}

/// Central-difference verification of the end-to-end gradient
/// (loss -> logits -> head weights) on one sample. Coordinates whose probe
/// flips a discrete structure are skipped, as in the logits-level check.
pub fn gradcheck_weights<F: Real>(
    weights: &ScorerWeights,
    features: &Raster<F>,
    pole_points: &[PixelPoint],
    negative_points: &[PixelPoint],
    loss_config: &LossConfig,
    h: f64,
) -> Result<GradCheckReport> {
    let logits = score(features, weights)?;
    let base = composite_loss(&logits, pole_points, negative_points, loss_config)?;
    let (dw, db) = weight_gradient(features, &base.grad_logits);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut probe = weights.clone();
    let eval = |probe: &ScorerWeights| -> Result<(f64, ((usize, usize), Raster<u8>, Raster<u8>))> {
        let z = score(features, probe)?;
        let lb = composite_loss(&z, pole_points, negative_points, loss_config)?;
        Ok((lb.total.as_f64(), (lb.argmax_pixel, lb.fg_mask, lb.boundaries)))
    };
    let check = |analytic: f64,
                     plus: (f64, ((usize, usize), Raster<u8>, Raster<u8>)),
                     minus: (f64, ((usize, usize), Raster<u8>, Raster<u8>)),
                     report: &mut GradCheckReport| {
        if plus.1 != minus.1 {
            report.skipped += 1;
            return;
        }
        let fd = (plus.0 - minus.0) / (2.0 * h);
        let denom = analytic.abs().max(fd.abs()).max(1e-12);
        report.max_rel_error = report.max_rel_error.max((analytic - fd).abs() / denom);
        report.checked += 1;
    };

    for f in 0..weights.n_features() {
        for k in 0..weights.n_outputs() {
            let orig = probe.w[f][k];
            probe.w[f][k] = orig + h;
            let plus = eval(&probe)?;
            probe.w[f][k] = orig - h;
            let minus = eval(&probe)?;
            probe.w[f][k] = orig;
            check(dw[f][k], plus, minus, &mut report);
        }
    }
    for k in 0..weights.n_outputs() {
        let orig = probe.b[k];
        probe.b[k] = orig + h;
        let plus = eval(&probe)?;
        probe.b[k] = orig - h;
        let minus = eval(&probe)?;
        probe.b[k] = orig;
        check(db[k], plus, minus, &mut report);
    }
    Ok(report)
}
