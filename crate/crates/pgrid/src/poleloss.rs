//! Point-supervised pole-detection loss over per-pixel probability maps.
//!
//! Five terms, all negative log-likelihoods over a two-channel softmax map:
//!
//! - image level: at least one pixel should be pole when the image has poles,
//!   none otherwise; only the maximum pole probability participates.
//! - point level: pole probability at every annotated pole pixel.
//! - split level: background probability along watershed ridges between
//!   annotated poles that share one thresholded blob, weighted by the number
//!   of annotations in the blob.
//! - false positive: background probability over every pixel of blobs that
//!   contain no annotation.
//! - hard negative: background probability at annotated non-pole points,
//!   scaled by a configurable weight.
//!
//! Every operation returns the loss and its exact gradient; `composite_loss`
//! chains through the softmax to give gradients with respect to logits,
//! accumulated in row-major order so results are bit-reproducible.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{PgridError, Result};
use crate::geo::{AffineGeoref, AnnotatedPoint, Raster};
use crate::rasterops::{connected_components, threshold_mask, watershed, BlobLabels, Connectivity};
use crate::scalar::Real;

/// Channel index of the background probability.
pub const BACKGROUND: usize = 0;
/// Channel index of the pole probability.
pub const POLE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Foreground threshold applied to the pole channel before blob analysis.
    pub fg_threshold: f64,
    /// Weight of the hard-negative term.
    pub lambda_hard_neg: f64,
    /// Probabilities are clamped to [epsilon, 1 - epsilon] before every log.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            fg_threshold: 0.5,
            lambda_hard_neg: 1.0,
            epsilon: 1e-7,
        }
    }
}

/// An annotation resolved to a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelPoint {
    pub id: u64,
    pub row: usize,
    pub col: usize,
}

/// Maps world-space points onto integer pixels of a raster grid, failing on
/// points outside the grid.
pub fn points_to_pixels<'a>(
    points: impl Iterator<Item = &'a AnnotatedPoint>,
    georef: &AffineGeoref,
    width: usize,
    height: usize,
) -> Result<Vec<PixelPoint>> {
    let mut out = Vec::new();
    for p in points {
        let (c, r) = georef.world_to_pixel(p.x, p.y);
        let (col, row) = (c.floor() as i64, r.floor() as i64);
        if col < 0 || row < 0 || col >= width as i64 || row >= height as i64 {
            return Err(PgridError::PointOutOfBounds {
                id: p.id,
                col,
                row,
                width,
                height,
            });
        }
        out.push(PixelPoint {
            id: p.id,
            row: row as usize,
            col: col as usize,
        });
    }
    Ok(out)
}

/// Two-channel per-pixel softmax map (background, pole).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<F> {
    raster: Raster<F>,
}

impl<F: Real> ProbabilityMap<F> {
    /// Wraps an existing two-channel raster, checking that each pixel's
    /// channels sum to one (within 1e-6) and lie in [0, 1].
    pub fn new(raster: Raster<F>) -> Result<Self> {
        if raster.channels() != 2 {
            return Err(PgridError::RasterKind {
                expected: "2-channel probability map",
                found: format!("{} channels", raster.channels()),
            });
        }
        let (w, h) = (raster.width(), raster.height());
        let bg = raster.channel(BACKGROUND);
        let pole = raster.channel(POLE);
        for i in 0..w * h {
            let (b, p) = (bg[i].as_f64(), pole[i].as_f64());
            if !(0.0..=1.0).contains(&b) || !(0.0..=1.0).contains(&p) || (b + p - 1.0).abs() > 1e-6
            {
                return Err(PgridError::RasterKind {
                    expected: "per-pixel probabilities summing to 1",
                    found: format!("(bg={b}, pole={p}) at index {i}"),
                });
            }
        }
        Ok(ProbabilityMap { raster })
    }

    /// Per-pixel softmax of a two-channel logits raster.
    pub fn from_logits(logits: &Raster<F>) -> Result<Self> {
        if logits.channels() != 2 {
            return Err(PgridError::RasterKind {
                expected: "2-channel logits raster",
                found: format!("{} channels", logits.channels()),
            });
        }
        let (w, h) = (logits.width(), logits.height());
        let mut raster = logits.clone();
        for i in 0..w * h {
            let zb = logits.channel(BACKGROUND)[i];
            let zp = logits.channel(POLE)[i];
            let m = zb.max(zp);
            let eb = (zb - m).exp();
            let ep = (zp - m).exp();
            let sum = eb + ep;
            raster.channel_mut(BACKGROUND)[i] = eb / sum;
            raster.channel_mut(POLE)[i] = ep / sum;
        }
        Ok(ProbabilityMap { raster })
    }

    pub fn raster(&self) -> &Raster<F> {
        &self.raster
    }

    pub fn into_raster(self) -> Raster<F> {
        self.raster
    }

    pub fn width(&self) -> usize {
        self.raster.width()
    }

    pub fn height(&self) -> usize {
        self.raster.height()
    }

    #[inline]
    pub fn pole(&self, row: usize, col: usize) -> F {
        self.raster.get(POLE, row, col)
    }

    #[inline]
    pub fn background(&self, row: usize, col: usize) -> F {
        self.raster.get(BACKGROUND, row, col)
    }

    /// Row-major argmax of the pole channel (ties keep the earlier pixel).
    pub fn pole_argmax(&self) -> (usize, usize) {
        let (w, h) = (self.width(), self.height());
        let plane = self.raster.channel(POLE);
        let mut best = (0usize, 0usize);
        let mut best_v = plane[0];
        for row in 0..h {
            for col in 0..w {
                let v = plane[row * w + col];
                if v > best_v {
                    best_v = v;
                    best = (row, col);
                }
            }
        }
        best
    }
}

/// -ln of the clamped probability and the descent direction -1/clamp(p).
///
/// Where the clamp is active the implemented loss is flat, but the returned
/// slope is that of the unclamped objective at the clamp boundary; a zero
/// slope there would freeze training permanently once a prediction
/// saturates on the wrong side.
#[inline]
fn nll<F: Real>(p: F, eps: F) -> (F, F) {
    let clamped = p.max(eps).min(F::one() - eps);
    (-clamped.ln(), -(F::one() / clamped))
}

/// Image-level term: `-ln(max S_pole)` when the image contains poles,
/// `-ln(1 - max S_pole)` otherwise. The gradient is nonzero only at the
/// argmax pixel.
pub fn image_level_loss<F: Real>(
    s: &ProbabilityMap<F>,
    has_pole: bool,
    config: &LossConfig,
) -> (F, Raster<F>) {
    let eps = F::of(config.epsilon);
    let (row, col) = s.pole_argmax();
    let p = s.pole(row, col);
    let mut grad = s.raster().like(F::zero());
    let loss = if has_pole {
        let (l, d) = nll(p, eps);
        grad.set(POLE, row, col, d);
        l
    } else {
        let (l, d) = nll(F::one() - p, eps);
        // d/dp of -ln(1-p) = -d where d = d/dq of -ln(q) at q = 1-p
        grad.set(POLE, row, col, -d);
        l
    };
    (loss, grad)
}

/// Point-level term: `-sum ln S_pole` over annotated pole pixels.
pub fn point_level_loss<F: Real>(
    s: &ProbabilityMap<F>,
    points: &[PixelPoint],
    config: &LossConfig,
) -> Result<(F, Raster<F>)> {
    let eps = F::of(config.epsilon);
    let (w, h) = (s.width(), s.height());
    let mut grad = s.raster().like(F::zero());
    let mut loss = F::zero();
    for pt in points {
        if pt.row >= h || pt.col >= w {
            return Err(PgridError::PointOutOfBounds {
                id: pt.id,
                col: pt.col as i64,
                row: pt.row as i64,
                width: w,
                height: h,
            });
        }
        let (l, d) = nll(s.pole(pt.row, pt.col), eps);
        loss = loss + l;
        let cur = grad.get(POLE, pt.row, pt.col);
        grad.set(POLE, pt.row, pt.col, cur + d);
    }
    Ok((loss, grad))
}

fn blobs_of<F: Real>(s: &ProbabilityMap<F>, fg_threshold: f64) -> Result<(Raster<u8>, BlobLabels)> {
    let mask = threshold_mask(s.raster(), POLE, fg_threshold);
    let blobs = connected_components(&mask, Connectivity::Eight)?;
    Ok((mask, blobs))
}

fn group_points_by_blob(blobs: &BlobLabels, points: &[PixelPoint]) -> BTreeMap<u32, Vec<PixelPoint>> {
    let mut groups: BTreeMap<u32, Vec<PixelPoint>> = BTreeMap::new();
    for &pt in points {
        if pt.row < blobs.labels.height() && pt.col < blobs.labels.width() {
            let label = blobs.label(pt.row, pt.col);
            if label > 0 {
                groups.entry(label).or_default().push(pt);
            }
        }
    }
    groups
}

fn split_level_with_blobs<F: Real>(
    s: &ProbabilityMap<F>,
    blobs: &BlobLabels,
    points: &[PixelPoint],
    config: &LossConfig,
) -> Result<(F, Raster<F>, Raster<u8>)> {
    let eps = F::of(config.epsilon);
    let mut grad = s.raster().like(F::zero());
    let mut boundaries = Raster::filled(s.width(), s.height(), 1, 0u8, *s.raster().georef());
    let mut loss = F::zero();

    // inverted pole probability floods from low (confident pole) to high
    let topo = {
        let mut t = Raster::filled(s.width(), s.height(), 1, F::zero(), *s.raster().georef());
        let pole = s.raster().channel(POLE);
        for (o, &p) in t.channel_mut(0).iter_mut().zip(pole.iter()) {
            *o = F::one() - p;
        }
        t
    };

    for (label, blob_points) in group_points_by_blob(blobs, points) {
        let n_b = blob_points.len();
        if n_b < 2 {
            continue;
        }
        // distinct seed pixels in deterministic order; two annotations on one
        // pixel cannot be split apart
        let seeds: Vec<(usize, usize)> = blob_points
            .iter()
            .map(|p| (p.row, p.col))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if seeds.len() < 2 {
            continue;
        }
        let blob_mask = blobs.labels.map(|l| u8::from(l == label));
        let shed = watershed(&topo, &seeds, &blob_mask)?;
        let weight = F::of(n_b as f64);
        for (row, col) in shed.ridge_pixels() {
            boundaries.set(0, row, col, 1);
            let (l, d) = nll(s.background(row, col), eps);
            loss = loss + weight * l;
            let cur = grad.get(BACKGROUND, row, col);
            grad.set(BACKGROUND, row, col, cur + weight * d);
        }
    }
    Ok((loss, grad, boundaries))
}

/// Split-level term: for every thresholded blob holding two or more annotated
/// poles, the watershed ridge between them (topography `1 - S_pole`) is
/// pushed towards background, weighted by the number of poles in the blob.
/// Also returns the union of ridge pixels as a boundary mask.
pub fn split_level_loss<F: Real>(
    s: &ProbabilityMap<F>,
    points: &[PixelPoint],
    config: &LossConfig,
) -> Result<(F, Raster<F>, Raster<u8>)> {
    let (_, blobs) = blobs_of(s, config.fg_threshold)?;
    split_level_with_blobs(s, &blobs, points, config)
}

fn false_positive_with_blobs<F: Real>(
    s: &ProbabilityMap<F>,
    blobs: &BlobLabels,
    points: &[PixelPoint],
    config: &LossConfig,
) -> (F, Raster<F>) {
    let eps = F::of(config.epsilon);
    let mut grad = s.raster().like(F::zero());
    let mut loss = F::zero();
    let pixel_points: Vec<(usize, usize)> = points.iter().map(|p| (p.row, p.col)).collect();
    let counts = blobs.contained_count(&pixel_points);
    let (w, h) = (s.width(), s.height());
    for row in 0..h {
        for col in 0..w {
            let label = blobs.label(row, col);
            if label == 0 || counts[(label - 1) as usize] > 0 {
                continue;
            }
            let (l, d) = nll(s.background(row, col), eps);
            loss = loss + l;
            grad.set(BACKGROUND, row, col, d);
        }
    }
    (loss, grad)
}

/// False-positive term: background NLL over every pixel of blobs containing
/// no annotated pole.
pub fn false_positive_loss<F: Real>(
    s: &ProbabilityMap<F>,
    points: &[PixelPoint],
    config: &LossConfig,
) -> Result<(F, Raster<F>)> {
    let (_, blobs) = blobs_of(s, config.fg_threshold)?;
    Ok(false_positive_with_blobs(s, &blobs, points, config))
}

/// Hard-negative term: background NLL at annotated non-pole points, scaled by
/// `lambda_hard_neg`. The returned loss already carries the weight.
pub fn hard_negative_loss<F: Real>(
    s: &ProbabilityMap<F>,
    negatives: &[PixelPoint],
    config: &LossConfig,
) -> Result<(F, Raster<F>)> {
    let eps = F::of(config.epsilon);
    let lambda = F::of(config.lambda_hard_neg);
    let (w, h) = (s.width(), s.height());
    let mut grad = s.raster().like(F::zero());
    let mut loss = F::zero();
    for pt in negatives {
        if pt.row >= h || pt.col >= w {
            return Err(PgridError::PointOutOfBounds {
                id: pt.id,
                col: pt.col as i64,
                row: pt.row as i64,
                width: w,
                height: h,
            });
        }
        let (l, d) = nll(s.background(pt.row, pt.col), eps);
        loss = loss + lambda * l;
        let cur = grad.get(BACKGROUND, pt.row, pt.col);
        grad.set(BACKGROUND, pt.row, pt.col, cur + lambda * d);
    }
    Ok((loss, grad))
}

/// All loss terms plus the gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown<F> {
    pub image_level: F,
    pub point_level: F,
    pub split_level: F,
    pub false_positive: F,
    pub hard_negative: F,
    pub total: F,
    pub grad_logits: Raster<F>,
    /// Pixel that carried the image-level term.
    pub argmax_pixel: (usize, usize),
    /// Binarized pole channel used for blob analysis.
    pub fg_mask: Raster<u8>,
    /// Watershed ridges that received split-level loss.
    pub boundaries: Raster<u8>,
}

/// Evaluates the full loss on a two-channel logits raster and returns the
/// exact analytic gradient of the total with respect to the logits.
pub fn composite_loss<F: Real>(
    logits: &Raster<F>,
    pole_points: &[PixelPoint],
    negative_points: &[PixelPoint],
    config: &LossConfig,
) -> Result<LossBreakdown<F>> {
    let s = ProbabilityMap::from_logits(logits)?;
    let (fg_mask, blobs) = blobs_of(&s, config.fg_threshold)?;

    let has_pole = !pole_points.is_empty();
    let argmax_pixel = s.pole_argmax();
    let (l_image, g_image) = image_level_loss(&s, has_pole, config);
    let (l_point, g_point) = point_level_loss(&s, pole_points, config)?;
    let (l_split, g_split, boundaries) = split_level_with_blobs(&s, &blobs, pole_points, config)?;
    let (l_fp, g_fp) = false_positive_with_blobs(&s, &blobs, pole_points, config);
    let (l_hn, g_hn) = hard_negative_loss(&s, negative_points, config)?;

    // chain d(total)/dS through the per-pixel softmax jacobian
    let (w, h) = (s.width(), s.height());
    let mut grad_logits = logits.like(F::zero());
    for i in 0..w * h {
        let gs_bg = g_image.channel(BACKGROUND)[i]
            + g_point.channel(BACKGROUND)[i]
            + g_split.channel(BACKGROUND)[i]
            + g_fp.channel(BACKGROUND)[i]
            + g_hn.channel(BACKGROUND)[i];
        let gs_pole = g_image.channel(POLE)[i]
            + g_point.channel(POLE)[i]
            + g_split.channel(POLE)[i]
            + g_fp.channel(POLE)[i]
            + g_hn.channel(POLE)[i];
        let s_bg = s.raster().channel(BACKGROUND)[i];
        let s_pole = s.raster().channel(POLE)[i];
        let dot = gs_bg * s_bg + gs_pole * s_pole;
        grad_logits.channel_mut(BACKGROUND)[i] = s_bg * (gs_bg - dot);
        grad_logits.channel_mut(POLE)[i] = s_pole * (gs_pole - dot);
    }

    Ok(LossBreakdown {
        image_level: l_image,
        point_level: l_point,
        split_level: l_split,
        false_positive: l_fp,
        hard_negative: l_hn,
        total: l_image + l_point + l_split + l_fp + l_hn,
        grad_logits,
        argmax_pixel,
        fg_mask,
        boundaries,
    })
}

/// Outcome of a finite-difference gradient verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates excluded because a discrete structure (pole argmax, blob
    /// mask, or watershed ridge set) switched under the probe.
    pub skipped: usize,
}

fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-12);
    (a - b).abs() / denom
}

/// Central-difference check of `composite_loss` gradients with respect to
/// every logit. Coordinates where the probe flips a discrete structure are
/// reported as skipped rather than checked.
pub fn gradcheck_logits<F: Real>(
    logits: &Raster<F>,
    pole_points: &[PixelPoint],
    negative_points: &[PixelPoint],
    config: &LossConfig,
    h: f64,
) -> Result<GradCheckReport> {
    let base = composite_loss(logits, pole_points, negative_points, config)?;
    let step = F::of(h);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut z = logits.clone();
    for i in 0..logits.data().len() {
        let orig = z.data()[i];
        z.data_mut()[i] = orig + step;
        let plus = composite_loss(&z, pole_points, negative_points, config)?;
        z.data_mut()[i] = orig - step;
        let minus = composite_loss(&z, pole_points, negative_points, config)?;
        z.data_mut()[i] = orig;

        let structure_stable = plus.argmax_pixel == minus.argmax_pixel
            && plus.fg_mask == minus.fg_mask
            && plus.boundaries == minus.boundaries;
        if !structure_stable {
            report.skipped += 1;
            continue;
        }
        let fd = (plus.total.as_f64() - minus.total.as_f64()) / (2.0 * h);
        let analytic = base.grad_logits.data()[i].as_f64();
        report.max_rel_error = report.max_rel_error.max(rel_err(analytic, fd));
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::AffineGeoref;
    use rand::{Rng, SeedableRng};

    fn uniform_map(w: usize, h: usize, pole_p: f64) -> ProbabilityMap<f64> {
        let mut r = Raster::filled(w, h, 2, 0.0f64, AffineGeoref::identity());
        for i in 0..w * h {
            r.channel_mut(BACKGROUND)[i] = 1.0 - pole_p;
            r.channel_mut(POLE)[i] = pole_p;
        }
        ProbabilityMap::new(r).unwrap()
    }

    fn pt(id: u64, row: usize, col: usize) -> PixelPoint {
        PixelPoint { id, row, col }
    }

    #[test]
    fn probability_map_validation() {
        let mut r = Raster::filled(2, 2, 2, 0.5f64, AffineGeoref::identity());
        assert!(ProbabilityMap::new(r.clone()).is_ok());
        r.set(POLE, 0, 0, 0.7);
        assert!(ProbabilityMap::new(r).is_err());
    }

    #[test]
    fn image_loss_confident_pole_is_near_zero() {
        let s = uniform_map(4, 4, 1.0 - 1e-7);
        let cfg = LossConfig::default();
        let (l, _) = image_level_loss(&s, true, &cfg);
        assert!(l < 1e-6);
    }

    #[test]
    fn image_loss_no_pole_at_half() {
        let s = uniform_map(4, 4, 0.5);
        let cfg = LossConfig::default();
        let (l, _) = image_level_loss(&s, false, &cfg);
        // -ln(1 - 0.5)
        assert!((l - (-(0.5f64.ln()))).abs() < 1e-12);
    }

    #[test]
    fn image_loss_tie_breaks_row_major() {
        let s = uniform_map(4, 4, 0.5);
        let cfg = LossConfig::default();
        let (l, g) = image_level_loss(&s, true, &cfg);
        assert!((l - 0.5f64.ln().abs()).abs() < 1e-12);
        // gradient only at pixel (0,0)
        let nonzero: Vec<usize> = g
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, vec![g.idx(POLE, 0, 0)]);
    }

    #[test]
    fn point_loss_examples() {
        let cfg = LossConfig::default();
        let s = uniform_map(8, 8, 0.9);
        let (l, _) = point_level_loss(&s, &[], &cfg).unwrap();
        assert_eq!(l, 0.0);
        let (l, _) = point_level_loss(&s, &[pt(0, 1, 1), pt(1, 5, 2)], &cfg).unwrap();
        // -2 ln 0.9
        assert!((l - (-2.0 * 0.9f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn point_loss_epsilon_clamp_is_finite() {
        let cfg = LossConfig::default();
        let s = uniform_map(4, 4, 0.0);
        let (l, _) = point_level_loss(&s, &[pt(0, 0, 0)], &cfg).unwrap();
        assert!((l - (-(1e-7f64.ln()))).abs() < 1e-9);
        assert!(l.is_finite());
    }

    #[test]
    fn point_loss_out_of_bounds_names_point() {
        let cfg = LossConfig::default();
        let s = uniform_map(4, 4, 0.5);
        match point_level_loss(&s, &[pt(42, 9, 0)], &cfg) {
            Err(PgridError::PointOutOfBounds { id: 42, .. }) => {}
            other => panic!("expected PointOutOfBounds, got {other:?}"),
        }
    }

    /// Dumbbell: two 3x3 squares joined by a one-pixel bridge. The bridge
    /// column becomes the watershed ridge between the two annotated poles.
    fn dumbbell() -> (ProbabilityMap<f64>, Vec<PixelPoint>) {
        let (w, h) = (7usize, 3usize);
        let mut r = Raster::filled(w, h, 2, 0.0f64, AffineGeoref::identity());
        for i in 0..w * h {
            r.channel_mut(BACKGROUND)[i] = 0.9;
            r.channel_mut(POLE)[i] = 0.1;
        }
        for row in 0..3 {
            for col in [0, 1, 2, 4, 5, 6] {
                r.set(POLE, row, col, 0.9);
                r.set(BACKGROUND, row, col, 0.1);
            }
        }
        // bridge pixel (1,3): exactly at threshold, background 0.5
        r.set(POLE, 1, 3, 0.5);
        r.set(BACKGROUND, 1, 3, 0.5);
        let s = ProbabilityMap::new(r).unwrap();
        (s, vec![pt(0, 1, 1), pt(1, 1, 5)])
    }

    #[test]
    fn split_loss_dumbbell_matches_formula() {
        let cfg = LossConfig::default();
        let (s, points) = dumbbell();
        let (l, _, boundaries) = split_level_loss(&s, &points, &cfg).unwrap();
        // single ridge pixel with background 0.5, weighted by 2 poles
        assert_eq!(boundaries.count_ones(), 1);
        assert_eq!(boundaries.get(0, 1, 3), 1);
        assert!((l - 2.0 * -(0.5f64.ln())).abs() < 1e-12, "loss {l}");
    }

    #[test]
    fn split_loss_zero_when_blobs_singleton() {
        let cfg = LossConfig::default();
        let (s, _) = dumbbell();
        // one point per blob side is still one blob; single point -> 0
        let (l, _, _) = split_level_loss(&s, &[pt(0, 1, 1)], &cfg).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn split_loss_decreases_as_ridge_background_rises() {
        // threshold low enough that the bridge stays in the blob while its
        // background probability moves
        let cfg = LossConfig {
            fg_threshold: 0.3,
            ..LossConfig::default()
        };
        let (s, points) = dumbbell();
        let (l_low, _, _) = split_level_loss(&s, &points, &cfg).unwrap();
        let mut raster = s.raster().clone();
        raster.set(POLE, 1, 3, 0.35);
        raster.set(BACKGROUND, 1, 3, 0.65);
        let s2 = ProbabilityMap::new(raster).unwrap();
        let (l_high, _, _) = split_level_loss(&s2, &points, &cfg).unwrap();
        assert!(
            l_high < l_low,
            "raising ridge background should lower the loss: {l_high} !< {l_low}"
        );
    }

    #[test]
    fn false_positive_loss_examples() {
        let cfg = LossConfig::default();
        // no blobs at all
        let s = uniform_map(4, 4, 0.1);
        let (l, _) = false_positive_loss(&s, &[], &cfg).unwrap();
        assert_eq!(l, 0.0);

        // one 5-pixel blob without a point, background 0.8 inside
        let mut r = Raster::filled(8, 8, 2, 0.0f64, AffineGeoref::identity());
        for i in 0..64 {
            r.channel_mut(BACKGROUND)[i] = 0.95;
            r.channel_mut(POLE)[i] = 0.05;
        }
        for col in 2..7 {
            r.set(POLE, 4, col, 0.2);
            r.set(BACKGROUND, 4, col, 0.8);
        }
        // a pixel above threshold so the blob actually exists
        for col in 2..7 {
            r.set(POLE, 4, col, 0.6);
            r.set(BACKGROUND, 4, col, 0.4);
        }
        let s = ProbabilityMap::new(r).unwrap();
        let (l, _) = false_positive_loss(&s, &[], &cfg).unwrap();
        assert!((l - 5.0 * -(0.4f64.ln())).abs() < 1e-12);

        // blob containing a point contributes nothing
        let (l, _) = false_positive_loss(&s, &[pt(0, 4, 3)], &cfg).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn false_positive_invariant_to_pointed_blob_values() {
        let cfg = LossConfig::default();
        let mut r = Raster::filled(8, 8, 2, 0.0f64, AffineGeoref::identity());
        for i in 0..64 {
            r.channel_mut(BACKGROUND)[i] = 0.9;
            r.channel_mut(POLE)[i] = 0.1;
        }
        // pointed blob at rows 1..3, pointless blob at row 6
        for row in 1..3 {
            for col in 1..3 {
                r.set(POLE, row, col, 0.7);
                r.set(BACKGROUND, row, col, 0.3);
            }
        }
        for col in 5..8 {
            r.set(POLE, 6, col, 0.8);
            r.set(BACKGROUND, 6, col, 0.2);
        }
        let s1 = ProbabilityMap::new(r.clone()).unwrap();
        let (l1, _) = false_positive_loss(&s1, &[pt(0, 1, 1)], &cfg).unwrap();
        // change values inside the pointed blob only
        r.set(POLE, 2, 2, 0.99);
        r.set(BACKGROUND, 2, 2, 0.01);
        let s2 = ProbabilityMap::new(r).unwrap();
        let (l2, _) = false_positive_loss(&s2, &[pt(0, 1, 1)], &cfg).unwrap();
        assert_eq!(l1, l2);
    }

    #[test]
    fn hard_negative_loss_examples() {
        let cfg = LossConfig::default();
        let s = uniform_map(6, 6, 0.1);
        let (l, _) = hard_negative_loss(&s, &[], &cfg).unwrap();
        assert_eq!(l, 0.0);
        let negs = [pt(0, 0, 0), pt(1, 2, 3), pt(2, 5, 5)];
        let (l, _) = hard_negative_loss(&s, &negs, &cfg).unwrap();
        assert!((l - 3.0 * -(0.9f64.ln())).abs() < 1e-12);

        let cfg0 = LossConfig {
            lambda_hard_neg: 0.0,
            ..LossConfig::default()
        };
        let (l0, _) = hard_negative_loss(&s, &negs, &cfg0).unwrap();
        assert_eq!(l0, 0.0);
    }

    #[test]
    fn composite_confident_background_near_zero() {
        let cfg = LossConfig::default();
        let mut z = Raster::filled(8, 8, 2, 0.0f64, AffineGeoref::identity());
        for i in 0..64 {
            z.channel_mut(BACKGROUND)[i] = 20.0;
        }
        let b = composite_loss(&z, &[], &[], &cfg).unwrap();
        assert!(b.total < 1e-6, "total {}", b.total);
    }

    #[test]
    fn composite_components_sum_to_total() {
        let cfg = LossConfig::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let data: Vec<f64> = (0..2 * 12 * 12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z = Raster::from_data(12, 12, 2, data, AffineGeoref::identity()).unwrap();
        let poles = [pt(0, 3, 4), pt(1, 8, 2)];
        let negs = [pt(10, 6, 9)];
        let b = composite_loss(&z, &poles, &negs, &cfg).unwrap();
        let sum =
            b.image_level + b.point_level + b.split_level + b.false_positive + b.hard_negative;
        assert!((b.total - sum).abs() <= 1e-9);
        assert!(b.total.is_finite() && b.total >= 0.0);
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let cfg = LossConfig::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(97);
        for case in 0..10 {
            let data: Vec<f64> = (0..2 * 8 * 8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z = Raster::from_data(8, 8, 2, data, AffineGeoref::identity()).unwrap();
            let poles = [
                pt(0, rng.random_range(0..8), rng.random_range(0..8)),
                pt(1, rng.random_range(0..8), rng.random_range(0..8)),
            ];
            let negs = [pt(10, rng.random_range(0..8), rng.random_range(0..8))];
            let report = gradcheck_logits(&z, &poles, &negs, &cfg, 1e-4).unwrap();
            assert!(
                report.max_rel_error <= 1e-4,
                "case {case}: rel err {}",
                report.max_rel_error
            );
            assert!(report.checked > 0);
        }
    }

    #[test]
    fn all_components_nonnegative_and_finite_on_random_input() {
        let cfg = LossConfig::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let data: Vec<f64> = (0..2 * 10 * 10)
                .map(|_| rng.random_range(-30.0..30.0))
                .collect();
            let z = Raster::from_data(10, 10, 2, data, AffineGeoref::identity()).unwrap();
            let poles = [pt(0, rng.random_range(0..10), rng.random_range(0..10))];
            let b = composite_loss(&z, &poles, &[], &cfg).unwrap();
            for v in [
                b.image_level,
                b.point_level,
                b.split_level,
                b.false_positive,
                b.hard_negative,
                b.total,
            ] {
                assert!(v.is_finite() && v >= 0.0, "component {v}");
            }
        }
    }
}
