//! Evaluation mathematics: distance-thresholded matching between ground-truth
//! and predicted poles, precision/recall/F1, average precision, and buffered
//! pixel-level line metrics.

use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::geo::geom::{bbox_intersects, bbox_of, bbox_union};
use crate::geo::{PointAnnotations, PolylineSet, Raster};
use crate::rasterops::buffer_polylines;

/// How predictions may attach to ground-truth poles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchVariant {
    /// One-to-one: each ground truth takes its closest unmatched prediction.
    Strict,
    /// One-to-many: every prediction within the threshold of some ground
    /// truth counts.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt_id: u64,
    pub pred_id: u64,
    pub distance: f64,
}

/// Counts of a matching run at one threshold.
///
/// `true_positives` counts predictions (the precision numerator);
/// `detected_ground_truths` counts ground truths with at least one accepted
/// prediction (the recall numerator). The two coincide for the strict
/// variant, but the one-to-many variant can attach several predictions to one
/// ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub th: f64,
    pub variant: MatchVariant,
    pub pairs: Vec<MatchedPair>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub detected_ground_truths: usize,
}

fn pole_xy(ann: &PointAnnotations) -> Vec<(u64, f64, f64)> {
    ann.poles().map(|p| (p.id, p.x, p.y)).collect()
}

fn euclid(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// One-to-one matching: all candidate pairs within `th` are sorted by
/// (distance, gt id, pred id) and accepted greedily while both sides are
/// unmatched. Unmatched predictions are false positives even when they sit
/// within the threshold of an already-taken ground truth.
pub fn match_strict(gt: &PointAnnotations, pred: &PointAnnotations, th: f64) -> MatchResult {
    let gts = pole_xy(gt);
    let preds = pole_xy(pred);
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &(_, gx, gy)) in gts.iter().enumerate() {
        for (j, &(_, px, py)) in preds.iter().enumerate() {
            let d = euclid(gx, gy, px, py);
            if d <= th {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| gts[a.1].0.cmp(&gts[b.1].0))
            .then_with(|| preds[a.2].0.cmp(&preds[b.2].0))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut pred_taken = vec![false; preds.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in candidates {
        if gt_taken[i] || pred_taken[j] {
            continue;
        }
        gt_taken[i] = true;
        pred_taken[j] = true;
        pairs.push(MatchedPair {
            gt_id: gts[i].0,
            pred_id: preds[j].0,
            distance: d,
        });
    }
    let tp = pairs.len();
    MatchResult {
        th,
        variant: MatchVariant::Strict,
        pairs,
        true_positives: tp,
        false_positives: preds.len() - tp,
        false_negatives: gts.len() - tp,
        detected_ground_truths: tp,
    }
}

/// One-to-many matching: a prediction is a true positive iff it lies within
/// `th` of at least one ground truth (paired with its nearest); a ground
/// truth is detected iff at least one prediction lies within `th`.
pub fn match_all(gt: &PointAnnotations, pred: &PointAnnotations, th: f64) -> MatchResult {
    let gts = pole_xy(gt);
    let preds = pole_xy(pred);
    let mut pairs = Vec::new();
    let mut fp = 0usize;
    let mut gt_detected = vec![false; gts.len()];
    for &(pid, px, py) in &preds {
        let mut best: Option<(f64, usize)> = None;
        for (i, &(_, gx, gy)) in gts.iter().enumerate() {
            let d = euclid(gx, gy, px, py);
            if d <= th {
                // every ground truth within range counts as detected, not
                // just the closest one
                gt_detected[i] = true;
            }
            let better = match best {
                None => true,
                Some((bd, bi)) => d < bd || (d == bd && gts[i].0 < gts[bi].0),
            };
            if better {
                best = Some((d, i));
            }
        }
        match best {
            Some((d, i)) if d <= th => {
                pairs.push(MatchedPair {
                    gt_id: gts[i].0,
                    pred_id: pid,
                    distance: d,
                });
            }
            _ => fp += 1,
        }
    }
    let tp = pairs.len();
    let detected = gt_detected.iter().filter(|&&d| d).count();
    MatchResult {
        th,
        variant: MatchVariant::All,
        pairs,
        true_positives: tp,
        false_positives: fp,
        false_negatives: gts.len() - detected,
        detected_ground_truths: detected,
    }
}

pub fn match_with(
    variant: MatchVariant,
    gt: &PointAnnotations,
    pred: &PointAnnotations,
    th: f64,
) -> MatchResult {
    match variant {
        MatchVariant::Strict => match_strict(gt, pred, th),
        MatchVariant::All => match_all(gt, pred, th),
    }
}

/// Precision, recall, and F1 from raw counts; 0/0 is defined as 0.
pub fn prf(tp: usize, fp: usize, fn_count: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_count);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

impl MatchResult {
    /// Precision from the prediction side, recall from the ground-truth side
    /// (detected / total ground truths). Identical to `prf` on the raw counts
    /// for the strict variant.
    pub fn prf(&self) -> (f64, f64, f64) {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let p = ratio(
            self.true_positives,
            self.true_positives + self.false_positives,
        );
        let r = ratio(
            self.detected_ground_truths,
            self.detected_ground_truths + self.false_negatives,
        );
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f1)
    }
}

/// Average precision with all-point interpolation: predictions are ranked by
/// confidence (descending, ties by id), matched at every prefix, and the
/// precision envelope is integrated over recall steps.
pub fn average_precision(
    gt: &PointAnnotations,
    pred: &PointAnnotations,
    th: f64,
    variant: MatchVariant,
) -> Result<f64> {
    let mut ranked: Vec<&crate::geo::AnnotatedPoint> = pred.poles().collect();
    for p in &ranked {
        if p.confidence.is_none() {
            return Err(PgridError::MissingConfidence { id: p.id });
        }
    }
    ranked.sort_by(|a, b| {
        b.confidence
            .unwrap()
            .partial_cmp(&a.confidence.unwrap())
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });

    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(ranked.len());
    for k in 1..=ranked.len() {
        let prefix = PointAnnotations {
            points: ranked[..k].iter().map(|&p| p.clone()).collect(),
        };
        let m = match_with(variant, gt, &prefix, th);
        let (p, r, _) = m.prf();
        curve.push((r, p));
    }
    if curve.is_empty() {
        return Ok(0.0);
    }

    // precision envelope from the right, integrated over recall increments
    let mut envelope = vec![0.0f64; curve.len()];
    let mut running = 0.0f64;
    for (i, &(_, p)) in curve.iter().enumerate().rev() {
        running = running.max(p);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (i, &(r, _)) in curve.iter().enumerate() {
        ap += (r - prev_r) * envelope[i];
        prev_r = r;
    }
    Ok(ap)
}

/// Unweighted mean of per-region average precisions.
pub fn dmap(
    regions: &[(PointAnnotations, PointAnnotations)],
    th: f64,
    variant: MatchVariant,
) -> Result<f64> {
    if regions.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (gt, pred) in regions {
        total += average_precision(gt, pred, th, variant)?;
    }
    Ok(total / regions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub miou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pixel-level line metrics against ground-truth polylines buffered by
/// `buffer_m` on each side. mIOU is the class mean over {line, background};
/// precision/recall/F1 are for the line class.
pub fn pixel_line_metrics(
    pred_mask: &Raster<u8>,
    gt_lines: &PolylineSet,
    buffer_m: f64,
) -> Result<LineMetrics> {
    pred_mask.ensure_binary_mask()?;
    if !gt_lines.is_empty() {
        let lines_bbox = gt_lines
            .lines
            .iter()
            .filter_map(|l| bbox_of(&l.vertices))
            .reduce(bbox_union)
            .unwrap();
        let raster_bbox = pred_mask.world_bbox();
        if !bbox_intersects(lines_bbox, raster_bbox) {
            return Err(PgridError::ExtentMismatch {
                lines_bbox,
                raster_bbox,
            });
        }
    }
    let gt_mask = buffer_polylines(
        gt_lines,
        buffer_m,
        pred_mask.georef(),
        pred_mask.width(),
        pred_mask.height(),
    );
    let (mut tp, mut fp, mut fn_count, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &g) in pred_mask.data().iter().zip(gt_mask.data().iter()) {
        match (p != 0, g != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_count += 1,
            (false, false) => tn += 1,
        }
    }
    let iou = |inter: usize, union: usize| if union == 0 { 0.0 } else { inter as f64 / union as f64 };
    let iou_line = iou(tp, tp + fp + fn_count);
    let iou_bg = iou(tn, tn + fp + fn_count);
    let (precision, recall, f1) = prf(tp, fp, fn_count);
    Ok(LineMetrics {
        miou: (iou_line + iou_bg) / 2.0,
        precision,
        recall,
        f1,
    })
}

/// One row of the distance-threshold table. Variant columns are optional so
/// a single-variant evaluation can omit the other side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub th: f64,
    #[serde(rename = "P_S", skip_serializing_if = "Option::is_none")]
    pub p_strict: Option<f64>,
    #[serde(rename = "P_A", skip_serializing_if = "Option::is_none")]
    pub p_all: Option<f64>,
    /// Recall from the strict matcher.
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "F1_S", skip_serializing_if = "Option::is_none")]
    pub f1_strict: Option<f64>,
    #[serde(rename = "F1_A", skip_serializing_if = "Option::is_none")]
    pub f1_all: Option<f64>,
}

/// Per-region evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub region: String,
    pub thresholds: Vec<ThresholdMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lines: Option<LineMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dmap: Option<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

/// Evaluates both matching variants at each threshold. The reported recall
/// column comes from the strict matcher; each F1 is the harmonic mean of its
/// own variant's precision and recall.
pub fn evaluate_thresholds(
    gt: &PointAnnotations,
    pred: &PointAnnotations,
    thresholds: &[f64],
) -> Vec<ThresholdMetrics> {
    thresholds
        .iter()
        .map(|&th| {
            let strict = match_strict(gt, pred, th);
            let all = match_all(gt, pred, th);
            let (p_s, r_s, f1_s) = strict.prf();
            let (p_a, _, f1_a) = all.prf();
            ThresholdMetrics {
                th,
                p_strict: Some(p_s),
                p_all: Some(p_a),
                recall: r_s,
                f1_strict: Some(f1_s),
                f1_all: Some(f1_a),
            }
        })
        .collect()
}

/// Flat CSV mirror of a report: one row per threshold, line metrics and DmAP
/// repeated in trailing columns.
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut out = String::from("region,th,P_S,P_A,R,F1_S,F1_A,miou,line_p,line_r,line_f1,dmap\n");
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for t in &report.thresholds {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{},{},{},{},{},{},{}\n",
            report.region,
            t.th,
            fmt_opt(t.p_strict),
            fmt_opt(t.p_all),
            t.recall,
            fmt_opt(t.f1_strict),
            fmt_opt(t.f1_all),
            fmt_opt(report.lines.map(|l| l.miou)),
            fmt_opt(report.lines.map(|l| l.precision)),
            fmt_opt(report.lines.map(|l| l.recall)),
            fmt_opt(report.lines.map(|l| l.f1)),
            fmt_opt(report.dmap),
        ));
    }
    if report.thresholds.is_empty() {
        out.push_str(&format!(
            "{},,,,,,,{},{},{},{},{}\n",
            report.region,
            fmt_opt(report.lines.map(|l| l.miou)),
            fmt_opt(report.lines.map(|l| l.precision)),
            fmt_opt(report.lines.map(|l| l.recall)),
            fmt_opt(report.lines.map(|l| l.f1)),
            fmt_opt(report.dmap),
        ));
    }
    out
}
