//! Synthetic overhead scenes with exact ground truth: a tree-structured pole
//! network, thin dark line strokes with a visibility knob, bright pole heads
//! with calibrated shadow lengths, and confusable distractors (fences, trees,
//! line-less poles) recorded as hard negatives.
//!
//! Shadow lengths follow a lognormal whose parameters are solved from two
//! quantile targets (by default 28% of shadows under 5 m and 90% at or under
//! 10 m). Generation is fully deterministic per seed.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::geo::{
    geojson, AffineGeoref, AnnotatedPoint, PointAnnotations, Polyline, PolylineSet, Raster,
};
use crate::poleloss::{ProbabilityMap, BACKGROUND, POLE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Scene extent in meters (width, height).
    pub extent_m: [f64; 2],
    /// Ground resolution in meters per pixel.
    pub resolution_m: f64,
    /// Pole-to-pole span range in meters.
    pub pole_spacing_m: [f64; 2],
    /// Poles to aim for; derived from the extent when absent.
    pub target_pole_count: Option<usize>,
    /// Shadow direction, degrees clockwise from north.
    pub shadow_azimuth_deg: f64,
    /// Calibration target: probability of a shadow shorter than 5 m.
    pub shadow_p_under_5m: f64,
    /// Calibration target: probability of a shadow of 10 m or less.
    pub shadow_p_under_10m: f64,
    /// Probability that a grid span is visibly rendered.
    pub line_visibility: f64,
    pub fences_per_km2: f64,
    pub trees_per_km2: f64,
    pub lone_poles_per_km2: f64,
    /// Additive Gaussian texture noise on each channel.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            extent_m: [300.0, 300.0],
            resolution_m: 0.06,
            pole_spacing_m: [25.0, 40.0],
            target_pole_count: None,
            shadow_azimuth_deg: 135.0,
            shadow_p_under_5m: 0.28,
            shadow_p_under_10m: 0.90,
            line_visibility: 0.9,
            fences_per_km2: 25.0,
            trees_per_km2: 60.0,
            lone_poles_per_km2: 15.0,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(PgridError::InvalidConfig { reason });
        if !(self.resolution_m > 0.0) {
            return bad(format!("resolution {} must be positive", self.resolution_m));
        }
        if !(self.pole_spacing_m[0] > 0.0 && self.pole_spacing_m[0] <= self.pole_spacing_m[1]) {
            return bad(format!("spacing range {:?} invalid", self.pole_spacing_m));
        }
        if !(0.0 < self.shadow_p_under_5m
            && self.shadow_p_under_5m < self.shadow_p_under_10m
            && self.shadow_p_under_10m < 1.0)
        {
            return bad(format!(
                "shadow quantiles ({}, {}) must satisfy 0 < p5 < p10 < 1",
                self.shadow_p_under_5m, self.shadow_p_under_10m
            ));
        }
        if !(0.0..=1.0).contains(&self.line_visibility) {
            return bad(format!("visibility {} outside [0,1]", self.line_visibility));
        }
        for (name, d) in [
            ("fences_per_km2", self.fences_per_km2),
            ("trees_per_km2", self.trees_per_km2),
            ("lone_poles_per_km2", self.lone_poles_per_km2),
        ] {
            if d < 0.0 {
                return bad(format!("{name} = {d} must be >= 0"));
            }
        }
        Ok(())
    }

    /// Lognormal (mu, sigma) solved from the two quantile targets.
    pub fn shadow_lognormal(&self) -> (f64, f64) {
        let z1 = inv_norm_cdf(self.shadow_p_under_5m);
        let z2 = inv_norm_cdf(self.shadow_p_under_10m);
        let sigma = (10.0f64.ln() - 5.0f64.ln()) / (z2 - z1);
        let mu = 5.0f64.ln() - sigma * z1;
        (mu, sigma)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PgridError::io(path, e))?;
        let config: SceneConfig =
            serde_json::from_str(&text).map_err(|e| PgridError::json(path, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).map_err(|e| PgridError::json(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| PgridError::io(path, e))
    }
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9 — far tighter than the +-0.03 calibration window).
pub fn inv_norm_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// A generated scene with full ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub seed: u64,
    /// Three-channel imagery in [0, 1].
    pub image: Raster<f32>,
    /// Pixels where a line stroke is actually visible (pole heads excluded).
    pub line_mask: Raster<u8>,
    pub poles: PointAnnotations,
    pub lines: PolylineSet,
    pub negatives: PointAnnotations,
    /// Tree edges as (pole id, pole id) spans.
    pub edges: Vec<(u64, u64)>,
}

const MARGIN_M: f64 = 6.0;
const POLE_COLOR: [f32; 3] = [0.86, 0.83, 0.78];
const LINE_COLOR: [f32; 3] = [0.10, 0.10, 0.12];
const FENCE_LINE_COLOR: [f32; 3] = [0.32, 0.30, 0.28];
const FENCE_POST_COLOR: [f32; 3] = [0.76, 0.74, 0.70];
const SHADOW_COLOR: [f32; 3] = [0.20, 0.19, 0.18];
const TREE_COLOR: [f32; 3] = [0.16, 0.28, 0.13];
const BASE_COLOR: [f32; 3] = [0.45, 0.42, 0.38];

struct Painter {
    image: Raster<f32>,
    mask: Raster<u8>,
    georef: AffineGeoref,
}

impl Painter {
    fn stroke(&mut self, a: [f64; 2], b: [f64; 2], width_px: f64, color: [f32; 3], record: bool) {
        let georef = self.georef;
        let radius = 0.5 * width_px * georef.pixel_size();
        let (w, h) = (self.image.width(), self.image.height());
        let bbox = [
            a[0].min(b[0]) - radius,
            a[1].min(b[1]) - radius,
            a[0].max(b[0]) + radius,
            a[1].max(b[1]) + radius,
        ];
        let (c0, r0) = georef.world_to_pixel(bbox[0], bbox[3]);
        let (c1, r1) = georef.world_to_pixel(bbox[2], bbox[1]);
        let c_lo = c0.floor().max(0.0) as usize;
        let r_lo = r0.floor().max(0.0) as usize;
        let c_hi = (c1.ceil().max(0.0) as usize).min(w.saturating_sub(1));
        let r_hi = (r1.ceil().max(0.0) as usize).min(h.saturating_sub(1));
        for row in r_lo..=r_hi.min(h - 1) {
            for col in c_lo..=c_hi {
                let (x, y) = georef.pixel_center(col, row);
                if crate::geo::geom::dist_point_segment([x, y], a, b) <= radius {
                    for ch in 0..3 {
                        self.image.set(ch, row, col, color[ch]);
                    }
                    if record {
                        self.mask.set(0, row, col, 1);
                    }
                }
            }
        }
    }

    /// Draws a filled disc.
    fn disc(&mut self, center: [f64; 2], radius_m: f64, color: [f32; 3]) {
        let georef = self.georef;
        let (w, h) = (self.image.width(), self.image.height());
        let (c0, r0) = georef.world_to_pixel(center[0] - radius_m, center[1] + radius_m);
        let (c1, r1) = georef.world_to_pixel(center[0] + radius_m, center[1] - radius_m);
        let c_lo = c0.floor().max(0.0) as usize;
        let r_lo = r0.floor().max(0.0) as usize;
        let c_hi = (c1.ceil().max(0.0) as usize).min(w.saturating_sub(1));
        let r_hi = (r1.ceil().max(0.0) as usize).min(h.saturating_sub(1));
        for row in r_lo..=r_hi.min(h - 1) {
            for col in c_lo..=c_hi {
                let (x, y) = georef.pixel_center(col, row);
                let d = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
                if d <= radius_m {
                    for ch in 0..3 {
                        self.image.set(ch, row, col, color[ch]);
                    }
                }
            }
        }
    }
}

/// Deterministically generates a scene. `seed` overrides `config.seed`.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let [extent_w, extent_h] = config.extent_m;
    let [s_min, s_max] = config.pole_spacing_m;
    if extent_w < 2.0 * MARGIN_M + s_min || extent_h < 2.0 * MARGIN_M + s_min {
        return Err(PgridError::ExtentTooSmall {
            width: extent_w,
            height: extent_h,
            min_span: s_min,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let res = config.resolution_m;
    let width = (extent_w / res).round() as usize;
    let height = (extent_h / res).round() as usize;
    let georef = AffineGeoref::north_up(0.0, extent_h, res, 0);

    // -------- pole network: chains grown from existing poles form a tree
    let area_km2 = extent_w * extent_h / 1.0e6;
    let target = config
        .target_pole_count
        .unwrap_or_else(|| ((extent_w * extent_h) / 2500.0).round().max(8.0) as usize);
    let mut poles: Vec<[f64; 2]> = Vec::new();
    let mut degrees: Vec<u32> = Vec::new();
    let mut edges: Vec<(u64, u64)> = Vec::new();
    let in_bounds = |p: [f64; 2]| {
        p[0] >= MARGIN_M
            && p[0] <= extent_w - MARGIN_M
            && p[1] >= MARGIN_M
            && p[1] <= extent_h - MARGIN_M
    };

    let root = [
        rng.random_range(extent_w * 0.3..extent_w * 0.7),
        rng.random_range(extent_h * 0.3..extent_h * 0.7),
    ];
    poles.push(root);
    degrees.push(0);

    let mut attempts = 0;
    while poles.len() < target && attempts < 60 {
        attempts += 1;
        // anchor on a pole that still has room for another branch
        let candidates: Vec<usize> = (0..poles.len()).filter(|&i| degrees[i] < 3).collect();
        if candidates.is_empty() {
            break;
        }
        let anchor = candidates[rng.random_range(0..candidates.len())];
        let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
        let chain_len = rng.random_range(3..=8usize);
        let mut prev = anchor;
        for _ in 0..chain_len {
            if poles.len() >= target {
                break;
            }
            let spacing = rng.random_range(s_min..=s_max);
            heading += rng.random_range(-0.35..0.35);
            let next = [
                poles[prev][0] + spacing * heading.cos(),
                poles[prev][1] + spacing * heading.sin(),
            ];
            if !in_bounds(next) {
                break;
            }
            // keep the network sparse: no pole closer than half a span
            let crowded = poles
                .iter()
                .any(|p| ((p[0] - next[0]).powi(2) + (p[1] - next[1]).powi(2)).sqrt() < 0.5 * s_min);
            if crowded {
                break;
            }
            // keep the embedding planar with clearance so rendered spans
            // never merge or cross: spans sharing the anchor must leave at a
            // clear angle, all others stay well apart
            let candidate = (poles[prev], next);
            let mut blocked = false;
            for &(ea, eb) in &edges {
                let (pa, pb) = (poles[ea as usize], poles[eb as usize]);
                let shares_anchor = ea as usize == prev || eb as usize == prev;
                if shares_anchor {
                    let other = if ea as usize == prev { pb } else { pa };
                    let v1 = [other[0] - poles[prev][0], other[1] - poles[prev][1]];
                    let v2 = [next[0] - poles[prev][0], next[1] - poles[prev][1]];
                    let dot = v1[0] * v2[0] + v1[1] * v2[1];
                    let cross = v1[0] * v2[1] - v1[1] * v2[0];
                    if cross.atan2(dot).abs() < 0.5 {
                        blocked = true;
                        break;
                    }
                } else if crate::geo::geom::dist_segment_segment(candidate.0, candidate.1, pa, pb)
                    < 4.0
                {
                    blocked = true;
                    break;
                }
            }
            if !blocked {
                // the span must also clear unrelated poles: their bright
                // heads erase the line mask and would cut the rendered span
                blocked = poles.iter().enumerate().any(|(k, &p)| {
                    k != prev
                        && crate::geo::geom::dist_point_segment(p, candidate.0, candidate.1) < 4.0
                });
            }
            if blocked {
                break;
            }
            let id = poles.len();
            poles.push(next);
            degrees.push(1);
            degrees[prev] += 1;
            edges.push((prev as u64, id as u64));
            prev = id;
        }
    }
    if poles.len() < 2 {
        return Err(PgridError::ExtentTooSmall {
            width: extent_w,
            height: extent_h,
            min_span: s_min,
        });
    }

    // -------- background with texture noise
    let mut image = Raster::filled(width, height, 3, 0.0f32, georef);
    let noise = Normal::new(0.0f64, config.noise_sigma.max(1e-12)).unwrap();
    for ch in 0..3 {
        let base = BASE_COLOR[ch];
        for v in image.channel_mut(ch).iter_mut() {
            *v = base + noise.sample(&mut rng) as f32;
        }
    }
    let mask = Raster::filled(width, height, 1, 0u8, georef);
    let mut painter = Painter {
        image,
        mask,
        georef,
    };

    let count_of = |rng: &mut ChaCha12Rng, per_km2: f64| -> usize {
        let lambda = per_km2 * area_km2;
        if lambda <= 0.0 {
            0
        } else {
            Poisson::new(lambda).unwrap().sample(rng) as usize
        }
    };
    let (shadow_mu, shadow_sigma) = config.shadow_lognormal();
    let shadow_dist = LogNormal::new(shadow_mu, shadow_sigma).unwrap();
    let az = config.shadow_azimuth_deg.to_radians();
    let shadow_dir = [az.sin(), az.cos()];
    let mut negatives: Vec<AnnotatedPoint> = Vec::new();
    let mut neg_id = 0u64;
    let push_negative = |negatives: &mut Vec<AnnotatedPoint>, neg_id: &mut u64, p: [f64; 2]| {
        negatives.push(AnnotatedPoint::hard_negative(*neg_id, p[0], p[1]));
        *neg_id += 1;
    };

    // -------- distractors: trees, then fences
    for _ in 0..count_of(&mut rng, config.trees_per_km2) {
        let center = [
            rng.random_range(0.0..extent_w),
            rng.random_range(0.0..extent_h),
        ];
        let radius = rng.random_range(1.5..4.0);
        let shade = rng.random_range(-0.03..0.03) as f32;
        let color = [
            TREE_COLOR[0] + shade,
            TREE_COLOR[1] + shade,
            TREE_COLOR[2] + shade,
        ];
        painter.disc(center, radius, color);
        push_negative(&mut negatives, &mut neg_id, center);
    }
    for _ in 0..count_of(&mut rng, config.fences_per_km2) {
        let mut p = [
            rng.random_range(0.0..extent_w),
            rng.random_range(0.0..extent_h),
        ];
        let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
        let segments = rng.random_range(2..=4usize);
        for _ in 0..segments {
            let len = rng.random_range(12.0..30.0);
            heading += rng.random_range(-0.8..0.8);
            let q = [p[0] + len * heading.cos(), p[1] + len * heading.sin()];
            painter.stroke(p, q, 1.0, FENCE_LINE_COLOR, false);
            // periodic posts: bright one-pixel dots, each a hard negative
            let n_posts = (len / 3.5).floor() as usize;
            for k in 0..=n_posts {
                let t = if n_posts == 0 { 0.0 } else { k as f64 / n_posts as f64 };
                let post = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                if in_bounds(post) {
                    painter.disc(post, 0.75 * res, FENCE_POST_COLOR);
                    push_negative(&mut negatives, &mut neg_id, post);
                }
            }
            p = q;
        }
    }

    // -------- lone pole-like distractors: shadow plus bright disc, no lines
    // (kept clear of spans: their discs erase the line mask)
    let span_segments: Vec<([f64; 2], [f64; 2])> = edges
        .iter()
        .map(|&(a, b)| (poles[a as usize], poles[b as usize]))
        .collect();
    let mut lone_discs: Vec<([f64; 2], f64, [f32; 3])> = Vec::new();
    for _ in 0..count_of(&mut rng, config.lone_poles_per_km2) {
        let mut center = [0.0, 0.0];
        let mut placed = false;
        for _ in 0..40 {
            center = [
                rng.random_range(MARGIN_M..extent_w - MARGIN_M),
                rng.random_range(MARGIN_M..extent_h - MARGIN_M),
            ];
            let clear = span_segments
                .iter()
                .all(|&(a, b)| crate::geo::geom::dist_point_segment(center, a, b) >= 5.0);
            if clear {
                placed = true;
                break;
            }
        }
        if !placed {
            continue;
        }
        let len: f64 = shadow_dist.sample(&mut rng);
        let tip = [
            center[0] + len * shadow_dir[0],
            center[1] + len * shadow_dir[1],
        ];
        painter.stroke(center, tip, 1.5, SHADOW_COLOR, false);
        let radius_px = rng.random_range(1.5..2.5);
        lone_discs.push((center, radius_px * res, POLE_COLOR));
        push_negative(&mut negatives, &mut neg_id, center);
    }

    // -------- pole shadows, then line strokes (recorded), then bright heads
    let mut head_discs: Vec<([f64; 2], f64)> = Vec::new();
    for &p in &poles {
        let len: f64 = shadow_dist.sample(&mut rng);
        let tip = [p[0] + len * shadow_dir[0], p[1] + len * shadow_dir[1]];
        painter.stroke(p, tip, 1.5, SHADOW_COLOR, false);
        head_discs.push((p, rng.random_range(1.5..2.5) * res));
    }
    let mut lines = Vec::with_capacity(edges.len());
    // strokes stop short of each pole head so the rendered span masks stay
    // 8-disconnected across poles and each span vectorizes on its own; at a
    // shared pole the trim grows with the sharpest incident angle, keeping
    // the two stroke bodies at least ~3 px apart
    let mut incident: Vec<Vec<[f64; 2]>> = vec![Vec::new(); poles.len()];
    let unit = |from: [f64; 2], to: [f64; 2]| {
        let len = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
        [(to[0] - from[0]) / len, (to[1] - from[1]) / len]
    };
    for &(a, b) in &edges {
        let (pa, pb) = (poles[a as usize], poles[b as usize]);
        incident[a as usize].push(unit(pa, pb));
        incident[b as usize].push(unit(pb, pa));
    }
    let gap_px_at = |pole: usize, dir: [f64; 2]| -> f64 {
        let mut gap = 2.5f64;
        for other in &incident[pole] {
            let dot = dir[0] * other[0] + dir[1] * other[1];
            if dot > 0.999 {
                continue; // the span itself
            }
            let half = ((1.0 - dot.clamp(-1.0, 1.0)) / 2.0).sqrt(); // sin(theta/2)
            if half > 1e-6 {
                gap = gap.max(2.5 / half);
            }
        }
        gap.min(15.0)
    };
    for (i, &(a, b)) in edges.iter().enumerate() {
        let pa = poles[a as usize];
        let pb = poles[b as usize];
        lines.push(Polyline::new(i as u64, vec![pa, pb])?);
        let visible = rng.random_bool(config.line_visibility);
        let width_px = if rng.random_bool(0.5) { 1.0 } else { 2.0 };
        if visible {
            let dir = unit(pa, pb);
            let gap_a = gap_px_at(a as usize, dir) * res;
            let gap_b = gap_px_at(b as usize, [-dir[0], -dir[1]]) * res;
            let ta = [pa[0] + gap_a * dir[0], pa[1] + gap_a * dir[1]];
            let tb = [pb[0] - gap_b * dir[0], pb[1] - gap_b * dir[1]];
            painter.stroke(ta, tb, width_px, LINE_COLOR, true);
        }
    }
    for (center, radius_m, color) in lone_discs {
        painter.disc(center, radius_m, color);
    }
    for &(center, radius_m) in &head_discs {
        painter.disc(center, radius_m, POLE_COLOR);
    }

    // clamp to [0,1] after all compositing
    for v in painter.image.data_mut().iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }

    let pole_points = PointAnnotations::new(
        poles
            .iter()
            .enumerate()
            .map(|(i, &p)| AnnotatedPoint::pole(i as u64, p[0], p[1]))
            .collect(),
    )?;

    let mut effective = config.clone();
    effective.seed = seed;
    Ok(Scene {
        config: effective,
        seed,
        image: painter.image,
        line_mask: painter.mask,
        poles: pole_points,
        lines: PolylineSet::new(lines)?,
        negatives: PointAnnotations::new(negatives)?,
        edges,
    })
}

/// Noiseless upper-bound predictions for pipeline tests: the pole map is hot
/// within 2 px of every ground-truth pole (epsilon-smoothed into a valid
/// probability map) and the line raster is 1 exactly on visibly rendered line
/// pixels.
pub fn oracle_predictions(scene: &Scene) -> Result<(ProbabilityMap<f64>, Raster<f64>)> {
    let georef = *scene.image.georef();
    let (w, h) = (scene.image.width(), scene.image.height());
    let eps = 1e-6;
    let mut raster = Raster::filled(w, h, 2, 0.0f64, georef);
    for i in 0..w * h {
        raster.channel_mut(BACKGROUND)[i] = 1.0 - eps;
        raster.channel_mut(POLE)[i] = eps;
    }
    for p in scene.poles.poles() {
        let (pc, pr) = georef.world_to_pixel(p.x, p.y);
        let r_lo = ((pr - 3.0).floor().max(0.0)) as usize;
        let r_hi = ((pr + 3.0).ceil().max(0.0) as usize).min(h.saturating_sub(1));
        let c_lo = ((pc - 3.0).floor().max(0.0)) as usize;
        let c_hi = ((pc + 3.0).ceil().max(0.0) as usize).min(w.saturating_sub(1));
        for row in r_lo..=r_hi {
            for col in c_lo..=c_hi {
                let d = ((col as f64 + 0.5 - pc).powi(2) + (row as f64 + 0.5 - pr).powi(2)).sqrt();
                if d <= 2.0 {
                    raster.set(POLE, row, col, 1.0 - eps);
                    raster.set(BACKGROUND, row, col, eps);
                }
            }
        }
    }
    let prob = ProbabilityMap::new(raster)?;
    let line = scene.line_mask.map(|v| v as f64);
    Ok((prob, line))
}

/// Scene bundle on disk: `image.pgr`, `poles.geojson`, `lines.geojson`,
/// `negatives.geojson`, `edges.json`, `config.json`.
pub fn write_scene_bundle(scene: &Scene, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| PgridError::io(dir, e))?;
    crate::geo::write_raster(&scene.image, dir.join("image.pgr"))?;
    geojson::write_points(&scene.poles, dir.join("poles.geojson"), None)?;
    geojson::write_polylines(&scene.lines, dir.join("lines.geojson"), None)?;
    geojson::write_points(&scene.negatives, dir.join("negatives.geojson"), None)?;
    let edges_path = dir.join("edges.json");
    let mut text = serde_json::to_string_pretty(&scene.edges)
        .map_err(|e| PgridError::json(&edges_path, e))?;
    text.push('\n');
    fs::write(&edges_path, text).map_err(|e| PgridError::io(&edges_path, e))?;
    scene.config.save(dir.join("config.json"))?;
    Ok(())
}

/// A scene bundle read back from disk (the rendered line mask is not part of
/// the bundle; oracle rasters are written separately when requested).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub config: SceneConfig,
    pub image: Raster<f32>,
    pub poles: PointAnnotations,
    pub lines: PolylineSet,
    pub negatives: PointAnnotations,
    pub edges: Vec<(u64, u64)>,
}

pub fn read_scene_bundle(dir: impl AsRef<Path>) -> Result<SceneBundle> {
    let dir = dir.as_ref();
    let edges_path = dir.join("edges.json");
    let edges_text =
        fs::read_to_string(&edges_path).map_err(|e| PgridError::io(&edges_path, e))?;
    let edges: Vec<(u64, u64)> =
        serde_json::from_str(&edges_text).map_err(|e| PgridError::json(&edges_path, e))?;
    Ok(SceneBundle {
        config: SceneConfig::load(dir.join("config.json"))?,
        image: crate::geo::read_raster(dir.join("image.pgr"))?.expect_f32()?,
        poles: geojson::read_points(dir.join("poles.geojson"))?,
        lines: geojson::read_polylines(dir.join("lines.geojson"))?,
        negatives: geojson::read_points(dir.join("negatives.geojson"))?,
        edges,
    })
}

/// Merges pole and hard-negative annotations into one training layer.
pub fn training_annotations(bundle: &SceneBundle) -> Result<PointAnnotations> {
    let mut points = Vec::new();
    for p in &bundle.poles.points {
        points.push(p.clone());
    }
    let offset = points.iter().map(|p| p.id).max().map_or(0, |m| m + 1);
    for n in &bundle.negatives.points {
        let mut n = n.clone();
        n.id += offset;
        points.push(n);
    }
    PointAnnotations::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> SceneConfig {
        SceneConfig {
            extent_m: [120.0, 120.0],
            resolution_m: 0.25,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn inverse_normal_cdf_reference_values() {
        assert!(inv_norm_cdf(0.5).abs() < 1e-9);
        assert!((inv_norm_cdf(0.975) - 1.959964).abs() < 1e-5);
        assert!((inv_norm_cdf(0.28) + 0.582842).abs() < 1e-5);
        assert!((inv_norm_cdf(0.90) - 1.281552).abs() < 1e-5);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = quick_config();
        let a = generate_scene(&config, 7).unwrap();
        let b = generate_scene(&config, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&config, 8).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn network_is_a_tree_over_poles() {
        let scene = generate_scene(&quick_config(), 3).unwrap();
        let n = scene.poles.len();
        assert_eq!(scene.edges.len(), n - 1, "tree edge count");
        // union-find: no cycles
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for &(a, b) in &scene.edges {
            let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
            assert_ne!(ra, rb, "cycle through edge ({a},{b})");
            parent[ra] = rb;
        }
    }

    #[test]
    fn every_pole_lies_on_a_line() {
        let scene = generate_scene(&quick_config(), 11).unwrap();
        for p in scene.poles.poles() {
            let mut best = f64::INFINITY;
            for l in &scene.lines.lines {
                best = best.min(crate::geo::geom::dist_point_polyline(
                    [p.x, p.y],
                    &l.vertices,
                ));
            }
            assert!(best <= scene.config.resolution_m, "pole {} off-line: {best}", p.id);
        }
    }

    #[test]
    fn full_visibility_renders_every_span() {
        let config = SceneConfig {
            line_visibility: 1.0,
            fences_per_km2: 0.0,
            trees_per_km2: 0.0,
            lone_poles_per_km2: 0.0,
            ..quick_config()
        };
        let scene = generate_scene(&config, 5).unwrap();
        let georef = *scene.image.georef();
        for l in &scene.lines.lines {
            // sample the span midpoint: it must be a recorded line pixel
            // (midpoints are far from the pole discs)
            let (a, b) = (l.vertices[0], l.vertices[1]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let (c, r) = georef.world_to_pixel(mid[0], mid[1]);
            let found = (-2i64..=2).any(|dr| {
                (-2i64..=2).any(|dc| {
                    let (row, col) = (r as i64 + dr, c as i64 + dc);
                    row >= 0
                        && col >= 0
                        && (row as usize) < scene.line_mask.height()
                        && (col as usize) < scene.line_mask.width()
                        && scene.line_mask.get(0, row as usize, col as usize) != 0
                })
            });
            assert!(found, "span {} midpoint not rendered", l.id);
        }
    }

    #[test]
    fn shadow_lengths_hit_calibration_quantiles() {
        let config = SceneConfig::default();
        let (mu, sigma) = config.shadow_lognormal();
        let dist = LogNormal::new(mu, sigma).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(12345);
        let n = 10_000;
        let mut under5 = 0usize;
        let mut under10 = 0usize;
        for _ in 0..n {
            let len: f64 = dist.sample(&mut rng);
            if len < 5.0 {
                under5 += 1;
            }
            if len <= 10.0 {
                under10 += 1;
            }
        }
        let p5 = under5 as f64 / n as f64;
        let p10 = under10 as f64 / n as f64;
        assert!((p5 - 0.28).abs() <= 0.03, "P(<5m) = {p5}");
        assert!((p10 - 0.90).abs() <= 0.03, "P(<=10m) = {p10}");
    }

    #[test]
    fn too_small_extent_errors() {
        let config = SceneConfig {
            extent_m: [20.0, 20.0],
            ..SceneConfig::default()
        };
        assert!(matches!(
            generate_scene(&config, 0),
            Err(PgridError::ExtentTooSmall { .. })
        ));
    }

    #[test]
    fn oracle_map_recovers_every_pole() {
        let scene = generate_scene(&quick_config(), 21).unwrap();
        let (prob, _) = oracle_predictions(&scene).unwrap();
        let found = crate::unify::extract_poles(&prob, 0.5, 4).unwrap();
        assert_eq!(found.len(), scene.poles.len());
        let georef = scene.image.georef();
        for gt in scene.poles.poles() {
            let best = found
                .points
                .iter()
                .map(|p| ((p.x - gt.x).powi(2) + (p.y - gt.y).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(
                best <= georef.pixel_size() + 1e-9,
                "pole {} recovered {best} m away",
                gt.id
            );
        }
    }

    #[test]
    fn scene_bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = generate_scene(&quick_config(), 2).unwrap();
        write_scene_bundle(&scene, dir.path()).unwrap();
        let bundle = read_scene_bundle(dir.path()).unwrap();
        assert_eq!(bundle.image, scene.image);
        assert_eq!(bundle.poles, scene.poles);
        assert_eq!(bundle.lines, scene.lines);
        assert_eq!(bundle.negatives, scene.negatives);
        assert_eq!(bundle.edges, scene.edges);
        assert_eq!(bundle.config.seed, 2);
    }
}
