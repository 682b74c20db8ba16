//! Post-processing to a vectorized grid layout: pole centroids from the pole
//! probability raster, skeleton polylines and buffered corridor polygons from
//! the line raster, merged into one layered output.
//!
//! The raster-to-vector order is fixed: binarize, skeletonize on the raster,
//! then trace polylines. Poles and lines are layered side by side with no
//! topological joining; `snap_graph` exists as an opt-in reconstruction of
//! the pole graph on clean inputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::geo::geom::simplify_polyline;
use crate::geo::{
    geojson, AffineGeoref, AnnotatedPoint, GridLayout, PointAnnotations, PolygonGeom, Polyline,
    PolylineSet, Provenance, Raster,
};
use crate::poleloss::{ProbabilityMap, POLE};
use crate::rasterops::{
    connected_components, skeleton_to_polylines, skeletonize, threshold_mask, vector_buffer,
    Connectivity,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnifyConfig {
    pub pole_threshold: f64,
    pub line_threshold: f64,
    /// Blobs smaller than this many pixels are dropped before centroids.
    pub min_area_px: usize,
    /// Corridor half-width in meters.
    pub buffer_m: f64,
    /// Skeleton chain simplification tolerance in pixel sizes.
    pub simplify_tol_px: f64,
}

impl Default for UnifyConfig {
    fn default() -> Self {
        UnifyConfig {
            pole_threshold: 0.5,
            line_threshold: 0.5,
            min_area_px: 8,
            buffer_m: 2.0,
            simplify_tol_px: 1.0,
        }
    }
}

/// Thresholds the pole channel, labels blobs, drops those under
/// `min_area_px`, and emits one predicted pole per surviving blob: centroid
/// of its pixel centers, confidence = blob maximum pole probability.
pub fn extract_poles<F: Real>(
    prob: &ProbabilityMap<F>,
    threshold: f64,
    min_area_px: usize,
) -> Result<PointAnnotations> {
    let mask = threshold_mask(prob.raster(), POLE, threshold);
    let blobs = connected_components(&mask, Connectivity::Eight)?;
    let georef = *prob.raster().georef();
    let mut points = Vec::new();
    let mut next_id = 0u64;
    for pixels in blobs.blob_pixels() {
        if pixels.len() < min_area_px {
            continue;
        }
        let mut sum_c = 0.0;
        let mut sum_r = 0.0;
        let mut conf = f64::NEG_INFINITY;
        for &(row, col) in &pixels {
            sum_c += col as f64 + 0.5;
            sum_r += row as f64 + 0.5;
            conf = conf.max(prob.pole(row, col).as_f64());
        }
        let n = pixels.len() as f64;
        let (x, y) = georef.pixel_to_world(sum_c / n, sum_r / n);
        points.push(AnnotatedPoint::pole(next_id, x, y).with_confidence(conf.clamp(0.0, 1.0)));
        next_id += 1;
    }
    PointAnnotations::new(points)
}

/// Skeleton polylines plus their buffered corridor polygons; corridor ids
/// match the skeleton that generated them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineExtraction {
    pub skeletons: PolylineSet,
    pub corridors: Vec<PolygonGeom>,
}

/// Binarize, thin, trace, simplify, buffer. Chains are simplified with a
/// one-pixel tolerance by default so staircase vertices collapse before the
/// corridor polygons are built.
pub fn extract_lines<F: Real>(
    line_prob: &Raster<F>,
    threshold: f64,
    buffer_m: f64,
    simplify_tol_px: f64,
) -> Result<LineExtraction> {
    let mask = threshold_mask(line_prob, 0, threshold);
    let skeleton = skeletonize(&mask)?;
    let georef = *line_prob.georef();
    let raw = skeleton_to_polylines(&skeleton, &georef)?;
    let tol = simplify_tol_px * georef.pixel_size();
    let mut lines = Vec::new();
    let mut next_id = 0u64;
    for line in raw.lines {
        let vertices = simplify_polyline(&line.vertices, tol);
        if vertices.len() < 2 {
            continue;
        }
        lines.push(Polyline {
            id: next_id,
            vertices,
            confidence: None,
        });
        next_id += 1;
    }
    let skeletons = PolylineSet::new(lines)?;
    let corridors = skeletons
        .lines
        .iter()
        .map(|l| vector_buffer(l, buffer_m))
        .collect();
    Ok(LineExtraction {
        skeletons,
        corridors,
    })
}

/// Merges the two layers into the final layout. Layers must share a CRS. No
/// topological joining of poles to lines is performed.
pub fn unify(
    poles: PointAnnotations,
    lines: LineExtraction,
    pole_georef: &AffineGeoref,
    line_georef: &AffineGeoref,
    provenance: Provenance,
) -> Result<GridLayout> {
    if pole_georef.epsg != line_georef.epsg {
        return Err(PgridError::CrsMismatch {
            a: pole_georef.epsg,
            b: line_georef.epsg,
        });
    }
    Ok(GridLayout {
        poles,
        line_skeletons: lines.skeletons,
        line_polygons: lines.corridors,
        provenance,
    })
}

/// Experimental pole-graph reconstruction: a skeleton whose two endpoints
/// both lie within `tol` meters of distinct poles yields one undirected edge.
/// Off by default in the pipeline.
pub fn snap_graph(layout: &GridLayout, tol: f64) -> Vec<(u64, u64)> {
    let nearest_pole = |p: [f64; 2]| -> Option<u64> {
        let mut best: Option<(f64, u64)> = None;
        for pole in &layout.poles.points {
            let d = ((pole.x - p[0]).powi(2) + (pole.y - p[1]).powi(2)).sqrt();
            let better = match best {
                None => d <= tol,
                Some((bd, bid)) => d < bd || (d == bd && pole.id < bid),
            };
            if better && d <= tol {
                best = Some((d, pole.id));
            }
        }
        best.map(|(_, id)| id)
    };

    let mut edges = BTreeSet::new();
    for line in &layout.line_skeletons.lines {
        let first = *line.vertices.first().unwrap();
        let last = *line.vertices.last().unwrap();
        if let (Some(a), Some(b)) = (nearest_pole(first), nearest_pole(last)) {
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    edges.into_iter().collect()
}

/// File names of the three layout layers for a given stem.
pub fn layout_paths(stem: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let name = |suffix: &str| {
        let mut os = stem.as_os_str().to_owned();
        os.push(suffix);
        PathBuf::from(os)
    };
    (
        name(".poles.geojson"),
        name(".lines.geojson"),
        name(".corridors.geojson"),
    )
}

/// Writes `<stem>.poles.geojson`, `<stem>.lines.geojson`, and
/// `<stem>.corridors.geojson`.
pub fn write_layout(layout: &GridLayout, stem: &Path) -> Result<()> {
    let (poles, lines, corridors) = layout_paths(stem);
    geojson::write_points(&layout.poles, poles, Some(&layout.provenance))?;
    geojson::write_polylines(&layout.line_skeletons, lines, Some(&layout.provenance))?;
    geojson::write_polygons(&layout.line_polygons, corridors, Some(&layout.provenance))?;
    Ok(())
}

/// Reads the three layout layers back. Provenance is not restored.
pub fn read_layout(stem: &Path) -> Result<GridLayout> {
    let (poles, lines, corridors) = layout_paths(stem);
    Ok(GridLayout {
        poles: geojson::read_points(poles)?,
        line_skeletons: geojson::read_polylines(lines)?,
        line_polygons: geojson::read_polygons(corridors)?,
        provenance: Provenance::default(),
    })
}
