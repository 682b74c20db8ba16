//! GeoJSON (RFC 7946) vector I/O for point, polyline, and polygon layers.
//!
//! One file holds one layer of a single geometry type; mixing types is an
//! error that names the offending features. Coordinates are `[x, y]` in world
//! meters. Round-trips are semantic: geometry and properties are preserved,
//! formatting is not.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{PgridError, Result};
use crate::geo::vector::{
    AnnotatedPoint, PointAnnotations, Polarity, PolygonGeom, Polyline, PolylineSet, Provenance,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
enum GjGeometry {
    Point { coordinates: Vec<f64> },
    LineString { coordinates: Vec<Vec<f64>> },
    Polygon { coordinates: Vec<Vec<Vec<f64>>> },
}

impl GjGeometry {
    fn kind(&self) -> &'static str {
        match self {
            GjGeometry::Point { .. } => "Point",
            GjGeometry::LineString { .. } => "LineString",
            GjGeometry::Polygon { .. } => "Polygon",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GjFeature {
    #[serde(rename = "type")]
    kind: String,
    geometry: GjGeometry,
    #[serde(default)]
    properties: Option<Map<String, Value>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GjFeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<GjFeature>,
    /// Foreign member carrying layout provenance; ignored by generic readers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// A decoded vector layer of one geometry type.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorLayer {
    Points(PointAnnotations),
    Lines(PolylineSet),
    Polygons(Vec<PolygonGeom>),
}

fn feature_id(f: &GjFeature, index: usize) -> u64 {
    f.properties
        .as_ref()
        .and_then(|p| p.get("id"))
        .and_then(Value::as_u64)
        .unwrap_or(index as u64)
}

fn coord_pair(raw: &[f64]) -> Result<[f64; 2]> {
    if raw.len() < 2 {
        return Err(PgridError::InvalidPoint {
            id: 0,
            reason: format!("coordinate of length {}", raw.len()),
        });
    }
    Ok([raw[0], raw[1]])
}

fn parse_collection(text: &str, path: &Path) -> Result<GjFeatureCollection> {
    let fc: GjFeatureCollection =
        serde_json::from_str(text).map_err(|e| PgridError::json(path, e))?;
    if fc.kind != "FeatureCollection" {
        return Err(PgridError::NotFeatureCollection {
            path: path.display().to_string(),
            found: fc.kind,
        });
    }
    Ok(fc)
}

/// Rejects collections mixing geometry types; returns the expected kind.
fn ensure_homogeneous(fc: &GjFeatureCollection) -> Result<&'static str> {
    let expected = match fc.features.first() {
        Some(f) => f.geometry.kind(),
        None => return Ok(""),
    };
    let offending: Vec<u64> = fc
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.geometry.kind() != expected)
        .map(|(i, f)| feature_id(f, i))
        .collect();
    if !offending.is_empty() {
        return Err(PgridError::MixedGeometry {
            expected,
            offending,
        });
    }
    Ok(expected)
}

fn points_from(fc: &GjFeatureCollection) -> Result<PointAnnotations> {
    let mut points = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        let GjGeometry::Point { coordinates } = &f.geometry else {
            unreachable!("homogeneity checked");
        };
        let id = feature_id(f, i);
        let xy = coord_pair(coordinates).map_err(|_| PgridError::InvalidPoint {
            id,
            reason: "coordinates must hold [x, y]".into(),
        })?;
        let polarity = match f
            .properties
            .as_ref()
            .and_then(|p| p.get("polarity"))
            .and_then(Value::as_str)
        {
            Some("hard_negative") => Polarity::HardNegative,
            _ => Polarity::Pole,
        };
        let confidence = f
            .properties
            .as_ref()
            .and_then(|p| p.get("confidence"))
            .and_then(Value::as_f64);
        points.push(AnnotatedPoint {
            id,
            x: xy[0],
            y: xy[1],
            polarity,
            confidence,
        });
    }
    PointAnnotations::new(points)
}

fn lines_from(fc: &GjFeatureCollection) -> Result<PolylineSet> {
    let mut lines = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        let GjGeometry::LineString { coordinates } = &f.geometry else {
            unreachable!("homogeneity checked");
        };
        let id = feature_id(f, i);
        let vertices: Vec<[f64; 2]> = coordinates
            .iter()
            .map(|c| coord_pair(c))
            .collect::<Result<_>>()
            .map_err(|_| PgridError::InvalidPolyline {
                id,
                reason: "coordinates must hold [x, y] pairs".into(),
            })?;
        let confidence = f
            .properties
            .as_ref()
            .and_then(|p| p.get("confidence"))
            .and_then(Value::as_f64);
        let mut line = Polyline::new(id, vertices)?;
        line.confidence = confidence;
        lines.push(line);
    }
    PolylineSet::new(lines)
}

fn polygons_from(fc: &GjFeatureCollection) -> Result<Vec<PolygonGeom>> {
    let mut polys = Vec::with_capacity(fc.features.len());
    for (i, f) in fc.features.iter().enumerate() {
        let GjGeometry::Polygon { coordinates } = &f.geometry else {
            unreachable!("homogeneity checked");
        };
        let id = feature_id(f, i);
        let ring = coordinates.first().ok_or_else(|| PgridError::InvalidPolyline {
            id,
            reason: "polygon without rings".into(),
        })?;
        let mut exterior: Vec<[f64; 2]> = ring
            .iter()
            .map(|c| coord_pair(c))
            .collect::<Result<_>>()?;
        // RFC 7946 rings repeat the first vertex at the end; store open rings.
        if exterior.len() >= 2 && exterior.first() == exterior.last() {
            exterior.pop();
        }
        polys.push(PolygonGeom { id, exterior });
    }
    Ok(polys)
}

pub fn layer_from_str(text: &str, path: &Path) -> Result<VectorLayer> {
    let fc = parse_collection(text, path)?;
    match ensure_homogeneous(&fc)? {
        "Point" => Ok(VectorLayer::Points(points_from(&fc)?)),
        "LineString" => Ok(VectorLayer::Lines(lines_from(&fc)?)),
        "Polygon" => Ok(VectorLayer::Polygons(polygons_from(&fc)?)),
        // empty collections decode as an empty point layer
        _ => Ok(VectorLayer::Points(PointAnnotations::default())),
    }
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<VectorLayer> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| PgridError::io(path, e))?;
    layer_from_str(&text, path)
}

pub fn read_points(path: impl AsRef<Path>) -> Result<PointAnnotations> {
    match read_vectors(&path)? {
        VectorLayer::Points(p) => Ok(p),
        other => Err(PgridError::RasterKind {
            expected: "Point layer",
            found: format!("{other:?}"),
        }),
    }
}

pub fn read_polylines(path: impl AsRef<Path>) -> Result<PolylineSet> {
    match read_vectors(&path)? {
        VectorLayer::Lines(l) => Ok(l),
        VectorLayer::Points(p) if p.is_empty() => Ok(PolylineSet::default()),
        other => Err(PgridError::RasterKind {
            expected: "LineString layer",
            found: format!("{other:?}"),
        }),
    }
}

pub fn read_polygons(path: impl AsRef<Path>) -> Result<Vec<PolygonGeom>> {
    match read_vectors(&path)? {
        VectorLayer::Polygons(p) => Ok(p),
        VectorLayer::Points(p) if p.is_empty() => Ok(Vec::new()),
        other => Err(PgridError::RasterKind {
            expected: "Polygon layer",
            found: format!("{other:?}"),
        }),
    }
}

fn prop(value: impl Into<Value>) -> Value {
    value.into()
}

fn points_to_features(ann: &PointAnnotations) -> Vec<GjFeature> {
    ann.points
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("id".into(), prop(p.id));
            props.insert(
                "polarity".into(),
                prop(match p.polarity {
                    Polarity::Pole => "pole",
                    Polarity::HardNegative => "hard_negative",
                }),
            );
            if let Some(c) = p.confidence {
                props.insert("confidence".into(), prop(c));
            }
            GjFeature {
                kind: "Feature".into(),
                geometry: GjGeometry::Point {
                    coordinates: vec![p.x, p.y],
                },
                properties: Some(props),
            }
        })
        .collect()
}

fn lines_to_features(set: &PolylineSet) -> Vec<GjFeature> {
    set.lines
        .iter()
        .map(|l| {
            let mut props = Map::new();
            props.insert("id".into(), prop(l.id));
            if let Some(c) = l.confidence {
                props.insert("confidence".into(), prop(c));
            }
            GjFeature {
                kind: "Feature".into(),
                geometry: GjGeometry::LineString {
                    coordinates: l.vertices.iter().map(|v| vec![v[0], v[1]]).collect(),
                },
                properties: Some(props),
            }
        })
        .collect()
}

fn polygons_to_features(polys: &[PolygonGeom]) -> Vec<GjFeature> {
    polys
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("id".into(), prop(p.id));
            let mut ring: Vec<Vec<f64>> = p.exterior.iter().map(|v| vec![v[0], v[1]]).collect();
            if let Some(first) = ring.first().cloned() {
                ring.push(first);
            }
            GjFeature {
                kind: "Feature".into(),
                geometry: GjGeometry::Polygon {
                    coordinates: vec![ring],
                },
                properties: Some(props),
            }
        })
        .collect()
}

fn write_collection(
    features: Vec<GjFeature>,
    provenance: Option<&Provenance>,
    path: &Path,
) -> Result<()> {
    let fc = GjFeatureCollection {
        kind: "FeatureCollection".into(),
        features,
        provenance: provenance.cloned(),
    };
    let mut text = serde_json::to_string_pretty(&fc).map_err(|e| PgridError::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| PgridError::io(path, e))
}

pub fn write_points(
    ann: &PointAnnotations,
    path: impl AsRef<Path>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    write_collection(points_to_features(ann), provenance, path.as_ref())
}

pub fn write_polylines(
    set: &PolylineSet,
    path: impl AsRef<Path>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    write_collection(lines_to_features(set), provenance, path.as_ref())
}

pub fn write_polygons(
    polys: &[PolygonGeom],
    path: impl AsRef<Path>,
    provenance: Option<&Provenance>,
) -> Result<()> {
    write_collection(polygons_to_features(polys), provenance, path.as_ref())
}
