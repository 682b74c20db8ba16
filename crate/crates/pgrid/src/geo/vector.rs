//! Vector domain types: annotated points, polylines, polygons, and the
//! unified grid layout.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};

/// Whether a point marks an electrical pole or a confusable non-pole object
/// recorded for hard-negative training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Pole,
    HardNegative,
}

/// A point annotation in world coordinates. Ground truth carries no
/// confidence; predictions do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPoint {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub polarity: Polarity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl AnnotatedPoint {
    pub fn pole(id: u64, x: f64, y: f64) -> Self {
        AnnotatedPoint {
            id,
            x,
            y,
            polarity: Polarity::Pole,
            confidence: None,
        }
    }

    pub fn hard_negative(id: u64, x: f64, y: f64) -> Self {
        AnnotatedPoint {
            id,
            x,
            y,
            polarity: Polarity::HardNegative,
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, c: f64) -> Self {
        self.confidence = Some(c);
        self
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointAnnotations {
    pub points: Vec<AnnotatedPoint>,
}

impl PointAnnotations {
    pub fn new(points: Vec<AnnotatedPoint>) -> Result<Self> {
        let ann = PointAnnotations { points };
        ann.validate()?;
        Ok(ann)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in &self.points {
            if !seen.insert(p.id) {
                return Err(PgridError::DuplicateId { id: p.id });
            }
            if let Some(c) = p.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(PgridError::InvalidPoint {
                        id: p.id,
                        reason: format!("confidence {c} outside [0,1]"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn poles(&self) -> impl Iterator<Item = &AnnotatedPoint> {
        self.points.iter().filter(|p| p.polarity == Polarity::Pole)
    }

    pub fn hard_negatives(&self) -> impl Iterator<Item = &AnnotatedPoint> {
        self.points
            .iter()
            .filter(|p| p.polarity == Polarity::HardNegative)
    }
}

/// A polyline in world coordinates with at least two vertices and no repeated
/// consecutive vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub id: u64,
    pub vertices: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Polyline {
    pub fn new(id: u64, vertices: Vec<[f64; 2]>) -> Result<Self> {
        let line = Polyline {
            id,
            vertices,
            confidence: None,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() < 2 {
            return Err(PgridError::InvalidPolyline {
                id: self.id,
                reason: format!("{} vertex(es), need at least 2", self.vertices.len()),
            });
        }
        for (i, w) in self.vertices.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(PgridError::InvalidPolyline {
                    id: self.id,
                    reason: format!("identical consecutive vertices at index {i}"),
                });
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        super::geom::polyline_length(&self.vertices)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolylineSet {
    pub lines: Vec<Polyline>,
}

impl PolylineSet {
    pub fn new(lines: Vec<Polyline>) -> Result<Self> {
        let set = PolylineSet { lines };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for l in &self.lines {
            if !seen.insert(l.id) {
                return Err(PgridError::DuplicateId { id: l.id });
            }
            l.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// A simple polygon (outer ring only, open: closing edge implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonGeom {
    pub id: u64,
    pub exterior: Vec<[f64; 2]>,
}

impl PolygonGeom {
    pub fn area(&self) -> f64 {
        super::geom::polygon_area(&self.exterior)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        super::geom::point_in_polygon(p, &self.exterior)
    }
}

/// Where a layout came from: source raster identifiers plus the parameters
/// used to extract it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub parameters: serde_json::Map<String, serde_json::Value>,
}

/// The unified vectorized grid layout: pole points, line skeleton polylines,
/// and the buffered line corridor polygons.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridLayout {
    pub poles: PointAnnotations,
    pub line_skeletons: PolylineSet,
    pub line_polygons: Vec<PolygonGeom>,
    pub provenance: Provenance,
}
