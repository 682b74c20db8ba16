//! Raster-to-vector tracing: blob outlines to polygons and thin skeletons to
//! polylines.

use std::collections::BTreeSet;

use crate::error::{PgridError, Result};
use crate::geo::{AffineGeoref, PolygonGeom, Polyline, PolylineSet, Raster};
use crate::rasterops::components::{connected_components, Connectivity};
use crate::rasterops::skeleton::is_thin;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    E,
    S,
    W,
    N,
}

impl Dir {
    fn step(self, x: i64, y: i64) -> (i64, i64) {
        match self {
            Dir::E => (x + 1, y),
            Dir::S => (x, y + 1),
            Dir::W => (x - 1, y),
            Dir::N => (x, y - 1),
        }
    }

    fn left(self) -> Dir {
        match self {
            Dir::E => Dir::N,
            Dir::N => Dir::W,
            Dir::W => Dir::S,
            Dir::S => Dir::E,
        }
    }

    fn right(self) -> Dir {
        self.left().left().left()
    }
}

/// Traces the outer boundary of each 8-connected blob. Vertices are pixel
/// corners in world coordinates; collinear runs are merged. Holes are not
/// traced. Blobs connected only through a diagonal produce a ring that passes
/// through the shared corner twice.
pub fn polygonize(mask: &Raster<u8>, georef: &AffineGeoref) -> Result<Vec<PolygonGeom>> {
    mask.ensure_binary_mask()?;
    let blobs = connected_components(mask, Connectivity::Eight)?;
    let mut polys = Vec::with_capacity(blobs.blob_count);

    for (i, stat) in blobs.stats.iter().enumerate() {
        let label = (i + 1) as u32;
        let inside = |y: i64, x: i64| -> bool {
            y >= 0
                && x >= 0
                && (y as usize) < mask.height()
                && (x as usize) < mask.width()
                && blobs.label(y as usize, x as usize) == label
        };

        // start at the top-left corner of the blob's first pixel, heading
        // east along its top edge (blob on the right of travel)
        let (r0, c0) = stat.first_pixel;
        let start = (c0 as i64, r0 as i64);
        let start_dir = Dir::E;

        let mut corners: Vec<(i64, i64)> = vec![start];
        let (mut x, mut y) = start;
        let mut dir = start_dir;
        loop {
            let (nx, ny) = dir.step(x, y);
            x = nx;
            y = ny;
            // decide the outgoing direction at the new corner from the four
            // pixels around it; valid directions keep blob on the right and
            // non-blob on the left of the walked edge
            let valid = |d: Dir| -> bool {
                match d {
                    Dir::E => inside(y, x) && !inside(y - 1, x),
                    Dir::W => inside(y - 1, x - 1) && !inside(y, x - 1),
                    Dir::S => inside(y, x - 1) && !inside(y, x),
                    Dir::N => inside(y - 1, x) && !inside(y - 1, x - 1),
                }
            };
            // prefer left turn, then straight, then right: the left-most
            // valid choice keeps diagonally-touching pixels of the same blob
            // inside one outline
            let next = [dir.left(), dir, dir.right()]
                .into_iter()
                .find(|&d| valid(d))
                .unwrap_or_else(|| dir.right().right());
            if (x, y) == start && next == start_dir {
                break;
            }
            if next != dir {
                corners.push((x, y));
                dir = next;
            }
            if corners.len() > 4 * (mask.width() + 2) * (mask.height() + 2) {
                unreachable!("boundary trace did not close");
            }
        }

        let exterior: Vec<[f64; 2]> = corners
            .iter()
            .map(|&(cx, cy)| {
                let (wx, wy) = georef.pixel_to_world(cx as f64, cy as f64);
                [wx, wy]
            })
            .collect();
        polys.push(PolygonGeom {
            id: i as u64,
            exterior,
        });
    }
    Ok(polys)
}

const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Walks a one-pixel-wide skeleton into polylines of pixel centers, splitting
/// at junction pixels (three or more skeleton neighbours). Redundant diagonal
/// adjacencies (those bridged by an orthogonal skeleton pixel) are ignored so
/// staircases read as chains. Isolated single pixels are dropped; isolated
/// cycles come back as closed polylines.
pub fn skeleton_to_polylines(skeleton: &Raster<u8>, georef: &AffineGeoref) -> Result<PolylineSet> {
    skeleton.ensure_binary_mask()?;
    if !is_thin(skeleton) {
        let (w, h) = (skeleton.width(), skeleton.height());
        for row in 0..h - 1 {
            for col in 0..w - 1 {
                if skeleton.get(0, row, col) != 0
                    && skeleton.get(0, row, col + 1) != 0
                    && skeleton.get(0, row + 1, col) != 0
                    && skeleton.get(0, row + 1, col + 1) != 0
                {
                    return Err(PgridError::NotThin { col, row });
                }
            }
        }
    }

    let (w, h) = (skeleton.width(), skeleton.height());
    let on = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && r < h as i64 && c < w as i64 && skeleton.get(0, r as usize, c as usize) != 0
    };

    // pruned neighbours in fixed scan order
    let neighbors = |r: usize, c: usize| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &(dr, dc) in &NEIGHBORS_8 {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if !on(nr, nc) {
                continue;
            }
            if dr != 0 && dc != 0 {
                // diagonal bridged by an orthogonal neighbour is redundant
                if on(r as i64 + dr, c as i64) || on(r as i64, c as i64 + dc) {
                    continue;
                }
            }
            out.push((nr as usize, nc as usize));
        }
        out
    };

    let degree = |r: usize, c: usize| neighbors(r, c).len();
    let center = |r: usize, c: usize| -> [f64; 2] {
        let (x, y) = georef.pixel_center(c, r);
        [x, y]
    };
    let idx = |r: usize, c: usize| r * w + c;

    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new(); // directed edges by flat index
    let mut lines: Vec<Polyline> = Vec::new();
    let mut next_id = 0u64;

    let mut emit = |vertices: Vec<[f64; 2]>, lines: &mut Vec<Polyline>| {
        if vertices.len() >= 2 {
            lines.push(Polyline {
                id: next_id,
                vertices,
                confidence: None,
            });
            next_id += 1;
        }
    };

    // chains from every endpoint or junction
    for r in 0..h {
        for c in 0..w {
            if skeleton.get(0, r, c) == 0 {
                continue;
            }
            let deg = degree(r, c);
            if deg == 2 {
                continue;
            }
            for (nr, nc) in neighbors(r, c) {
                if used.contains(&(idx(r, c), idx(nr, nc))) {
                    continue;
                }
                let mut verts = vec![center(r, c)];
                let (mut pr, mut pc) = (r, c);
                let (mut cr, mut cc) = (nr, nc);
                used.insert((idx(pr, pc), idx(cr, cc)));
                used.insert((idx(cr, cc), idx(pr, pc)));
                verts.push(center(cr, cc));
                while degree(cr, cc) == 2 {
                    let nbs = neighbors(cr, cc);
                    let (qr, qc) = if nbs[0] == (pr, pc) { nbs[1] } else { nbs[0] };
                    used.insert((idx(cr, cc), idx(qr, qc)));
                    used.insert((idx(qr, qc), idx(cr, cc)));
                    pr = cr;
                    pc = cc;
                    cr = qr;
                    cc = qc;
                    verts.push(center(cr, cc));
                }
                emit(verts, &mut lines);
            }
        }
    }

    // leftover pure cycles: every pixel has degree 2 and unused edges
    for r in 0..h {
        for c in 0..w {
            if skeleton.get(0, r, c) == 0 || degree(r, c) != 2 {
                continue;
            }
            let nbs = neighbors(r, c);
            if used.contains(&(idx(r, c), idx(nbs[0].0, nbs[0].1))) {
                continue;
            }
            let mut verts = vec![center(r, c)];
            let (mut pr, mut pc) = (r, c);
            let (mut cr, mut cc) = nbs[0];
            used.insert((idx(pr, pc), idx(cr, cc)));
            used.insert((idx(cr, cc), idx(pr, pc)));
            verts.push(center(cr, cc));
            while (cr, cc) != (r, c) {
                let nbs = neighbors(cr, cc);
                let (qr, qc) = if nbs[0] == (pr, pc) { nbs[1] } else { nbs[0] };
                used.insert((idx(cr, cc), idx(qr, qc)));
                used.insert((idx(qr, qc), idx(cr, cc)));
                pr = cr;
                pc = cc;
                cr = qr;
                cc = qc;
                verts.push(center(cr, cc));
            }
            emit(verts, &mut lines);
        }
    }

    PolylineSet::new(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::geom::polygon_area;

    fn mask_from(rows: &[&str]) -> Raster<u8> {
        let h = rows.len();
        let w = rows[0].len();
        let data: Vec<u8> = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| if c == '1' { 1 } else { 0 }))
            .collect();
        Raster::from_data(w, h, 1, data, AffineGeoref::identity()).unwrap()
    }

    #[test]
    fn square_blob_traces_four_corners() {
        let mask = mask_from(&["00000", "01110", "01110", "01110", "00000"]);
        let georef = AffineGeoref::north_up(0.0, 0.0, 2.0, 0);
        let polys = polygonize(&mask, &georef).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].exterior.len(), 4);
        // area: 9 pixels x (2 m)^2
        assert!((polygon_area(&polys[0].exterior) - 36.0).abs() < 1e-9);
    }

    #[test]
    fn empty_mask_empty_outputs() {
        let mask = Raster::filled(4, 4, 1, 0u8, AffineGeoref::identity());
        assert!(polygonize(&mask, &AffineGeoref::identity()).unwrap().is_empty());
        assert!(skeleton_to_polylines(&mask, &AffineGeoref::identity())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn l_shape_outline() {
        let mask = mask_from(&["1100", "1100", "1111"]);
        let polys = polygonize(&mask, &AffineGeoref::identity()).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].exterior.len(), 6);
        assert!((polygon_area(&polys[0].exterior) - 8.0).abs() < 1e-9);
    }

    #[test]
    fn plus_skeleton_splits_into_four_arms() {
        let mask = mask_from(&["00100", "00100", "11111", "00100", "00100"]);
        let lines = skeleton_to_polylines(&mask, &AffineGeoref::identity()).unwrap();
        assert_eq!(lines.len(), 4);
        // all arms share the junction pixel center (2.5, -2.5)
        for l in &lines.lines {
            assert!(l
                .vertices
                .iter()
                .any(|&v| (v[0] - 2.5).abs() < 1e-12 && (v[1] + 2.5).abs() < 1e-12));
            assert_eq!(l.vertices.len(), 3);
        }
    }

    #[test]
    fn staircase_reads_as_single_chain() {
        let mask = mask_from(&["1000", "1100", "0110", "0011"]);
        let lines = skeleton_to_polylines(&mask, &AffineGeoref::identity()).unwrap();
        assert_eq!(lines.len(), 1, "{lines:?}");
    }

    #[test]
    fn non_thin_input_rejected() {
        let mask = mask_from(&["110", "110"]);
        assert!(matches!(
            skeleton_to_polylines(&mask, &AffineGeoref::identity()),
            Err(PgridError::NotThin { col: 0, row: 0 })
        ));
    }

    #[test]
    fn isolated_cycle_closes() {
        let mask = mask_from(&["0110", "1001", "1001", "0110"]);
        let lines = skeleton_to_polylines(&mask, &AffineGeoref::identity()).unwrap();
        assert_eq!(lines.len(), 1);
        let l = &lines.lines[0];
        assert_eq!(l.vertices.first(), l.vertices.last());
    }
}
