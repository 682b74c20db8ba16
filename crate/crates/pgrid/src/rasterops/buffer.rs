//! Distance buffering of polylines, in raster and vector form, plus thin
//! polyline rasterization.

use crate::geo::geom::{bbox_of, dist_point_segment};
use crate::geo::{AffineGeoref, PolygonGeom, Polyline, PolylineSet, Raster};

/// Pixel bounding box (inclusive) covering a world-space bbox expanded by
/// `pad` meters, clamped to the raster extent.
fn pixel_bbox(
    georef: &AffineGeoref,
    world: [f64; 4],
    pad: f64,
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    let corners = [
        (world[0] - pad, world[1] - pad),
        (world[2] + pad, world[1] - pad),
        (world[0] - pad, world[3] + pad),
        (world[2] + pad, world[3] + pad),
    ];
    let mut min_c = f64::INFINITY;
    let mut min_r = f64::INFINITY;
    let mut max_c = f64::NEG_INFINITY;
    let mut max_r = f64::NEG_INFINITY;
    for (x, y) in corners {
        let (c, r) = georef.world_to_pixel(x, y);
        min_c = min_c.min(c);
        min_r = min_r.min(r);
        max_c = max_c.max(c);
        max_r = max_r.max(r);
    }
    let c0 = min_c.floor().max(0.0) as usize;
    let r0 = min_r.floor().max(0.0) as usize;
    if min_c >= width as f64 || min_r >= height as f64 || max_c < 0.0 || max_r < 0.0 {
        return None;
    }
    let c1 = (max_c.ceil() as usize).min(width - 1);
    let r1 = (max_r.ceil() as usize).min(height - 1);
    Some((c0, r0, c1, r1))
}

/// Rasterizes the set of points within `radius` meters of any polyline: a
/// pixel is 1 iff its center lies within `radius` of some segment.
pub fn buffer_polylines(
    lines: &PolylineSet,
    radius: f64,
    georef: &AffineGeoref,
    width: usize,
    height: usize,
) -> Raster<u8> {
    let mut out = Raster::filled(width, height, 1, 0u8, *georef);
    stamp_polylines(&mut out, lines, radius);
    out
}

/// Marks buffered polylines into an existing mask (logical OR).
pub fn stamp_polylines(mask: &mut Raster<u8>, lines: &PolylineSet, radius: f64) {
    let georef = *mask.georef();
    let (width, height) = (mask.width(), mask.height());
    for line in &lines.lines {
        for seg in line.vertices.windows(2) {
            let Some(world) = bbox_of(seg) else { continue };
            let Some((c0, r0, c1, r1)) = pixel_bbox(&georef, world, radius, width, height) else {
                continue;
            };
            for row in r0..=r1 {
                for col in c0..=c1 {
                    if mask.get(0, row, col) != 0 {
                        continue;
                    }
                    let (x, y) = georef.pixel_center(col, row);
                    if dist_point_segment([x, y], seg[0], seg[1]) <= radius {
                        mask.set(0, row, col, 1);
                    }
                }
            }
        }
    }
}

/// Corridor polygon around one polyline: offset sides with miter joins on the
/// inner side of a bend, arc (round) joins on the outer side, and round end
/// caps, so the polygon matches the exact distance buffer. Exact for
/// polylines whose segments are long relative to the radius; sharp bends fall
/// back to a bevel.
pub fn vector_buffer(line: &Polyline, radius: f64) -> PolygonGeom {
    let v = &line.vertices;
    let n = v.len();
    let mut ring: Vec<[f64; 2]> = Vec::new();

    fn arc_clockwise(ring: &mut Vec<[f64; 2]>, center: [f64; 2], radius: f64, a0: f64, a1: f64) {
        let mut sweep = a1 - a0;
        while sweep >= 0.0 {
            sweep -= std::f64::consts::TAU;
        }
        let steps = ((-sweep) / (std::f64::consts::PI / 12.0)).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let ang = a0 + sweep * s as f64 / steps as f64;
            ring.push([
                center[0] + radius * ang.cos(),
                center[1] + radius * ang.sin(),
            ]);
        }
    }

    let dir = |i: usize| -> [f64; 2] {
        let d = [v[i + 1][0] - v[i][0], v[i + 1][1] - v[i][1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        [d[0] / len, d[1] / len]
    };
    // left normal of segment i
    let normal = |i: usize| -> [f64; 2] {
        let d = dir(i);
        [-d[1], d[0]]
    };
    let offset = |p: [f64; 2], n: [f64; 2], s: f64| [p[0] + s * radius * n[0], p[1] + s * radius * n[1]];

    // one side of the corridor; side = +1 walks segments forward along their
    // left normals, side = -1 walks them backward along the right normals
    let emit_side = |ring: &mut Vec<[f64; 2]>, side: f64| {
        let seg_range: Vec<usize> = if side > 0.0 {
            (0..n - 1).collect()
        } else {
            (0..n - 1).rev().collect()
        };
        for (k, &i) in seg_range.iter().enumerate() {
            let nm = normal(i);
            let (start, end) = if side > 0.0 { (v[i], v[i + 1]) } else { (v[i + 1], v[i]) };
            if k == 0 {
                ring.push(offset(start, nm, side));
            }
            let end_off = offset(end, nm, side);
            if k + 1 == seg_range.len() {
                ring.push(end_off);
                continue;
            }
            let j = seg_range[k + 1];
            let nm_next = normal(j);
            let next_off = offset(end, nm_next, side);
            // cross is the turn direction in original segment order; the left
            // side (side = +1) is inner on left turns, the right side on
            // right turns, so `side * cross > 0` marks the inner side
            let d_cur = dir(i);
            let d_next = dir(j);
            let (a, b) = if side > 0.0 { (d_cur, d_next) } else { (d_next, d_cur) };
            let cross = a[0] * b[1] - a[1] * b[0];
            let turn = side * cross;
            if cross.abs() < 1e-12 {
                ring.push(end_off);
            } else if turn > 0.0 {
                // inner side: miter point where the two offset lines meet
                let m = [nm[0] + nm_next[0], nm[1] + nm_next[1]];
                let mlen = (m[0] * m[0] + m[1] * m[1]).sqrt();
                let m = [m[0] / mlen, m[1] / mlen];
                let cos_half = m[0] * nm[0] + m[1] * nm[1];
                if cos_half > 0.25 {
                    ring.push([
                        end[0] + side * radius / cos_half * m[0],
                        end[1] + side * radius / cos_half * m[1],
                    ]);
                } else {
                    // near-reversal: bevel
                    ring.push(end_off);
                    ring.push(next_off);
                }
            } else {
                // outer side: arc join around the vertex
                let a0 = (side * nm[1]).atan2(side * nm[0]);
                let a1 = (side * nm_next[1]).atan2(side * nm_next[0]);
                let mut sweep = a1 - a0;
                while sweep > 0.0 {
                    sweep -= std::f64::consts::TAU;
                }
                // outer arcs always rotate clockwise from a0 to a1
                let steps = ((-sweep) / (std::f64::consts::PI / 12.0)).ceil().max(1.0) as usize;
                for s in 0..=steps {
                    let ang = a0 + sweep * s as f64 / steps as f64;
                    ring.push([end[0] + radius * ang.cos(), end[1] + radius * ang.sin()]);
                }
            }
        }
    };

    emit_side(&mut ring, 1.0);
    // round end cap: half circle from +n to -n of the last segment
    {
        let nm = normal(n - 2);
        let a0 = nm[1].atan2(nm[0]);
        let a1 = (-nm[1]).atan2(-nm[0]);
        arc_clockwise(&mut ring, v[n - 1], radius, a0, a1);
    }
    emit_side(&mut ring, -1.0);
    // round start cap: half circle from -n to +n of the first segment
    {
        let nm = normal(0);
        let a0 = (-nm[1]).atan2(-nm[0]);
        let a1 = nm[1].atan2(nm[0]);
        arc_clockwise(&mut ring, v[0], radius, a0, a1);
    }

    // drop immediate duplicates introduced where sides meet the caps
    ring.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    if ring.len() >= 2 {
        let (first, last) = (ring[0], *ring.last().unwrap());
        if (first[0] - last[0]).abs() < 1e-12 && (first[1] - last[1]).abs() < 1e-12 {
            ring.pop();
        }
    }

    PolygonGeom {
        id: line.id,
        exterior: ring,
    }
}

/// Rasterizes polygons by the even-odd rule evaluated at pixel centers.
pub fn rasterize_polygons(
    polys: &[PolygonGeom],
    georef: &AffineGeoref,
    width: usize,
    height: usize,
) -> Raster<u8> {
    let mut out = Raster::filled(width, height, 1, 0u8, *georef);
    for poly in polys {
        let Some(world) = bbox_of(&poly.exterior) else { continue };
        let Some((c0, r0, c1, r1)) = pixel_bbox(georef, world, 0.0, width, height) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                if out.get(0, row, col) != 0 {
                    continue;
                }
                let (x, y) = georef.pixel_center(col, row);
                if poly.contains([x, y]) {
                    out.set(0, row, col, 1);
                }
            }
        }
    }
    out
}

/// Thin rasterization used for training labels and rendering: each polyline
/// is drawn `width_px` pixels wide (pixel centers within width_px/2 pixel
/// sizes of a segment), with no buffering beyond the stroke width.
pub fn rasterize_polylines(
    lines: &PolylineSet,
    georef: &AffineGeoref,
    width: usize,
    height: usize,
    width_px: f64,
) -> Raster<u8> {
    let radius = 0.5 * width_px * georef.pixel_size();
    buffer_polylines(lines, radius, georef, width, height)
}
