//! Small planar-geometry helpers shared across modules. All coordinates are
//! world meters (f64).

/// Euclidean distance from point `p` to segment `ab`.
pub fn dist_point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return (ap[0] * ap[0] + ap[1] * ap[1]).sqrt();
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Distance from `p` to the nearest point of a polyline given as vertices.
pub fn dist_point_polyline(p: [f64; 2], vertices: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    if vertices.len() == 1 {
        let d = ((p[0] - vertices[0][0]).powi(2) + (p[1] - vertices[0][1]).powi(2)).sqrt();
        return d;
    }
    for w in vertices.windows(2) {
        best = best.min(dist_point_segment(p, w[0], w[1]));
    }
    best
}

pub fn polyline_length(vertices: &[[f64; 2]]) -> f64 {
    vertices
        .windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
        .sum()
}

/// Signed area of a simple polygon (positive for counter-clockwise rings).
/// The ring is open: the closing edge last->first is implied.
pub fn polygon_signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc / 2.0
}

pub fn polygon_area(ring: &[[f64; 2]]) -> f64 {
    polygon_signed_area(ring).abs()
}

/// Even-odd point-in-polygon test on an open ring. Boundary points may land
/// on either side; callers needing boundary inclusion should buffer.
pub fn point_in_polygon(p: [f64; 2], ring: &[[f64; 2]]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (ring[i][0], ring[i][1]);
        let (xj, yj) = (ring[j][0], ring[j][1]);
        if ((yi > p[1]) != (yj > p[1]))
            && (p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi)
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Ramer-Douglas-Peucker simplification. Keeps endpoints; removes interior
/// vertices whose perpendicular deviation is within `tol`.
pub fn simplify_polyline(vertices: &[[f64; 2]], tol: f64) -> Vec<[f64; 2]> {
    if vertices.len() <= 2 {
        return vertices.to_vec();
    }
    let mut keep = vec![false; vertices.len()];
    keep[0] = true;
    keep[vertices.len() - 1] = true;
    let mut stack = vec![(0usize, vertices.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (vertices[lo], vertices[hi]);
        let mut worst = 0.0;
        let mut worst_i = lo;
        for (i, &v) in vertices.iter().enumerate().take(hi).skip(lo + 1) {
            let d = dist_point_segment(v, a, b);
            if d > worst {
                worst = d;
                worst_i = i;
            }
        }
        if worst > tol {
            keep[worst_i] = true;
            stack.push((lo, worst_i));
            stack.push((worst_i, hi));
        }
    }
    vertices
        .iter()
        .zip(keep.iter())
        .filter_map(|(&v, &k)| k.then_some(v))
        .collect()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// True when the open segments cross (shared endpoints do not count).
pub fn segments_cross(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Minimum distance between two segments (0 when they cross).
pub fn dist_segment_segment(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> f64 {
    if segments_cross(a1, a2, b1, b2) {
        return 0.0;
    }
    dist_point_segment(a1, b1, b2)
        .min(dist_point_segment(a2, b1, b2))
        .min(dist_point_segment(b1, a1, a2))
        .min(dist_point_segment(b2, a1, a2))
}

/// Axis-aligned bounding box [min_x, min_y, max_x, max_y] of a vertex list.
pub fn bbox_of(vertices: &[[f64; 2]]) -> Option<[f64; 4]> {
    let first = vertices.first()?;
    let mut b = [first[0], first[1], first[0], first[1]];
    for v in vertices {
        b[0] = b[0].min(v[0]);
        b[1] = b[1].min(v[1]);
        b[2] = b[2].max(v[0]);
        b[3] = b[3].max(v[1]);
    }
    Some(b)
}

pub fn bbox_union(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])]
}

pub fn bbox_intersects(a: [f64; 4], b: [f64; 4]) -> bool {
    a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_segment_distance_cases() {
        // perpendicular foot inside the segment
        let d = dist_point_segment([1.0, 1.0], [0.0, 0.0], [2.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-12);
        // nearest point is an endpoint
        let d = dist_point_segment([-3.0, 4.0], [0.0, 0.0], [2.0, 0.0]);
        assert!((d - 5.0).abs() < 1e-12);
        // degenerate segment
        let d = dist_point_segment([3.0, 4.0], [0.0, 0.0], [0.0, 0.0]);
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn shoelace_unit_square() {
        let ring = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!((polygon_signed_area(&ring) - 1.0).abs() < 1e-12);
        assert!(point_in_polygon([0.5, 0.5], &ring));
        assert!(!point_in_polygon([1.5, 0.5], &ring));
    }

    #[test]
    fn simplify_collapses_collinear_chain() {
        let chain: Vec<[f64; 2]> = (0..=10).map(|i| [i as f64, 0.0]).collect();
        let s = simplify_polyline(&chain, 0.1);
        assert_eq!(s, vec![[0.0, 0.0], [10.0, 0.0]]);
    }

    #[test]
    fn simplify_keeps_real_corner() {
        let chain = vec![[0.0, 0.0], [5.0, 0.0], [5.0, 5.0]];
        let s = simplify_polyline(&chain, 0.1);
        assert_eq!(s.len(), 3);
    }
}
