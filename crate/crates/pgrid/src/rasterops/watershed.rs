//! Seeded priority-flood watershed restricted to a region mask.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{PgridError, Result};
use crate::geo::Raster;
use crate::scalar::Real;
use crate::LabelRaster;

/// Region labels (1..=seed count, 0 outside/undecided) plus the ridge mask of
/// pixels where at least two regions meet.
#[derive(Debug, Clone, PartialEq)]
pub struct WatershedResult {
    pub regions: LabelRaster,
    pub ridge: Raster<u8>,
    pub region_count: usize,
}

impl WatershedResult {
    pub fn ridge_pixels(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.ridge.width(), self.ridge.height());
        let mut out = Vec::new();
        for row in 0..h {
            for col in 0..w {
                if self.ridge.get(0, row, col) != 0 {
                    out.push((row, col));
                }
            }
        }
        out
    }
}

/// Heap entry ordered by (topography, row-major pixel index, push sequence).
/// BinaryHeap is a max-heap, so the comparison is reversed.
struct Claim {
    topo: f64,
    idx: usize,
    seq: u64,
    label: u32,
}

impl PartialEq for Claim {
    fn eq(&self, other: &Self) -> bool {
        self.topo == other.topo && self.idx == other.idx && self.seq == other.seq
    }
}
impl Eq for Claim {}

impl Ord for Claim {
    fn cmp(&self, other: &Self) -> Ordering {
        // lower topography first, then lower row-major index, then earlier push
        other
            .topo
            .partial_cmp(&self.topo)
            .expect("topography validated finite")
            .then_with(|| other.idx.cmp(&self.idx))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Claim {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
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

/// Floods the masked pixels from the given seeds in ascending topography.
/// Seeds are (row, col) pixels; seed i produces region label i+1. A pixel
/// reached while adjacent to two or more distinct regions becomes ridge, and
/// ridge pixels do not flood.
///
/// Colliding wavefronts can occasionally wall off a pocket of masked pixels
/// behind ridge before any region reaches it. Such pockets are healed
/// deterministically: the lowest (topography, index) ridge pixel touching
/// both a region and the pocket is demoted into that region and flooding
/// resumes, so the output always partitions the mask into connected regions
/// plus ridge.
pub fn watershed<F: Real>(
    topography: &Raster<F>,
    seeds: &[(usize, usize)],
    mask: &Raster<u8>,
) -> Result<WatershedResult> {
    mask.ensure_binary_mask()?;
    if topography.channels() != 1 || !topography.same_shape(mask) {
        return Err(PgridError::ShapeMismatch {
            context: "watershed topography vs mask",
            a: format!(
                "{}x{}x{}",
                topography.width(),
                topography.height(),
                topography.channels()
            ),
            b: format!("{}x{}x{}", mask.width(), mask.height(), mask.channels()),
        });
    }
    let (w, h) = (mask.width(), mask.height());

    // pre-validate topography so flooding can read it infallibly
    for row in 0..h {
        for col in 0..w {
            if mask.get(0, row, col) != 0 && !topography.get(0, row, col).as_f64().is_finite() {
                return Err(PgridError::NonFiniteTopography { col, row });
            }
        }
    }
    let topo_at = |row: usize, col: usize| topography.get(0, row, col).as_f64();

    let mut regions = mask.like(0u32);
    let mut ridge = mask.like(0u8);

    for (i, &(row, col)) in seeds.iter().enumerate() {
        if row >= h || col >= w || mask.get(0, row, col) == 0 {
            return Err(PgridError::SeedOutsideMask { id: i, col, row });
        }
        let existing = regions.get(0, row, col);
        if existing != 0 {
            return Err(PgridError::DuplicateSeed {
                a: existing as usize - 1,
                b: i,
                col,
                row,
            });
        }
        regions.set(0, row, col, i as u32 + 1);
    }

    let neighbors = |row: usize, col: usize| {
        NEIGHBORS_8.iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (row as i64 + dr, col as i64 + dc);
            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                None
            } else {
                Some((nr as usize, nc as usize))
            }
        })
    };

    let mut heap: BinaryHeap<Claim> = BinaryHeap::new();
    let mut seq = 0u64;

    macro_rules! push_undecided_neighbors {
        ($row:expr, $col:expr, $label:expr) => {
            for (nr, nc) in neighbors($row, $col) {
                if mask.get(0, nr, nc) != 0
                    && regions.get(0, nr, nc) == 0
                    && ridge.get(0, nr, nc) == 0
                {
                    heap.push(Claim {
                        topo: topo_at(nr, nc),
                        idx: nr * w + nc,
                        seq,
                        label: $label,
                    });
                    seq += 1;
                }
            }
        };
    }

    for (i, &(row, col)) in seeds.iter().enumerate() {
        push_undecided_neighbors!(row, col, i as u32 + 1);
    }

    loop {
        // flood to exhaustion
        while let Some(claim) = heap.pop() {
            let (row, col) = (claim.idx / w, claim.idx % w);
            if regions.get(0, row, col) != 0 || ridge.get(0, row, col) != 0 {
                continue;
            }
            let mut first_label = 0u32;
            let mut multiple = false;
            for (nr, nc) in neighbors(row, col) {
                let l = regions.get(0, nr, nc);
                if l != 0 {
                    if first_label == 0 {
                        first_label = l;
                    } else if l != first_label {
                        multiple = true;
                        break;
                    }
                }
            }
            if multiple {
                ridge.set(0, row, col, 1);
            } else {
                regions.set(0, row, col, claim.label);
                push_undecided_neighbors!(row, col, claim.label);
            }
        }

        // pocket healing: every ridge pixel touches two regions by
        // construction, so a pocket always borders a demotable candidate
        let mut best: Option<(f64, usize)> = None;
        for row in 0..h {
            for col in 0..w {
                if ridge.get(0, row, col) == 0 {
                    continue;
                }
                let touches_pocket = neighbors(row, col).any(|(nr, nc)| {
                    mask.get(0, nr, nc) != 0
                        && regions.get(0, nr, nc) == 0
                        && ridge.get(0, nr, nc) == 0
                });
                if touches_pocket {
                    let key = (topo_at(row, col), row * w + col);
                    if best.map_or(true, |(bt, bi)| key.0 < bt || (key.0 == bt && key.1 < bi)) {
                        best = Some(key);
                    }
                }
            }
        }
        let Some((_, idx)) = best else { break };
        let (row, col) = (idx / w, idx % w);
        // demote to the label of the lowest-(topography, index) region
        // neighbor
        let mut label_pick: Option<(f64, usize, u32)> = None;
        for (nr, nc) in neighbors(row, col) {
            let l = regions.get(0, nr, nc);
            if l != 0 {
                let key = (topo_at(nr, nc), nr * w + nc);
                if label_pick.map_or(true, |(bt, bi, _)| key.0 < bt || (key.0 == bt && key.1 < bi))
                {
                    label_pick = Some((key.0, key.1, l));
                }
            }
        }
        let label = label_pick.expect("healing candidate touches a region").2;
        ridge.set(0, row, col, 0);
        regions.set(0, row, col, label);
        push_undecided_neighbors!(row, col, label);
    }

    Ok(WatershedResult {
        regions,
        ridge,
        region_count: seeds.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::AffineGeoref;
    use rand::{Rng, SeedableRng};

    fn full_mask(w: usize, h: usize) -> Raster<u8> {
        Raster::filled(w, h, 1, 1u8, AffineGeoref::identity())
    }

    #[test]
    fn single_seed_floods_whole_mask() {
        let mask = full_mask(6, 6);
        let topo = Raster::filled(6, 6, 1, 0.0f64, AffineGeoref::identity());
        let res = watershed(&topo, &[(2, 3)], &mask).unwrap();
        assert!(res.regions.data().iter().all(|&l| l == 1));
        assert_eq!(res.ridge.count_ones(), 0);
    }

    #[test]
    fn symmetric_valley_ridge_on_axis() {
        // flat valleys in rows 0..3 and 4..7, crest on row 3
        let (w, h) = (5usize, 7usize);
        let mut topo = Raster::filled(w, h, 1, 0.0f64, AffineGeoref::identity());
        for col in 0..w {
            topo.set(0, 3, col, 1.0);
        }
        let mask = full_mask(w, h);
        let res = watershed(&topo, &[(1, 2), (5, 2)], &mask).unwrap();
        for col in 0..w {
            assert_eq!(res.ridge.get(0, 3, col), 1, "ridge expected at (3,{col})");
        }
        for row in 0..3 {
            for col in 0..w {
                assert_eq!(res.regions.get(0, row, col), 1);
            }
        }
        for row in 4..7 {
            for col in 0..w {
                assert_eq!(res.regions.get(0, row, col), 2);
            }
        }
    }

    #[test]
    fn seed_outside_mask_is_reported() {
        let mut mask = full_mask(4, 4);
        mask.set(0, 2, 2, 0);
        let topo = Raster::filled(4, 4, 1, 0.0f64, AffineGeoref::identity());
        match watershed(&topo, &[(0, 0), (2, 2)], &mask) {
            Err(PgridError::SeedOutsideMask { id: 1, col: 2, row: 2 }) => {}
            other => panic!("expected SeedOutsideMask, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_seed_pixel_rejected() {
        let mask = full_mask(4, 4);
        let topo = Raster::filled(4, 4, 1, 0.0f64, AffineGeoref::identity());
        assert!(matches!(
            watershed(&topo, &[(1, 1), (1, 1)], &mask),
            Err(PgridError::DuplicateSeed { .. })
        ));
    }

    /// Smoothed random topography, three seeds: the masked area partitions
    /// into exactly the seeded regions plus ridge, each region is connected
    /// and contains its own seed only, and every ridge pixel touches two or
    /// more distinct regions.
    #[test]
    fn random_smooth_topography_properties() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (w, h) = (32usize, 32usize);
            let noise: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
            // box-blur the noise a few times for smoothness
            let mut topo = noise;
            for _ in 0..3 {
                let mut next = vec![0.0; w * h];
                for r in 0..h {
                    for c in 0..w {
                        let mut acc = 0.0;
                        let mut n = 0.0;
                        for dr in -1i64..=1 {
                            for dc in -1i64..=1 {
                                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                                if nr >= 0 && nc >= 0 && nr < h as i64 && nc < w as i64 {
                                    acc += topo[nr as usize * w + nc as usize];
                                    n += 1.0;
                                }
                            }
                        }
                        next[r * w + c] = acc / n;
                    }
                }
                topo = next;
            }
            let topo = Raster::from_data(w, h, 1, topo, AffineGeoref::identity()).unwrap();
            let mask = full_mask(w, h);
            let seeds = [(4, 4), (27, 8), (13, 26)];
            let res = watershed(&topo, &seeds, &mask).unwrap();

            // exhaustive pixel check: full partition
            let mut region_sizes = [0usize; 3];
            for row in 0..h {
                for col in 0..w {
                    let l = res.regions.get(0, row, col);
                    let r = res.ridge.get(0, row, col);
                    assert!(l > 0 || r > 0, "undecided pixel ({row},{col})");
                    assert!(!(l > 0 && r > 0));
                    if l > 0 {
                        region_sizes[(l - 1) as usize] += 1;
                    }
                }
            }
            assert!(region_sizes.iter().all(|&s| s > 0));

            // each region contains exactly its own seed
            for (i, &(sr, sc)) in seeds.iter().enumerate() {
                assert_eq!(res.regions.get(0, sr, sc), i as u32 + 1);
            }

            // ridge pixels touch >= 2 distinct regions
            for (row, col) in res.ridge_pixels() {
                let mut labels = std::collections::BTreeSet::new();
                for &(dr, dc) in &NEIGHBORS_8 {
                    let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                    if nr >= 0 && nc >= 0 && nr < h as i64 && nc < w as i64 {
                        let l = res.regions.get(0, nr as usize, nc as usize);
                        if l > 0 {
                            labels.insert(l);
                        }
                    }
                }
                assert!(labels.len() >= 2, "ridge ({row},{col}) touches {labels:?}");
            }

            // regions are connected: BFS from the seed covers the region
            for (i, &(sr, sc)) in seeds.iter().enumerate() {
                let target = i as u32 + 1;
                let mut seen = vec![false; w * h];
                let mut stack = vec![(sr, sc)];
                seen[sr * w + sc] = true;
                let mut visited = 0usize;
                while let Some((r, c)) = stack.pop() {
                    visited += 1;
                    for &(dr, dc) in &NEIGHBORS_8 {
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if !seen[nr * w + nc] && res.regions.get(0, nr, nc) == target {
                            seen[nr * w + nc] = true;
                            stack.push((nr, nc));
                        }
                    }
                }
                assert_eq!(visited, region_sizes[i], "region {target} disconnected");
            }
        }
    }
}
