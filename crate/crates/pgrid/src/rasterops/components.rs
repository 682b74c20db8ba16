//! Connected-component labelling of binary masks.

use crate::error::Result;
use crate::geo::Raster;
use crate::LabelRaster;

/// Pixel neighbourhood used when deciding connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(0, -1), (0, 1), (-1, 0), (1, 0)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Per-blob statistics gathered during labelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobStats {
    /// Area in pixels.
    pub area: usize,
    /// Inclusive bounding box (min_col, min_row, max_col, max_row).
    pub bbox: (usize, usize, usize, usize),
    /// First pixel of the blob in row-major order (defines label order).
    pub first_pixel: (usize, usize),
}

/// Labelled blobs: label 0 is background, labels 1..=blob_count are blobs in
/// row-major first-pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobLabels {
    pub labels: LabelRaster,
    pub blob_count: usize,
    pub stats: Vec<BlobStats>,
}

impl BlobLabels {
    /// Label at (row, col); 0 means background.
    #[inline]
    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels.get(0, row, col)
    }

    /// Pixels of every blob, indexed by label-1. Row-major within each blob.
    pub fn blob_pixels(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.blob_count];
        let (w, h) = (self.labels.width(), self.labels.height());
        for row in 0..h {
            for col in 0..w {
                let l = self.label(row, col);
                if l > 0 {
                    out[(l - 1) as usize].push((row, col));
                }
            }
        }
        out
    }

    /// How many of the given pixel coordinates fall inside each blob.
    pub fn contained_count(&self, pixels: &[(usize, usize)]) -> Vec<usize> {
        let mut counts = vec![0usize; self.blob_count];
        for &(row, col) in pixels {
            if row < self.labels.height() && col < self.labels.width() {
                let l = self.label(row, col);
                if l > 0 {
                    counts[(l - 1) as usize] += 1;
                }
            }
        }
        counts
    }
}

/// Labels 8- or 4-connected foreground components of a {0,1} mask. Labels are
/// assigned in row-major order of each blob's first pixel, so the result is
/// deterministic.
pub fn connected_components(mask: &Raster<u8>, connectivity: Connectivity) -> Result<BlobLabels> {
    mask.ensure_binary_mask()?;
    let (w, h) = (mask.width(), mask.height());
    let mut labels = mask.like(0u32);
    let mut stats = Vec::new();
    let mut next = 0u32;
    let offsets = connectivity.offsets();
    let mut queue: Vec<(usize, usize)> = Vec::new();

    for row in 0..h {
        for col in 0..w {
            if mask.get(0, row, col) == 0 || labels.get(0, row, col) != 0 {
                continue;
            }
            next += 1;
            let mut stat = BlobStats {
                area: 0,
                bbox: (col, row, col, row),
                first_pixel: (row, col),
            };
            labels.set(0, row, col, next);
            queue.clear();
            queue.push((row, col));
            while let Some((r, c)) = queue.pop() {
                stat.area += 1;
                stat.bbox.0 = stat.bbox.0.min(c);
                stat.bbox.1 = stat.bbox.1.min(r);
                stat.bbox.2 = stat.bbox.2.max(c);
                stat.bbox.3 = stat.bbox.3.max(r);
                for &(dr, dc) in offsets {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if mask.get(0, nr, nc) != 0 && labels.get(0, nr, nc) == 0 {
                        labels.set(0, nr, nc, next);
                        queue.push((nr, nc));
                    }
                }
            }
            stats.push(stat);
        }
    }

    Ok(BlobLabels {
        labels,
        blob_count: next as usize,
        stats,
    })
}
