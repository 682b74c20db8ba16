//! Morphological thinning (Zhang-Suen) of binary masks.

use crate::error::Result;
use crate::geo::Raster;
use crate::rasterops::components::{connected_components, Connectivity};

/// The eight neighbours of (row, col) in Zhang-Suen order P2..P9:
/// N, NE, E, SE, S, SW, W, NW. Out-of-bounds reads as background.
#[inline]
fn ring(data: &[u8], w: usize, h: usize, row: usize, col: usize) -> [bool; 8] {
    let at = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && r < h as i64 && c < w as i64 && data[r as usize * w + c as usize] != 0
    };
    let (r, c) = (row as i64, col as i64);
    [
        at(r - 1, c),
        at(r - 1, c + 1),
        at(r, c + 1),
        at(r + 1, c + 1),
        at(r + 1, c),
        at(r + 1, c - 1),
        at(r, c - 1),
        at(r - 1, c - 1),
    ]
}

#[inline]
fn transitions(ring: &[bool; 8]) -> u32 {
    let mut a = 0;
    for i in 0..8 {
        if !ring[i] && ring[(i + 1) % 8] {
            a += 1;
        }
    }
    a
}

#[inline]
fn neighbor_count(ring: &[bool; 8]) -> u32 {
    ring.iter().filter(|&&b| b).count() as u32
}

/// Number of 8-connected components formed by the foreground ring pixels.
fn ring_components(ring: &[bool; 8]) -> u32 {
    // positions on the 3x3 ring in circular order; adjacent ring positions
    // are 8-adjacent, and transitions() counts the 0->1 boundaries, which
    // equals the number of circular runs of foreground.
    transitions(ring)
}

/// Zhang-Suen thinning. The output is a subset of the input, is one pixel
/// wide (no 2x2 foreground block remains), and preserves the number of
/// 8-connected components.
///
/// Two departures from the textbook algorithm keep those guarantees on
/// degenerate inputs: a follow-up pass removes residual 2x2 blocks by
/// deleting locally-safe pixels, and any input component that the iteration
/// erased entirely is restored as its first (row-major) pixel. Plain
/// Zhang-Suen deletes an isolated 2x2 square outright.
pub fn skeletonize(mask: &Raster<u8>) -> Result<Raster<u8>> {
    mask.ensure_binary_mask()?;
    let (w, h) = (mask.width(), mask.height());
    let input_blobs = connected_components(mask, Connectivity::Eight)?;
    let mut out = mask.clone();

    let mut to_delete: Vec<usize> = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            to_delete.clear();
            let data = out.channel(0);
            for row in 0..h {
                for col in 0..w {
                    if data[row * w + col] == 0 {
                        continue;
                    }
                    let nb = ring(data, w, h, row, col);
                    let b = neighbor_count(&nb);
                    if !(2..=6).contains(&b) || transitions(&nb) != 1 {
                        continue;
                    }
                    // nb indices: 0=N(P2) 2=E(P4) 4=S(P6) 6=W(P8)
                    let ok = if step == 0 {
                        (!nb[0] || !nb[2] || !nb[4]) && (!nb[2] || !nb[4] || !nb[6])
                    } else {
                        (!nb[0] || !nb[2] || !nb[6]) && (!nb[0] || !nb[4] || !nb[6])
                    };
                    if ok {
                        to_delete.push(row * w + col);
                    }
                }
            }
            if !to_delete.is_empty() {
                changed = true;
                let data = out.channel_mut(0);
                for &i in &to_delete {
                    data[i] = 0;
                }
            }
        }
        if !changed {
            break;
        }
    }

    remove_square_blocks(&mut out);

    // restore a representative pixel for any input component that vanished
    let mut survived = vec![false; input_blobs.blob_count];
    for row in 0..h {
        for col in 0..w {
            if out.get(0, row, col) != 0 {
                survived[(input_blobs.label(row, col) - 1) as usize] = true;
            }
        }
    }
    for (i, stat) in input_blobs.stats.iter().enumerate() {
        if !survived[i] {
            out.set(0, stat.first_pixel.0, stat.first_pixel.1, 1);
        }
    }

    Ok(out)
}

/// Deletes pixels of residual 2x2 foreground blocks when removal keeps the
/// local foreground ring connected and the pixel is not an endpoint.
fn remove_square_blocks(mask: &mut Raster<u8>) {
    let (w, h) = (mask.width(), mask.height());
    loop {
        let mut deleted = false;
        for row in 0..h {
            for col in 0..w {
                let data = mask.channel(0);
                if data[row * w + col] == 0 || !in_square_block(data, w, h, row, col) {
                    continue;
                }
                let nb = ring(data, w, h, row, col);
                if neighbor_count(&nb) >= 2 && ring_components(&nb) == 1 {
                    mask.channel_mut(0)[row * w + col] = 0;
                    deleted = true;
                }
            }
        }
        if !deleted {
            break;
        }
        let data = mask.channel(0);
        let any_block = (0..h).any(|r| (0..w).any(|c| in_square_block(data, w, h, r, c)));
        if !any_block {
            break;
        }
    }
}

#[inline]
fn in_square_block(data: &[u8], w: usize, h: usize, row: usize, col: usize) -> bool {
    let at = |r: i64, c: i64| -> bool {
        r >= 0 && c >= 0 && r < h as i64 && c < w as i64 && data[r as usize * w + c as usize] != 0
    };
    let (r, c) = (row as i64, col as i64);
    for (dr, dc) in [(0, 0), (0, -1), (-1, 0), (-1, -1)] {
        if at(r + dr, c + dc)
            && at(r + dr, c + dc + 1)
            && at(r + dr + 1, c + dc)
            && at(r + dr + 1, c + dc + 1)
        {
            return true;
        }
    }
    false
}

/// True if no 2x2 all-foreground block exists (the one-pixel-wide criterion).
pub fn is_thin(mask: &Raster<u8>) -> bool {
    let (w, h) = (mask.width(), mask.height());
    let data = mask.channel(0);
    for row in 0..h.saturating_sub(1) {
        for col in 0..w.saturating_sub(1) {
            if data[row * w + col] != 0
                && data[row * w + col + 1] != 0
                && data[(row + 1) * w + col] != 0
                && data[(row + 1) * w + col + 1] != 0
            {
                return false;
            }
        }
    }
    true
}
