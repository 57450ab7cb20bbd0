//! Block motion estimation and quarter-sample motion compensation.
//!
//! Motion vectors are expressed in quarter-sample units and bounded by
//! [`MV_LIMIT_QPEL`] (16 full samples in each direction). Sub-sample values
//! come from a bilinear blend of the four surrounding integer samples;
//! samples outside the frame are border-replicated, so vectors may point
//! partially outside.
//!
//! The search is exhaustive over the entire quarter-sample grid. To keep
//! that affordable, [`InterpolatedRef`] precomputes one shifted plane per
//! fractional phase (16 of them) so every candidate reduces to an
//! integer-grid SAD over contiguous rows.

use std::sync::OnceLock;

use thiserror::Error;

use crate::frame::{Block16, MbPosition, Plane, MB_SIZE};

/// Search range in full samples.
pub const SEARCH_RANGE: i32 = 16;
/// Motion-vector bound in quarter-sample units.
pub const MV_LIMIT_QPEL: i32 = 4 * SEARCH_RANGE;

/// Padding of the phase planes, in full samples, so that every candidate
/// within the search range stays inside the cache.
const PHASE_PAD: i32 = SEARCH_RANGE;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MotionError {
    #[error("motion vector ({dx},{dy}) exceeds the +/-{MV_LIMIT_QPEL} quarter-sample bound")]
    MvOutOfRange { dx: i32, dy: i32 },
}

/// Displacement in quarter-sample units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub fn new(dx: i32, dy: i32) -> MotionVector {
        MotionVector { dx, dy }
    }

    pub fn in_range(&self) -> bool {
        self.dx.abs() <= MV_LIMIT_QPEL && self.dy.abs() <= MV_LIMIT_QPEL
    }
}

/// A reference plane with quarter-sample access.
pub struct InterpolatedRef<'a> {
    plane: &'a Plane,
    /// 16 phase planes, one per `(fx, fy)` fractional offset, each of size
    /// `phase_w x phase_h` and covering integer bases
    /// `[-PHASE_PAD, width + PHASE_PAD)`.
    phases: Vec<u8>,
    phase_w: usize,
    phase_h: usize,
}

impl<'a> InterpolatedRef<'a> {
    pub fn new(plane: &'a Plane) -> InterpolatedRef<'a> {
        let phase_w = plane.width() + 2 * PHASE_PAD as usize;
        let phase_h = plane.height() + 2 * PHASE_PAD as usize;
        let mut phases = vec![0u8; 16 * phase_w * phase_h];
        for fy in 0..4i32 {
            for fx in 0..4i32 {
                let base = Self::phase_index(fx, fy) * phase_w * phase_h;
                let dst = &mut phases[base..base + phase_w * phase_h];
                let mut i = 0;
                for by in -PHASE_PAD..plane.height() as i32 + PHASE_PAD {
                    for bx in -PHASE_PAD..plane.width() as i32 + PHASE_PAD {
                        dst[i] = bilinear(
                            plane,
                            4 * i64::from(bx) + i64::from(fx),
                            4 * i64::from(by) + i64::from(fy),
                        );
                        i += 1;
                    }
                }
            }
        }
        InterpolatedRef {
            plane,
            phases,
            phase_w,
            phase_h,
        }
    }

    #[inline]
    fn phase_index(fx: i32, fy: i32) -> usize {
        (fy * 4 + fx) as usize
    }

    pub fn plane(&self) -> &Plane {
        self.plane
    }

    /// Sample value at quarter-sample coordinates `(x4, y4)`.
    ///
    /// Integer positions (multiples of 4) return the reference sample
    /// exactly; other positions blend the four surrounding samples with
    /// weights from the fractional parts, rounded to nearest.
    #[inline]
    pub fn interpolate_at(&self, x4: i64, y4: i64) -> u8 {
        bilinear(self.plane, x4, y4)
    }

    /// Row of `len` cached samples for integer base `(bx, by)` and phase
    /// `(fx, fy)`. Bases must lie within the padded window.
    #[inline]
    fn phase_row(&self, fx: i32, fy: i32, bx: i32, by: i32, len: usize) -> &[u8] {
        let px = (bx + PHASE_PAD) as usize;
        let py = (by + PHASE_PAD) as usize;
        let start =
            Self::phase_index(fx, fy) * self.phase_w * self.phase_h + py * self.phase_w + px;
        &self.phases[start..start + len]
    }
}

#[inline]
fn bilinear(plane: &Plane, x4: i64, y4: i64) -> u8 {
    let xi = x4.div_euclid(4);
    let yi = y4.div_euclid(4);
    let fx = (x4 - 4 * xi) as u32;
    let fy = (y4 - 4 * yi) as u32;
    if fx == 0 && fy == 0 {
        return plane.get_clamped(xi, yi);
    }
    let p00 = u32::from(plane.get_clamped(xi, yi));
    let p01 = u32::from(plane.get_clamped(xi + 1, yi));
    let p10 = u32::from(plane.get_clamped(xi, yi + 1));
    let p11 = u32::from(plane.get_clamped(xi + 1, yi + 1));
    let sum = (4 - fx) * (4 - fy) * p00 + fx * (4 - fy) * p01 + (4 - fx) * fy * p10 + fx * fy * p11;
    ((sum + 8) >> 4) as u8
}

/// Result of a block motion search.
#[derive(Debug, Clone)]
pub struct MotionSearch {
    pub mv: MotionVector,
    pub pred: Block16,
    pub sad: u32,
}

/// All candidate displacements in tie-break order: smaller `|dx|+|dy|`
/// first, then smaller `dy`, then smaller `dx`. Scanning in this order
/// and keeping the first strict SAD improvement yields exactly the
/// lexicographic argmin of `(sad, |dx|+|dy|, dy, dx)`.
fn candidate_order() -> &'static [(i32, i32)] {
    static ORDER: OnceLock<Vec<(i32, i32)>> = OnceLock::new();
    ORDER.get_or_init(|| {
        let mut all = Vec::with_capacity((2 * MV_LIMIT_QPEL as usize + 1).pow(2));
        for dy in -MV_LIMIT_QPEL..=MV_LIMIT_QPEL {
            for dx in -MV_LIMIT_QPEL..=MV_LIMIT_QPEL {
                all.push((dx, dy));
            }
        }
        all.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dy, dx));
        all
    })
}

/// Exhaustive quarter-sample search for the displacement minimizing the
/// SAD between `cur` and the displaced reference block at `pos`.
///
/// Every candidate on the quarter-sample grid within the search range is
/// evaluated; ties are broken toward smaller `|dx|+|dy|`, then smaller
/// `dy`, then smaller `dx`. The returned prediction is recomputed through
/// [`motion_compensate`], so it is bit-identical to what a decoder
/// produces for the returned vector.
pub fn motion_search(cur: &Block16, reference: &InterpolatedRef, pos: MbPosition) -> MotionSearch {
    let x0 = pos.x0() as i32;
    let y0 = pos.y0() as i32;
    let mut best_sad = u32::MAX;
    let mut best = (0i32, 0i32);

    for &(dx, dy) in candidate_order() {
        let bx = x0 + dx.div_euclid(4);
        let by = y0 + dy.div_euclid(4);
        let fx = dx.rem_euclid(4);
        let fy = dy.rem_euclid(4);

        let mut sad = 0u32;
        for row in 0..MB_SIZE {
            let pred_row = reference.phase_row(fx, fy, bx, by + row as i32, MB_SIZE);
            let cur_row = cur.row(row);
            sad += cur_row
                .iter()
                .zip(pred_row)
                .map(|(&a, &b)| u32::from(a.abs_diff(b)))
                .sum::<u32>();
            if sad >= best_sad {
                break;
            }
        }
        if sad < best_sad {
            best_sad = sad;
            best = (dx, dy);
            if sad == 0 {
                break;
            }
        }
    }

    let mv = MotionVector::new(best.0, best.1);
    let pred = motion_compensate(reference, pos, mv).expect("search stays in range");
    debug_assert_eq!(sad_block(cur, &pred), best_sad);
    MotionSearch {
        mv,
        pred,
        sad: best_sad,
    }
}

/// Sum of absolute differences between two blocks.
pub fn sad_block(a: &Block16, b: &Block16) -> u32 {
    a.as_array()
        .iter()
        .zip(b.as_array())
        .map(|(&x, &y)| u32::from(x.abs_diff(y)))
        .sum()
}

/// Displaced reference block for `pos` and `mv`:
/// `pred[i][j] = ref((x0+j)*4 + dx, (y0+i)*4 + dy)` on the quarter grid.
pub fn motion_compensate(
    reference: &InterpolatedRef,
    pos: MbPosition,
    mv: MotionVector,
) -> Result<Block16, MotionError> {
    if !mv.in_range() {
        return Err(MotionError::MvOutOfRange {
            dx: mv.dx,
            dy: mv.dy,
        });
    }
    let x0 = pos.x0() as i64;
    let y0 = pos.y0() as i64;
    Ok(Block16::from_fn(|row, col| {
        reference.interpolate_at(
            (x0 + col as i64) * 4 + i64::from(mv.dx),
            (y0 + row as i64) * 4 + i64::from(mv.dy),
        )
    }))
}
