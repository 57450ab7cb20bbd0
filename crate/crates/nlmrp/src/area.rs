//! The 32x32 refinement window.
//!
//! When a macroblock is predicted, a window of four macroblocks is cut out
//! of the frame: the three already-reconstructed neighbors (left, above,
//! above-left) and the freshly motion-compensated block itself. Refinement
//! operates on this window; only the bottom-right quadrant is ever
//! rewritten.
//!
//! Local coordinates are `(m, n) = (row, column)` with the origin at the
//! top-left of the window. A local sample `(m, n)` maps to the frame sample
//! `(x, y) = (x0 - 16 + n, y0 - 16 + m)` where `(x0, y0)` is the origin of
//! the macroblock being predicted.

use thiserror::Error;

use crate::frame::{Block16, MbPosition, Plane, MB_SIZE};

/// Edge length of the processing area (two macroblocks).
pub const AREA_SIZE: usize = 2 * MB_SIZE;
/// Samples in the processing area.
pub const AREA_PIXELS: usize = AREA_SIZE * AREA_SIZE;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AreaError {
    /// The macroblock sits in the first row or column and has no decoded
    /// left/above/above-left neighbors; refinement is not applicable.
    #[error("macroblock ({mb_x},{mb_y}) has no causal neighbors")]
    NeighborsUnavailable { mb_x: usize, mb_y: usize },
    #[error("local coordinates ({m},{n}) outside the {AREA_SIZE}x{AREA_SIZE} window")]
    OutOfBounds { m: usize, n: usize },
    #[error("macroblock window exceeds the {width}x{height} frame")]
    WindowOutOfFrame { width: usize, height: usize },
}

/// Which of the two sub-areas a window sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Already reconstructed neighbor content (left, above, above-left).
    Reconstructed,
    /// The motion-compensated block being refined (bottom-right quadrant).
    Compensated,
}

/// The four-macroblock window the refinement runs on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessingArea {
    samples: [u8; AREA_PIXELS],
}

impl ProcessingArea {
    /// Cuts the window out of `recon` around `pos` and plants `mc_block`
    /// into the bottom-right quadrant.
    ///
    /// `recon` must already hold the reconstructed neighbors of `pos`; the
    /// three reconstructed quadrants are plain copies, so later mutation of
    /// the returned area never touches the source plane.
    pub fn build(
        recon: &Plane,
        mc_block: &Block16,
        pos: MbPosition,
    ) -> Result<ProcessingArea, AreaError> {
        if !pos.has_causal_neighbors() {
            return Err(AreaError::NeighborsUnavailable {
                mb_x: pos.mb_x,
                mb_y: pos.mb_y,
            });
        }
        if pos.x0() + MB_SIZE > recon.width() || pos.y0() + MB_SIZE > recon.height() {
            return Err(AreaError::WindowOutOfFrame {
                width: recon.width(),
                height: recon.height(),
            });
        }

        let left = pos.x0() - MB_SIZE;
        let top = pos.y0() - MB_SIZE;
        let mut samples = [0u8; AREA_PIXELS];
        for m in 0..AREA_SIZE {
            let src = &recon.row(top + m)[left..left + AREA_SIZE];
            samples[m * AREA_SIZE..(m + 1) * AREA_SIZE].copy_from_slice(src);
        }
        let mut area = ProcessingArea { samples };
        for row in 0..MB_SIZE {
            for col in 0..MB_SIZE {
                area.samples[(MB_SIZE + row) * AREA_SIZE + MB_SIZE + col] = mc_block.get(row, col);
            }
        }
        Ok(area)
    }

    /// Builds an area directly from raw samples (row-major, 32x32).
    pub fn from_samples(samples: [u8; AREA_PIXELS]) -> ProcessingArea {
        ProcessingArea { samples }
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> u8 {
        debug_assert!(m < AREA_SIZE && n < AREA_SIZE);
        self.samples[m * AREA_SIZE + n]
    }

    #[inline]
    pub fn row(&self, m: usize) -> &[u8] {
        &self.samples[m * AREA_SIZE..(m + 1) * AREA_SIZE]
    }

    /// Region of the sample at local `(m, n)`: the bottom-right quadrant is
    /// the compensated block, everything else is reconstructed content.
    pub fn region_of(&self, m: usize, n: usize) -> Result<Region, AreaError> {
        if m >= AREA_SIZE || n >= AREA_SIZE {
            return Err(AreaError::OutOfBounds { m, n });
        }
        if m >= MB_SIZE && n >= MB_SIZE {
            Ok(Region::Compensated)
        } else {
            Ok(Region::Reconstructed)
        }
    }

    /// Smallest and largest sample value in the window.
    pub fn min_max(&self) -> (u8, u8) {
        let mut lo = u8::MAX;
        let mut hi = u8::MIN;
        for &s in &self.samples {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_fill_construction() {
        let recon = Plane::filled(48, 48, 128);
        let mc = Block16::filled(50);
        let area = ProcessingArea::build(&recon, &mc, MbPosition::new(1, 1)).unwrap();
        for m in 0..AREA_SIZE {
            for n in 0..AREA_SIZE {
                let expect = match area.region_of(m, n).unwrap() {
                    Region::Reconstructed => 128,
                    Region::Compensated => 50,
                };
                assert_eq!(area.get(m, n), expect, "at ({m},{n})");
            }
        }
    }

    #[test]
    fn first_column_has_no_neighbors() {
        let recon = Plane::filled(64, 64, 0);
        let mc = Block16::filled(0);
        let err = ProcessingArea::build(&recon, &mc, MbPosition::new(0, 3)).unwrap_err();
        assert_eq!(err, AreaError::NeighborsUnavailable { mb_x: 0, mb_y: 3 });
    }

    #[test]
    fn ramp_window_matches_index_arithmetic() {
        // v[x,y] = x + y restricted to the window [0..31]^2 for pos (1,1).
        let recon = Plane::from_fn(48, 48, |x, y| (x + y).min(255) as u8);
        let pos = MbPosition::new(1, 1);
        let mc = Block16::from_plane(&recon, pos);
        let area = ProcessingArea::build(&recon, &mc, pos).unwrap();
        for m in 0..AREA_SIZE {
            for n in 0..AREA_SIZE {
                assert_eq!(area.get(m, n), (m + n) as u8, "at ({m},{n})");
            }
        }
    }

    #[test]
    fn region_layout() {
        let area = ProcessingArea::from_samples([0; AREA_PIXELS]);
        assert_eq!(area.region_of(0, 0).unwrap(), Region::Reconstructed);
        assert_eq!(area.region_of(16, 16).unwrap(), Region::Compensated);
        assert_eq!(area.region_of(31, 15).unwrap(), Region::Reconstructed);
        assert_eq!(area.region_of(15, 31).unwrap(), Region::Reconstructed);
        assert!(matches!(
            area.region_of(32, 0),
            Err(AreaError::OutOfBounds { .. })
        ));

        let compensated = (0..AREA_SIZE)
            .flat_map(|m| (0..AREA_SIZE).map(move |n| (m, n)))
            .filter(|&(m, n)| area.region_of(m, n).unwrap() == Region::Compensated)
            .count();
        assert_eq!(compensated, 256);
        assert_eq!(AREA_PIXELS - compensated, 768);
    }

    #[test]
    fn build_copies_rather_than_borrows() {
        let recon = Plane::filled(48, 48, 77);
        let mc = Block16::filled(12);
        let pos = MbPosition::new(1, 1);
        let area = ProcessingArea::build(&recon, &mc, pos).unwrap();
        // Local (m, n) reads back the frame sample (x0-16+n, y0-16+m).
        for (m, n) in [(0usize, 0usize), (5, 20), (15, 31)] {
            let x = pos.x0() - MB_SIZE + n;
            let y = pos.y0() - MB_SIZE + m;
            assert_eq!(area.get(m, n), recon.get(x, y));
        }
        assert_eq!(area.get(20, 20), 12);
    }
}
