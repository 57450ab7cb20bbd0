//! Non-local means refinement of the motion-compensated block.
//!
//! Motion compensation alone carries the reference frame's quantization
//! noise into the predictor and misses anything the displaced block cannot
//! express (small illumination changes, sub-sample warps, revealed
//! content). The three neighbor macroblocks in the processing area were
//! reconstructed from the *current* frame, so they carry the up-to-date
//! signal. Refinement transfers that information by non-local averaging:
//! each sample of the compensated quadrant is replaced by a weighted mean
//! of every window sample whose surrounding patch resembles its own.
//!
//! For a target sample at `(m, n)` and a candidate at `(k, l)` the patch
//! distance is the sum of squared differences over a `(2*d_m+1)^2`
//! neighborhood,
//!
//! ```text
//! d = sum over (mu, nu) of (s[m+mu, n+nu] - s[k+mu, l+nu])^2
//! ```
//!
//! and the candidate's weight is `exp(-d / h^2)`. The refined value is the
//! weight-normalized average of the candidate samples themselves. `h`
//! controls how quickly influence decays with patch dissimilarity; the
//! target always participates with weight exactly 1, so the average is
//! well defined and stays inside the window's value range.
//!
//! Near the window border the neighborhood is shrunk so that no sample
//! outside the window is referenced, and a candidate is admitted only when
//! its own (equally shrunk) neighborhood lies fully inside the window.
//! Distances compared against each other are therefore always sums over
//! the same offset set.

use thiserror::Error;

use crate::area::{ProcessingArea, AREA_SIZE};
use crate::frame::{Block16, MB_SIZE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("averaging strength h must be positive, got {0}")]
    NonPositiveStrength(f64),
}

/// Refinement tuning: patch half-width and averaging strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmParams {
    d_m: usize,
    h: f64,
}

impl NlmParams {
    /// Default patch half-width (patches span 7x7 samples).
    pub const DEFAULT_D_M: usize = 3;
    /// Default averaging strength.
    pub const DEFAULT_H: f64 = 25.0;

    pub fn new(d_m: usize, h: f64) -> Result<NlmParams, RefineError> {
        if h.is_nan() || h <= 0.0 {
            return Err(RefineError::NonPositiveStrength(h));
        }
        Ok(NlmParams { d_m, h })
    }

    /// Like [`NlmParams::new`] but with `h` snapped to the nearest
    /// sixteenth, the resolution the bitstream header stores it at.
    pub fn quantized(d_m: usize, h: f64) -> Result<NlmParams, RefineError> {
        Self::new(d_m, (h * 16.0).round() / 16.0)
    }

    pub fn d_m(&self) -> usize {
        self.d_m
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

impl Default for NlmParams {
    fn default() -> NlmParams {
        NlmParams {
            d_m: Self::DEFAULT_D_M,
            h: Self::DEFAULT_H,
        }
    }
}

/// The rectangle of patch offsets usable at one window position: the full
/// `[-d_m, d_m]^2` square clipped so every offset stays inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OffsetWindow {
    pub mu_lo: i32,
    pub mu_hi: i32,
    pub nu_lo: i32,
    pub nu_hi: i32,
}

impl OffsetWindow {
    pub fn len(&self) -> usize {
        ((self.mu_hi - self.mu_lo + 1) * (self.nu_hi - self.nu_lo + 1)) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // always contains (0, 0)
    }

    pub fn contains(&self, mu: i32, nu: i32) -> bool {
        mu >= self.mu_lo && mu <= self.mu_hi && nu >= self.nu_lo && nu <= self.nu_hi
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let s = *self;
        (s.mu_lo..=s.mu_hi).flat_map(move |mu| (s.nu_lo..=s.nu_hi).map(move |nu| (mu, nu)))
    }
}

/// Patch offsets available around window position `(m, n)`: all
/// `(mu, nu)` in `[-d_m, d_m]^2` with `(m+mu, n+nu)` still inside the
/// window. Interior positions get the full square.
pub fn offset_set(m: usize, n: usize, d_m: usize) -> OffsetWindow {
    debug_assert!(m < AREA_SIZE && n < AREA_SIZE);
    let d = d_m as i32;
    let last = AREA_SIZE as i32 - 1;
    OffsetWindow {
        mu_lo: (-d).max(-(m as i32)),
        mu_hi: d.min(last - m as i32),
        nu_lo: (-d).max(-(n as i32)),
        nu_hi: d.min(last - n as i32),
    }
}

/// Sum of squared differences between the patches around `target` and
/// `candidate`, taken over exactly the supplied offsets. Both patches must
/// lie inside the window for every offset.
pub fn ssd_distance(
    area: &ProcessingArea,
    target: (usize, usize),
    candidate: (usize, usize),
    offsets: &OffsetWindow,
) -> u64 {
    let (m, n) = (target.0 as i32, target.1 as i32);
    let (k, l) = (candidate.0 as i32, candidate.1 as i32);
    let width = (offsets.nu_hi - offsets.nu_lo + 1) as usize;
    let mut acc = 0u64;
    for mu in offsets.mu_lo..=offsets.mu_hi {
        let t0 = (n + offsets.nu_lo) as usize;
        let c0 = (l + offsets.nu_lo) as usize;
        let t_row = &area.row((m + mu) as usize)[t0..t0 + width];
        let c_row = &area.row((k + mu) as usize)[c0..c0 + width];
        acc += t_row
            .iter()
            .zip(c_row)
            .map(|(&a, &b)| {
                let d = i32::from(a) - i32::from(b);
                (d * d) as u64
            })
            .sum::<u64>();
    }
    acc
}

/// Similarity weight for a patch distance `d`: `exp(-d / h^2)`.
///
/// Strictly decreasing in `d`, strictly increasing in `h` for `d > 0`, and
/// exactly 1 at `d = 0`.
#[inline]
pub fn nlm_weight(d: f64, h: f64) -> f64 {
    (-d / (h * h)).exp()
}

/// Refined samples for the compensated quadrant, kept in double precision
/// until written into a predictor.
#[derive(Debug, Clone)]
pub struct RefinedBlock {
    values: [f64; MB_SIZE * MB_SIZE],
}

impl RefinedBlock {
    /// Refined value at `(row, col)` within the compensated block.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * MB_SIZE + col]
    }

    /// Rounds half-up to 8-bit samples.
    pub fn to_block(&self) -> Block16 {
        Block16::from_fn(|row, col| (self.value(row, col) + 0.5).floor().clamp(0.0, 255.0) as u8)
    }
}

/// Runs non-local means over the window and returns the refined bottom-right
/// quadrant. Only the compensated block is rewritten; the reconstructed
/// samples serve purely as averaging candidates.
///
/// For each target sample the candidate set spans every window position
/// whose shrunk patch fits entirely inside the window; the target itself is
/// always a candidate with weight 1, so the weighted mean exists and lies
/// within `[min, max]` of the window samples.
pub fn refine_block(area: &ProcessingArea, params: &NlmParams) -> RefinedBlock {
    let d_m = params.d_m();
    let h = params.h();
    let last = AREA_SIZE as i32 - 1;
    let mut values = [0f64; MB_SIZE * MB_SIZE];

    for m in MB_SIZE..AREA_SIZE {
        for n in MB_SIZE..AREA_SIZE {
            let offsets = offset_set(m, n, d_m);
            // Candidates whose patch covers the same offsets inside the
            // window form a rectangle.
            let k_lo = (-offsets.mu_lo) as usize;
            let k_hi = (last - offsets.mu_hi) as usize;
            let l_lo = (-offsets.nu_lo) as usize;
            let l_hi = (last - offsets.nu_hi) as usize;
            debug_assert!((k_lo..=k_hi).contains(&m) && (l_lo..=l_hi).contains(&n));

            let mut num = 0f64;
            let mut den = 0f64;
            for k in k_lo..=k_hi {
                for l in l_lo..=l_hi {
                    let d = ssd_distance(area, (m, n), (k, l), &offsets);
                    let w = nlm_weight(d as f64, h);
                    num += w * f64::from(area.get(k, l));
                    den += w;
                }
            }
            debug_assert!(den >= 1.0); // self-candidacy
            values[(m - MB_SIZE) * MB_SIZE + (n - MB_SIZE)] = num / den;
        }
    }

    RefinedBlock { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::AREA_PIXELS;

    fn area_from_fn(mut f: impl FnMut(usize, usize) -> u8) -> ProcessingArea {
        let mut samples = [0u8; AREA_PIXELS];
        for m in 0..AREA_SIZE {
            for n in 0..AREA_SIZE {
                samples[m * AREA_SIZE + n] = f(m, n);
            }
        }
        ProcessingArea::from_samples(samples)
    }

    #[test]
    fn interior_offset_square_is_full() {
        let w = offset_set(20, 20, 3);
        assert_eq!(w.len(), 49);
        assert_eq!((w.mu_lo, w.mu_hi, w.nu_lo, w.nu_hi), (-3, 3, -3, 3));
    }

    #[test]
    fn corner_offsets_shrink() {
        let w = offset_set(31, 31, 3);
        assert_eq!(w.len(), 16);
        assert_eq!((w.mu_lo, w.mu_hi, w.nu_lo, w.nu_hi), (-3, 0, -3, 0));
    }

    #[test]
    fn edge_offsets_match_enumeration() {
        let w = offset_set(16, 31, 3);
        // Independent count: all (mu, nu) in [-3,3]^2 keeping (16+mu, 31+nu)
        // inside [0, 31]^2.
        let mut expect = 0;
        for mu in -3i32..=3 {
            for nu in -3i32..=3 {
                let m = 16 + mu;
                let n = 31 + nu;
                if (0..32).contains(&m) && (0..32).contains(&n) {
                    expect += 1;
                }
            }
        }
        assert_eq!(expect, 28);
        assert_eq!(w.len(), expect);
        assert_eq!(w.iter().count(), expect);
    }

    #[test]
    fn self_distance_is_zero() {
        let area = area_from_fn(|m, n| ((m * 7 + n * 13) % 256) as u8);
        let offsets = offset_set(20, 20, 3);
        assert_eq!(ssd_distance(&area, (20, 20), (20, 20), &offsets), 0);
    }

    #[test]
    fn constant_area_distances_vanish() {
        let area = area_from_fn(|_, _| 99);
        let offsets = offset_set(18, 22, 3);
        for k in (3..29).step_by(5) {
            for l in (3..29).step_by(5) {
                assert_eq!(ssd_distance(&area, (18, 22), (k, l), &offsets), 0);
            }
        }
    }

    #[test]
    fn single_sample_difference_contributes_its_square() {
        // Two 7x7 patches differing in one sample by 5 -> distance 25.
        let mut samples = [60u8; AREA_PIXELS];
        samples[(20 + 1) * AREA_SIZE + (8 + 2)] = 65; // offset (1,2) of candidate patch
        let area = ProcessingArea::from_samples(samples);
        let offsets = offset_set(20, 20, 3);
        assert_eq!(ssd_distance(&area, (20, 20), (20, 8), &offsets), 25);
    }

    #[test]
    fn weight_spot_values() {
        assert_eq!(nlm_weight(0.0, 25.0), 1.0);
        assert!((nlm_weight(625.0, 25.0) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((nlm_weight(1250.0, 25.0) - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn weight_monotonicity() {
        let h = 25.0;
        let mut prev = nlm_weight(0.0, h);
        for d in [1.0, 10.0, 100.0, 1000.0, 10_000.0] {
            let w = nlm_weight(d, h);
            assert!(w < prev);
            prev = w;
        }
        // Larger h lifts the weight of any positive distance.
        assert!(nlm_weight(500.0, 50.0) > nlm_weight(500.0, 25.0));
        assert!(nlm_weight(500.0, 25.0) > nlm_weight(500.0, 10.0));
    }

    #[test]
    fn constant_area_refines_to_itself() {
        let area = area_from_fn(|_, _| 128);
        let refined = refine_block(&area, &NlmParams::default());
        for row in 0..MB_SIZE {
            for col in 0..MB_SIZE {
                assert!((refined.value(row, col) - 128.0).abs() < 1e-9);
            }
        }
        assert_eq!(refined.to_block(), Block16::filled(128));
    }

    #[test]
    fn perturbed_sample_moves_toward_texture() {
        // The window repeats a short texture everywhere; one compensated
        // sample is pushed 20 levels up. Averaging against the clean
        // repetitions must pull it strictly back down.
        let texture = |m: usize, n: usize| (100 + 6 * ((m + 2 * n) % 4)) as u8;
        let mut samples = [0u8; AREA_PIXELS];
        for m in 0..AREA_SIZE {
            for n in 0..AREA_SIZE {
                samples[m * AREA_SIZE + n] = texture(m, n);
            }
        }
        let clean = f64::from(texture(24, 24));
        samples[24 * AREA_SIZE + 24] = (clean as u8).saturating_add(20);
        let area = ProcessingArea::from_samples(samples);

        let refined = refine_block(&area, &NlmParams::default());
        let got = refined.value(24 - MB_SIZE, 24 - MB_SIZE);
        assert!(
            got < clean + 20.0 && got > clean - 1.0,
            "expected movement toward {clean}, got {got}"
        );
    }

    #[test]
    fn params_reject_non_positive_strength() {
        assert!(NlmParams::new(3, 0.0).is_err());
        assert!(NlmParams::new(3, -1.0).is_err());
        assert!(NlmParams::new(0, 1.0).is_ok());
    }

    #[test]
    fn quantized_strength_snaps_to_sixteenths() {
        assert_eq!(NlmParams::quantized(3, 25.05).unwrap().h(), 25.0625);
        assert_eq!(NlmParams::quantized(3, 25.03).unwrap().h(), 25.0);
        assert_eq!(NlmParams::quantized(3, 25.0).unwrap().h(), 25.0);
    }
}
