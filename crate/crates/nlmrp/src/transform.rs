//! 4x4 integer transform and scalar quantization of prediction residuals.
//!
//! A macroblock residual is split into sixteen 4x4 blocks. Each block goes
//! through the separable integer transform
//!
//! ```text
//!     | 1  1  1  1 |
//! C = | 2  1 -1 -2 |      Y = C * X * C'
//!     | 1 -1 -1  1 |
//!     | 1 -2  2 -1 |
//! ```
//!
//! whose rows are orthogonal but not unit-norm; the per-coefficient gain is
//! folded into the quantizer step so that one step value `delta(qp)` applies
//! uniformly in the orthonormal domain. Quantization rounds toward zero
//! (dead-zone); dequantization reconstructs at the level center and inverts
//! the transform in double precision.

use crate::frame::{MB_PIXELS, MB_SIZE};

/// Quantization parameter, 0..=51. The quantizer step doubles every six
/// steps: `delta = 0.625 * 2^((qp - 4) / 6)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Qp(u8);

/// `2^(r/6)` for `r` in `0..6`, so steps are bit-exact across platforms.
const SIXTH_POWERS: [f64; 6] = [
    1.0,
    1.122_462_048_309_373,
    1.259_921_049_894_873_2,
    std::f64::consts::SQRT_2,
    1.587_401_051_968_199_4,
    1.781_797_436_280_678_5,
];

impl Qp {
    pub const MIN: u8 = 0;
    pub const MAX: u8 = 51;

    pub fn new(qp: u8) -> Option<Qp> {
        (qp <= Self::MAX).then_some(Qp(qp))
    }

    pub fn value(&self) -> u8 {
        self.0
    }

    /// Quantizer step size in the orthonormal coefficient domain.
    pub fn step(&self) -> f64 {
        let e = i32::from(self.0) - 4;
        let whole = e.div_euclid(6);
        let frac = e.rem_euclid(6) as usize;
        0.625 * SIXTH_POWERS[frac] * f64::powi(2.0, whole)
    }
}

/// Residual of one macroblock, row-major, entries in `[-255, 255]`.
pub type Residual = [i16; MB_PIXELS];

/// Quantized levels of one 4x4 block, row-major.
pub type CoeffBlock = [i32; 16];

/// Zig-zag scan order of a 4x4 block.
pub const ZIGZAG_4X4: [usize; 16] = [0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15];

/// Quantized transform coefficients of a 16x16 residual: sixteen 4x4
/// blocks in raster order (4 block-rows of 4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedMb {
    pub blocks: [CoeffBlock; 16],
}

impl QuantizedMb {
    /// One bit per 4x4 block (bit i = block i in raster order), set when
    /// the block carries any nonzero level.
    pub fn coded_pattern(&self) -> u16 {
        let mut cbp = 0u16;
        for (i, block) in self.blocks.iter().enumerate() {
            if block.iter().any(|&c| c != 0) {
                cbp |= 1 << i;
            }
        }
        cbp
    }
}

/// Squared row norms of the transform matrix.
const ROW_NORM_SQ: [f64; 4] = [4.0, 10.0, 4.0, 10.0];

#[inline]
fn coeff_gain(i: usize, j: usize) -> f64 {
    (ROW_NORM_SQ[i] * ROW_NORM_SQ[j]).sqrt()
}

/// Forward integer transform of a 4x4 block (exact in i32).
fn forward_4x4(x: &[i32; 16]) -> [i32; 16] {
    // Rows: t = C * x
    let mut t = [0i32; 16];
    for col in 0..4 {
        let a = x[col];
        let b = x[4 + col];
        let c = x[8 + col];
        let d = x[12 + col];
        t[col] = a + b + c + d;
        t[4 + col] = 2 * a + b - c - 2 * d;
        t[8 + col] = a - b - c + d;
        t[12 + col] = a - 2 * b + 2 * c - d;
    }
    // Columns: y = t * C'
    let mut y = [0i32; 16];
    for row in 0..4 {
        let a = t[4 * row];
        let b = t[4 * row + 1];
        let c = t[4 * row + 2];
        let d = t[4 * row + 3];
        y[4 * row] = a + b + c + d;
        y[4 * row + 1] = 2 * a + b - c - 2 * d;
        y[4 * row + 2] = a - b - c + d;
        y[4 * row + 3] = a - 2 * b + 2 * c - d;
    }
    y
}

/// Inverse of [`forward_4x4`] up to quantization, in double precision:
/// `x = C' * diag(1/n) * y * diag(1/n) * C`.
fn inverse_4x4(y: &[f64; 16]) -> [f64; 16] {
    let mut scaled = [0f64; 16];
    for i in 0..4 {
        for j in 0..4 {
            scaled[4 * i + j] = y[4 * i + j] / (ROW_NORM_SQ[i] * ROW_NORM_SQ[j]);
        }
    }
    // t = C' * scaled  (C' columns are C rows)
    let mut t = [0f64; 16];
    for col in 0..4 {
        let a = scaled[col];
        let b = scaled[4 + col];
        let c = scaled[8 + col];
        let d = scaled[12 + col];
        t[col] = a + 2.0 * b + c + d;
        t[4 + col] = a + b - c - 2.0 * d;
        t[8 + col] = a - b - c + 2.0 * d;
        t[12 + col] = a - 2.0 * b + c - d;
    }
    // x = t * C
    let mut x = [0f64; 16];
    for row in 0..4 {
        let a = t[4 * row];
        let b = t[4 * row + 1];
        let c = t[4 * row + 2];
        let d = t[4 * row + 3];
        x[4 * row] = a + 2.0 * b + c + d;
        x[4 * row + 1] = a + b - c - 2.0 * d;
        x[4 * row + 2] = a - b - c + 2.0 * d;
        x[4 * row + 3] = a - 2.0 * b + c - d;
    }
    x
}

/// Transforms and quantizes a macroblock residual.
pub fn transform_quantize(residual: &Residual, qp: Qp) -> QuantizedMb {
    let step = qp.step();
    let mut blocks = [[0i32; 16]; 16];
    for by in 0..4 {
        for bx in 0..4 {
            let mut x = [0i32; 16];
            for i in 0..4 {
                for j in 0..4 {
                    x[4 * i + j] = i32::from(residual[(4 * by + i) * MB_SIZE + 4 * bx + j]);
                }
            }
            let y = forward_4x4(&x);
            let q = &mut blocks[4 * by + bx];
            for i in 0..4 {
                for j in 0..4 {
                    // Dead-zone: round toward zero in the orthonormal domain.
                    q[4 * i + j] =
                        (f64::from(y[4 * i + j]) / (step * coeff_gain(i, j))).trunc() as i32;
                }
            }
        }
    }
    QuantizedMb { blocks }
}

/// Dequantizes and inverse-transforms back to a residual. Both encoder and
/// decoder reconstruct through this same pure function, which is what keeps
/// them drift-free.
pub fn dequantize_inverse(q: &QuantizedMb, qp: Qp) -> Residual {
    let step = qp.step();
    let mut residual = [0i16; MB_PIXELS];
    for by in 0..4 {
        for bx in 0..4 {
            let levels = &q.blocks[4 * by + bx];
            let mut y = [0f64; 16];
            for i in 0..4 {
                for j in 0..4 {
                    y[4 * i + j] = f64::from(levels[4 * i + j]) * step * coeff_gain(i, j);
                }
            }
            let x = inverse_4x4(&y);
            for i in 0..4 {
                for j in 0..4 {
                    let v = x[4 * i + j].round().clamp(-255.0, 255.0);
                    residual[(4 * by + i) * MB_SIZE + 4 * bx + j] = v as i16;
                }
            }
        }
    }
    residual
}
