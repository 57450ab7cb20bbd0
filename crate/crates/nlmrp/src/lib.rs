//! A compact hybrid video codec built around motion-compensated prediction
//! with non-local means refinement, plus the tooling to measure what the
//! refinement buys: PSNR, rate-distortion sweeps and Bjontegaard deltas.
//!
//! Prediction runs in two steps. A 16x16 macroblock is first predicted by
//! quarter-sample motion compensation from the previous reconstructed
//! frame; the compensated block is then refined by non-local means
//! averaging over a 32x32 window that also contains the three
//! already-decoded neighbor macroblocks of the *current* frame. One flag
//! bit per macroblock tells the decoder whether the refinement is applied,
//! so it is only ever used where it actually improves the predictor.
//!
//! The crate is organized along the codec's data path:
//!
//! - [`frame`]: planes, frames, macroblock geometry.
//! - [`area`]: the 32x32 refinement window and its two regions.
//! - [`motion`]: exhaustive quarter-sample block search and compensation.
//! - [`refine`]: the non-local means kernel.
//! - [`transform`]: 4x4 integer transform and dead-zone quantization.
//! - [`bits`]: bit-level I/O and exp-Golomb codes.
//! - [`codec`]: the encode/decode loop and bitstream container.
//! - [`metrics`]: PSNR, RD curves, BD-rate / BD-PSNR.
//! - [`synth`]: deterministic synthetic test sequences.
//! - [`source`]: y4m / raw ingestion, padding, y4m output.
//!
//! The book under `book/` walks through the same material chapter by
//! chapter; its code snippets compile and run as doc-tests.

pub mod area;
pub mod bits;
pub mod codec;
pub mod frame;
pub mod metrics;
pub mod motion;
pub mod refine;
pub mod source;
pub mod synth;
pub mod transform;

mod book;

pub use area::{AreaError, ProcessingArea, Region, AREA_PIXELS, AREA_SIZE};
pub use codec::{
    decode_sequence, encode_sequence, CodecError, Decoded, Encoded, EncoderConfig, SequenceHeader,
};
pub use frame::{Block16, Frame, FrameError, MbPosition, Plane, MB_PIXELS, MB_SIZE};
pub use metrics::{
    bd_psnr, bd_rate, collect_rd_curve, psnr, psnr_cropped, MetricsError, RdCurve, RdPoint, RdRow,
};
pub use motion::{
    motion_compensate, motion_search, InterpolatedRef, MotionError, MotionVector, MV_LIMIT_QPEL,
    SEARCH_RANGE,
};
pub use refine::{nlm_weight, offset_set, refine_block, ssd_distance, NlmParams, RefinedBlock};
pub use source::{load_sequence, LoadError, LoadedSequence, SequenceSource};
pub use synth::{generate_synthetic, Prng, SyntheticKind, SyntheticSpec};
pub use transform::{dequantize_inverse, transform_quantize, Qp, QuantizedMb};
