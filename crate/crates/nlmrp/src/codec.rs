//! The hybrid coding loop: P-frame encoder with per-macroblock choice
//! between plain motion compensation and refined prediction, the matching
//! decoder, and the bitstream container.
//!
//! The first frame is intra coded (left-neighbor DPCM); every later frame
//! is a P-frame predicted from the previous reconstruction. Macroblocks are
//! visited in line-scan order, so by the time a block is predicted its
//! left, above and above-left neighbors are already reconstructed and can
//! feed the refinement window. Each macroblock spends one raw flag bit that
//! tells the decoder whether to refine the motion-compensated block; the
//! encoder sets it only when refinement strictly lowers the prediction SSD
//! (ties keep plain compensation), and never on blocks without causal
//! neighbors.
//!
//! The encoder reconstructs exactly like the decoder - same reference
//! samples, same pure functions, same order - which keeps the two
//! bit-identical for every frame of every stream (no drift).
//!
//! Bitstream layout (MSB-first, big-endian multi-bit fields):
//!
//! ```text
//! magic "NLRP" (4 bytes)  version u8
//! width u16  height u16  frame_count u16  qp u8  d_m u8
//! h u16 (sixteenths)  fps u8
//! intra frame: per sample, signed exp-Golomb DPCM level (raster order)
//! each P frame, per macroblock in line-scan order:
//!   refine flag (1 bit)
//!   mv delta vs left neighbor (2 signed exp-Golomb, quarter samples)
//!   coded block pattern (16 bits, one per 4x4 block)
//!   per coded block: ue(nonzeros - 1), then (ue(zero run), se(level))
//!   pairs in zig-zag order
//! ```
//!
//! Only luma is coded; chroma planes accepted at ingestion are not carried
//! through the codec.

use thiserror::Error;

use crate::area::ProcessingArea;
use crate::bits::{BitReader, BitWriter, BitsError};
use crate::frame::{block_ssd, Block16, Frame, MbPosition, Plane, MB_PIXELS, MB_SIZE};
use crate::motion::{motion_compensate, motion_search, InterpolatedRef, MotionVector};
use crate::refine::{refine_block, NlmParams};
use crate::transform::{
    dequantize_inverse, transform_quantize, Qp, QuantizedMb, Residual, ZIGZAG_4X4,
};

pub const MAGIC: [u8; 4] = *b"NLRP";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("frame dimensions {width}x{height} unusable: {reason}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        reason: &'static str,
    },
    #[error("cannot encode an empty sequence")]
    EmptySequence,
    #[error("sequence does not fit the header: {0}")]
    HeaderLimit(String),
    #[error("malformed bitstream: {0}")]
    MalformedBitstream(String),
}

impl From<BitsError> for CodecError {
    fn from(e: BitsError) -> CodecError {
        CodecError::MalformedBitstream(e.to_string())
    }
}

/// Fixed per-stream coding parameters.
#[derive(Debug, Clone, Copy)]
pub struct EncoderConfig {
    pub qp: Qp,
    pub params: NlmParams,
    /// When false the refinement path is skipped entirely and every flag
    /// bit stays zero; the bitstream layout is unchanged.
    pub refine: bool,
    pub fps: u8,
}

impl EncoderConfig {
    pub fn new(
        qp: Qp,
        params: NlmParams,
        refine: bool,
        fps: u8,
    ) -> Result<EncoderConfig, CodecError> {
        let sixteenths = (params.h() * 16.0).round();
        if !(1.0..=65535.0).contains(&sixteenths) {
            return Err(CodecError::HeaderLimit(format!(
                "averaging strength {} not representable in sixteenths",
                params.h()
            )));
        }
        if params.d_m() > u8::MAX as usize {
            return Err(CodecError::HeaderLimit(format!(
                "patch half-width {} exceeds 255",
                params.d_m()
            )));
        }
        if fps == 0 {
            return Err(CodecError::HeaderLimit("fps must be at least 1".into()));
        }
        // Snap h so encoder and decoder agree bit-exactly.
        let params = NlmParams::quantized(params.d_m(), params.h()).expect("validated above");
        Ok(EncoderConfig {
            qp,
            params,
            refine,
            fps,
        })
    }
}

/// Parsed stream header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceHeader {
    pub width: u16,
    pub height: u16,
    pub frame_count: u16,
    pub qp: Qp,
    pub d_m: u8,
    pub h_sixteenths: u16,
    pub fps: u8,
}

impl SequenceHeader {
    pub fn params(&self) -> NlmParams {
        NlmParams::new(usize::from(self.d_m), f64::from(self.h_sixteenths) / 16.0)
            .expect("header strength is positive")
    }

    fn write(&self, w: &mut BitWriter) {
        for &b in MAGIC.iter() {
            w.write_bits(u32::from(b), 8);
        }
        w.write_bits(u32::from(FORMAT_VERSION), 8);
        w.write_bits(u32::from(self.width), 16);
        w.write_bits(u32::from(self.height), 16);
        w.write_bits(u32::from(self.frame_count), 16);
        w.write_bits(u32::from(self.qp.value()), 8);
        w.write_bits(u32::from(self.d_m), 8);
        w.write_bits(u32::from(self.h_sixteenths), 16);
        w.write_bits(u32::from(self.fps), 8);
    }

    fn read(r: &mut BitReader) -> Result<SequenceHeader, CodecError> {
        for &expect in MAGIC.iter() {
            if r.read_bits(8)? as u8 != expect {
                return Err(CodecError::MalformedBitstream("bad magic".into()));
            }
        }
        let version = r.read_bits(8)? as u8;
        if version != FORMAT_VERSION {
            return Err(CodecError::MalformedBitstream(format!(
                "unsupported version {version}"
            )));
        }
        let width = r.read_bits(16)? as u16;
        let height = r.read_bits(16)? as u16;
        let frame_count = r.read_bits(16)? as u16;
        let qp = Qp::new(r.read_bits(8)? as u8)
            .ok_or_else(|| CodecError::MalformedBitstream("qp out of range".into()))?;
        let d_m = r.read_bits(8)? as u8;
        let h_sixteenths = r.read_bits(16)? as u16;
        if h_sixteenths == 0 {
            return Err(CodecError::MalformedBitstream(
                "zero averaging strength".into(),
            ));
        }
        let fps = r.read_bits(8)? as u8;
        if fps == 0 {
            return Err(CodecError::MalformedBitstream("zero fps".into()));
        }
        if width == 0
            || height == 0
            || usize::from(width) % MB_SIZE != 0
            || usize::from(height) % MB_SIZE != 0
        {
            return Err(CodecError::MalformedBitstream(format!(
                "dimensions {width}x{height} are not macroblock aligned"
            )));
        }
        Ok(SequenceHeader {
            width,
            height,
            frame_count,
            qp,
            d_m,
            h_sixteenths,
            fps,
        })
    }
}

/// Per-frame encoder accounting.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrameStats {
    pub bits: u64,
    pub total_mbs: u32,
    pub eligible_mbs: u32,
    pub refined_mbs: u32,
    /// Prediction SSD of plain motion compensation, summed over macroblocks.
    pub mc_ssd: u64,
    /// Prediction SSD of the predictors actually chosen.
    pub pred_ssd: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SequenceStats {
    /// Exact bits written, header included, before final byte padding.
    pub total_bits: u64,
    pub frames: Vec<FrameStats>,
}

/// Encoder output: the serialized stream plus the encoder-side
/// reconstruction for drift checks.
#[derive(Debug)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub stats: SequenceStats,
    pub recon: Vec<Plane>,
}

/// Decoder output.
#[derive(Debug)]
pub struct Decoded {
    pub header: SequenceHeader,
    pub frames: Vec<Frame>,
}

/// Outcome of the per-macroblock predictor choice.
#[derive(Debug, Clone)]
pub struct ModeDecision {
    pub refine: bool,
    pub pred: Block16,
    pub mc_ssd: u64,
    pub pred_ssd: u64,
}

/// Picks the predictor with the smaller SSD against the source block. Ties
/// keep plain compensation; an absent refined predictor forces the flag
/// off.
pub fn mode_decide(cur: &Block16, mc_pred: &Block16, refined: Option<&Block16>) -> ModeDecision {
    let mc_ssd = block_ssd(cur, mc_pred);
    if let Some(refined) = refined {
        let refined_ssd = block_ssd(cur, refined);
        if refined_ssd < mc_ssd {
            return ModeDecision {
                refine: true,
                pred: *refined,
                mc_ssd,
                pred_ssd: refined_ssd,
            };
        }
    }
    ModeDecision {
        refine: false,
        pred: *mc_pred,
        mc_ssd,
        pred_ssd: mc_ssd,
    }
}

fn add_residual(pred: &Block16, residual: &Residual) -> Block16 {
    Block16::from_fn(|row, col| {
        let v = i32::from(pred.get(row, col)) + i32::from(residual[row * MB_SIZE + col]);
        v.clamp(0, 255) as u8
    })
}

fn write_coefficients(w: &mut BitWriter, q: &QuantizedMb) {
    let cbp = q.coded_pattern();
    w.write_bits(u32::from(cbp), 16);
    for (i, block) in q.blocks.iter().enumerate() {
        if cbp & (1 << i) == 0 {
            continue;
        }
        let scanned: Vec<i32> = ZIGZAG_4X4.iter().map(|&z| block[z]).collect();
        let nonzeros = scanned.iter().filter(|&&c| c != 0).count() as u32;
        w.write_ue(nonzeros - 1);
        let mut run = 0u32;
        for &c in &scanned {
            if c == 0 {
                run += 1;
            } else {
                w.write_ue(run);
                w.write_se(c);
                run = 0;
            }
        }
    }
}

fn read_coefficients(r: &mut BitReader) -> Result<QuantizedMb, CodecError> {
    let cbp = r.read_bits(16)? as u16;
    let mut q = QuantizedMb {
        blocks: [[0i32; 16]; 16],
    };
    for i in 0..16 {
        if cbp & (1 << i) == 0 {
            continue;
        }
        let nonzeros = r.read_ue()? + 1;
        if nonzeros > 16 {
            return Err(CodecError::MalformedBitstream(format!(
                "{nonzeros} coefficients in a 4x4 block"
            )));
        }
        let mut scan_pos = 0usize;
        for _ in 0..nonzeros {
            let run = r.read_ue()? as usize;
            scan_pos += run;
            if scan_pos >= 16 {
                return Err(CodecError::MalformedBitstream(
                    "coefficient run past block end".into(),
                ));
            }
            let level = r.read_se()?;
            if level == 0 {
                return Err(CodecError::MalformedBitstream(
                    "zero level in coefficient list".into(),
                ));
            }
            q.blocks[i][ZIGZAG_4X4[scan_pos]] = level;
            scan_pos += 1;
        }
    }
    Ok(q)
}

/// Closed-loop DPCM intra coding: each sample is predicted from its
/// reconstructed left neighbor (128 at row starts) and the quantized
/// difference is entropy coded.
fn encode_intra_plane(cur: &Plane, qp: Qp, w: &mut BitWriter) -> Plane {
    let step = qp.step();
    let mut recon = Plane::filled(cur.width(), cur.height(), 0);
    for y in 0..cur.height() {
        for x in 0..cur.width() {
            let pred = if x == 0 {
                128i32
            } else {
                i32::from(recon.get(x - 1, y))
            };
            let diff = f64::from(i32::from(cur.get(x, y)) - pred);
            let level = (diff / step).round() as i32;
            w.write_se(level);
            let rec = pred + (f64::from(level) * step).round() as i32;
            recon.set(x, y, rec.clamp(0, 255) as u8);
        }
    }
    recon
}

fn decode_intra_plane(
    width: usize,
    height: usize,
    qp: Qp,
    r: &mut BitReader,
) -> Result<Plane, CodecError> {
    let step = qp.step();
    let mut recon = Plane::filled(width, height, 0);
    for y in 0..height {
        for x in 0..width {
            let pred = if x == 0 {
                128i32
            } else {
                i32::from(recon.get(x - 1, y))
            };
            let level = r.read_se()?;
            let rec = pred + (f64::from(level) * step).round() as i32;
            recon.set(x, y, rec.clamp(0, 255) as u8);
        }
    }
    Ok(recon)
}

/// Encodes one P-frame against the previous reconstruction, returning the
/// new reconstruction and stats. Macroblocks are processed strictly in
/// line-scan order because each refinement window reads reconstructed
/// neighbors of the frame being built.
fn encode_p_frame(
    cur: &Plane,
    ref_recon: &Plane,
    cfg: &EncoderConfig,
    w: &mut BitWriter,
) -> Result<(Plane, FrameStats), CodecError> {
    if cur.width() != ref_recon.width() || cur.height() != ref_recon.height() {
        return Err(CodecError::DimensionMismatch {
            width: cur.width(),
            height: cur.height(),
            reason: "reference frame has different dimensions",
        });
    }
    let bits_before = w.bit_len() as u64;
    let reference = InterpolatedRef::new(ref_recon);
    let mut recon = Plane::filled(cur.width(), cur.height(), 0);
    let mut stats = FrameStats::default();

    for mb_y in 0..cur.height() / MB_SIZE {
        let mut mv_pred = MotionVector::default();
        for mb_x in 0..cur.width() / MB_SIZE {
            let pos = MbPosition::new(mb_x, mb_y);
            let cur_block = Block16::from_plane(cur, pos);
            let search = motion_search(&cur_block, &reference, pos);

            let eligible = pos.has_causal_neighbors();
            let refined = if cfg.refine && eligible {
                let area = ProcessingArea::build(&recon, &search.pred, pos)
                    .expect("eligible macroblock has a full window");
                Some(refine_block(&area, &cfg.params).to_block())
            } else {
                None
            };
            let decision = mode_decide(&cur_block, &search.pred, refined.as_ref());

            let mut residual = [0i16; MB_PIXELS];
            for row in 0..MB_SIZE {
                for col in 0..MB_SIZE {
                    residual[row * MB_SIZE + col] =
                        i16::from(cur_block.get(row, col)) - i16::from(decision.pred.get(row, col));
                }
            }
            let q = transform_quantize(&residual, cfg.qp);
            let rec_res = dequantize_inverse(&q, cfg.qp);
            add_residual(&decision.pred, &rec_res).write_to(&mut recon, pos);

            w.write_bit(decision.refine);
            w.write_se(search.mv.dx - mv_pred.dx);
            w.write_se(search.mv.dy - mv_pred.dy);
            write_coefficients(w, &q);
            mv_pred = search.mv;

            stats.total_mbs += 1;
            stats.eligible_mbs += u32::from(eligible);
            stats.refined_mbs += u32::from(decision.refine);
            stats.mc_ssd += decision.mc_ssd;
            stats.pred_ssd += decision.pred_ssd;
        }
    }
    stats.bits = w.bit_len() as u64 - bits_before;
    Ok((recon, stats))
}

fn decode_p_frame(
    ref_recon: &Plane,
    header: &SequenceHeader,
    r: &mut BitReader,
) -> Result<Plane, CodecError> {
    let width = usize::from(header.width);
    let height = usize::from(header.height);
    let params = header.params();
    let reference = InterpolatedRef::new(ref_recon);
    let mut recon = Plane::filled(width, height, 0);

    for mb_y in 0..height / MB_SIZE {
        let mut mv_pred = MotionVector::default();
        for mb_x in 0..width / MB_SIZE {
            let pos = MbPosition::new(mb_x, mb_y);
            let refine = r.read_bit()?;
            if refine && !pos.has_causal_neighbors() {
                return Err(CodecError::MalformedBitstream(format!(
                    "refine flag on macroblock ({mb_x},{mb_y}) without neighbors"
                )));
            }
            let mv = MotionVector::new(mv_pred.dx + r.read_se()?, mv_pred.dy + r.read_se()?);
            mv_pred = mv;
            let mc_pred = motion_compensate(&reference, pos, mv)
                .map_err(|e| CodecError::MalformedBitstream(e.to_string()))?;
            let pred = if refine {
                let area = ProcessingArea::build(&recon, &mc_pred, pos)
                    .expect("flag placement was validated");
                refine_block(&area, &params).to_block()
            } else {
                mc_pred
            };
            let q = read_coefficients(r)?;
            let rec_res = dequantize_inverse(&q, header.qp);
            add_residual(&pred, &rec_res).write_to(&mut recon, pos);
        }
    }
    Ok(recon)
}

fn validate_sequence(frames: &[Frame]) -> Result<(usize, usize), CodecError> {
    let first = frames.first().ok_or(CodecError::EmptySequence)?;
    let (width, height) = (first.width(), first.height());
    if width == 0 || height == 0 || width % MB_SIZE != 0 || height % MB_SIZE != 0 {
        return Err(CodecError::DimensionMismatch {
            width,
            height,
            reason: "dimensions must be positive multiples of 16",
        });
    }
    if width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(CodecError::HeaderLimit(format!(
            "dimensions {width}x{height} exceed 16-bit header fields"
        )));
    }
    if frames.len() > u16::MAX as usize {
        return Err(CodecError::HeaderLimit(format!(
            "{} frames exceed the 16-bit frame count",
            frames.len()
        )));
    }
    for f in frames {
        if f.width() != width || f.height() != height {
            return Err(CodecError::DimensionMismatch {
                width: f.width(),
                height: f.height(),
                reason: "all frames must share dimensions",
            });
        }
    }
    Ok((width, height))
}

/// Encodes a sequence: intra first frame, P-frames for the rest.
pub fn encode_sequence(frames: &[Frame], cfg: &EncoderConfig) -> Result<Encoded, CodecError> {
    let (width, height) = validate_sequence(frames)?;
    let header = SequenceHeader {
        width: width as u16,
        height: height as u16,
        frame_count: frames.len() as u16,
        qp: cfg.qp,
        d_m: cfg.params.d_m() as u8,
        h_sixteenths: (cfg.params.h() * 16.0).round() as u16,
        fps: cfg.fps,
    };

    let mut w = BitWriter::new();
    header.write(&mut w);
    let mut stats = SequenceStats::default();
    let mut recon_frames = Vec::with_capacity(frames.len());

    let bits_before = w.bit_len() as u64;
    let intra_recon = encode_intra_plane(&frames[0].luma, cfg.qp, &mut w);
    let total_mbs = (width / MB_SIZE * height / MB_SIZE) as u32;
    stats.frames.push(FrameStats {
        bits: w.bit_len() as u64 - bits_before,
        total_mbs,
        ..FrameStats::default()
    });
    recon_frames.push(intra_recon);

    for frame in &frames[1..] {
        let prev = recon_frames.last().expect("intra frame present");
        let (recon, frame_stats) = encode_p_frame(&frame.luma, prev, cfg, &mut w)?;
        stats.frames.push(frame_stats);
        recon_frames.push(recon);
    }

    stats.total_bits = w.bit_len() as u64;
    Ok(Encoded {
        bytes: w.into_bytes(),
        stats,
        recon: recon_frames,
    })
}

/// Decodes a serialized sequence back into frames. The result is
/// bit-identical to the encoder's own reconstruction.
pub fn decode_sequence(bytes: &[u8]) -> Result<Decoded, CodecError> {
    let mut r = BitReader::new(bytes);
    let header = SequenceHeader::read(&mut r)?;
    let width = usize::from(header.width);
    let height = usize::from(header.height);

    let mut planes: Vec<Plane> = Vec::with_capacity(usize::from(header.frame_count));
    if header.frame_count > 0 {
        planes.push(decode_intra_plane(width, height, header.qp, &mut r)?);
        for _ in 1..header.frame_count {
            let prev = planes.last().expect("intra frame present");
            let next = decode_p_frame(prev, &header, &mut r)?;
            planes.push(next);
        }
    }

    let frames = planes
        .into_iter()
        .enumerate()
        .map(|(i, luma)| Frame::mono(luma, i))
        .collect();
    Ok(Decoded { header, frames })
}
