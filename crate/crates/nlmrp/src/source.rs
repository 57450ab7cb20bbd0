//! Sequence ingestion: YUV4MPEG2 and raw planar 4:2:0 readers, the y4m
//! writer, synthetic resolution, and padding to macroblock-aligned
//! dimensions.
//!
//! Frames are padded by edge replication at ingestion; the original
//! dimensions travel alongside so quality measurement can crop back to the
//! real picture.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frame::{chroma_dim, Frame, Plane, MB_SIZE};
use crate::synth::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a sequence comes from.
#[derive(Debug, Clone)]
pub enum SequenceSource {
    Y4m {
        path: PathBuf,
    },
    RawYuv420 {
        path: PathBuf,
        width: usize,
        height: usize,
        fps: u8,
    },
    Synthetic {
        spec: SyntheticSpec,
        fps: u8,
    },
}

/// Frames padded to macroblock-aligned dimensions, plus the original
/// geometry for cropping.
#[derive(Debug, Clone)]
pub struct LoadedSequence {
    pub frames: Vec<Frame>,
    pub source_width: usize,
    pub source_height: usize,
    pub fps: u8,
}

impl LoadedSequence {
    pub fn crop(&self) -> (usize, usize) {
        (self.source_width, self.source_height)
    }
}

pub fn load_sequence(source: &SequenceSource) -> Result<LoadedSequence, LoadError> {
    match source {
        SequenceSource::Y4m { path } => {
            let file = File::open(path)?;
            let video = read_y4m(BufReader::new(file))?;
            Ok(pad_sequence(
                video.frames,
                video.width,
                video.height,
                video.fps,
            ))
        }
        SequenceSource::RawYuv420 {
            path,
            width,
            height,
            fps,
        } => {
            let mut bytes = Vec::new();
            File::open(path)?.read_to_end(&mut bytes)?;
            let frames = read_raw_yuv420(&bytes, *width, *height)?;
            Ok(pad_sequence(frames, *width, *height, *fps))
        }
        SequenceSource::Synthetic { spec, fps } => {
            let frames = generate_synthetic(spec);
            Ok(pad_sequence(frames, spec.width, spec.height, *fps))
        }
    }
}

fn pad_sequence(frames: Vec<Frame>, width: usize, height: usize, fps: u8) -> LoadedSequence {
    let frames = frames.into_iter().map(|f| pad_to_mb(&f)).collect();
    LoadedSequence {
        frames,
        source_width: width,
        source_height: height,
        fps,
    }
}

fn pad_plane(plane: &Plane, width: usize, height: usize) -> Plane {
    if plane.width() == width && plane.height() == height {
        return plane.clone();
    }
    Plane::from_fn(width, height, |x, y| {
        plane.get(x.min(plane.width() - 1), y.min(plane.height() - 1))
    })
}

/// Pads a frame to the next multiple of 16 in both dimensions by edge
/// replication. Chroma, when present, is padded to half the padded luma
/// dimensions.
pub fn pad_to_mb(frame: &Frame) -> Frame {
    let width = frame.width().next_multiple_of(MB_SIZE);
    let height = frame.height().next_multiple_of(MB_SIZE);
    let luma = pad_plane(&frame.luma, width, height);
    let chroma = frame.chroma.as_ref().map(|[cb, cr]| {
        let cw = chroma_dim(width);
        let ch = chroma_dim(height);
        [pad_plane(cb, cw, ch), pad_plane(cr, cw, ch)]
    });
    Frame {
        luma,
        chroma,
        index: frame.index,
    }
}

#[derive(Debug)]
pub struct Y4mVideo {
    pub frames: Vec<Frame>,
    pub width: usize,
    pub height: usize,
    pub fps: u8,
}

fn read_line<R: BufRead>(r: &mut R) -> Result<Option<String>, LoadError> {
    let mut buf = Vec::new();
    let n = r.read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
    }
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| LoadError::Parse("header is not valid ascii".into()))
}

fn read_exact_plane<R: BufRead>(
    r: &mut R,
    width: usize,
    height: usize,
) -> Result<Plane, LoadError> {
    let mut data = vec![0u8; width * height];
    r.read_exact(&mut data)
        .map_err(|_| LoadError::Parse("truncated frame payload".into()))?;
    Ok(Plane::from_data(width, height, data).expect("sized above"))
}

/// Parses a YUV4MPEG2 stream. Only `C420`-family and `Cmono` colorspaces
/// are accepted; a missing colorspace tag means 4:2:0 by convention.
pub fn read_y4m<R: BufRead>(mut r: R) -> Result<Y4mVideo, LoadError> {
    let header = read_line(&mut r)?.ok_or_else(|| LoadError::Parse("empty stream".into()))?;
    let mut tokens = header.split(' ');
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(LoadError::Parse("missing YUV4MPEG2 magic".into()));
    }

    let mut width = None;
    let mut height = None;
    let mut fps_num: u64 = 30;
    let mut fps_den: u64 = 1;
    let mut mono = false;
    for token in tokens {
        let (tag, value) = token.split_at(1);
        match tag {
            "W" => {
                width = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| LoadError::Parse(format!("bad width {value:?}")))?,
                )
            }
            "H" => {
                height = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| LoadError::Parse(format!("bad height {value:?}")))?,
                )
            }
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| LoadError::Parse(format!("bad frame rate {value:?}")))?;
                fps_num = n
                    .parse()
                    .map_err(|_| LoadError::Parse(format!("bad frame rate {value:?}")))?;
                fps_den = d
                    .parse()
                    .map_err(|_| LoadError::Parse(format!("bad frame rate {value:?}")))?;
                if fps_num == 0 || fps_den == 0 {
                    return Err(LoadError::Parse(format!("bad frame rate {value:?}")));
                }
            }
            "C" => match value {
                v if v.starts_with("420") => mono = false,
                "mono" => mono = true,
                other => {
                    return Err(LoadError::Parse(format!(
                        "unsupported colorspace C{other}; need C420 or Cmono"
                    )))
                }
            },
            // Interlacing, aspect and extension tags don't affect decoding.
            "I" | "A" | "X" => {}
            _ => return Err(LoadError::Parse(format!("unknown header token {token:?}"))),
        }
    }
    let width = width.ok_or_else(|| LoadError::Parse("missing W tag".into()))?;
    let height = height.ok_or_else(|| LoadError::Parse("missing H tag".into()))?;
    if width == 0 || height == 0 {
        return Err(LoadError::Geometry("zero dimension".into()));
    }
    let fps = ((fps_num as f64 / fps_den as f64).round() as u64).clamp(1, 255) as u8;

    let mut frames = Vec::new();
    while let Some(marker) = read_line(&mut r)? {
        if marker != "FRAME" && !marker.starts_with("FRAME ") {
            return Err(LoadError::Parse(format!("expected FRAME, got {marker:?}")));
        }
        let index = frames.len();
        let luma = read_exact_plane(&mut r, width, height)?;
        if mono {
            frames.push(Frame::mono(luma, index));
        } else {
            let cw = chroma_dim(width);
            let ch = chroma_dim(height);
            let cb = read_exact_plane(&mut r, cw, ch)?;
            let cr = read_exact_plane(&mut r, cw, ch)?;
            frames.push(
                Frame::with_chroma(luma, cb, cr, index).expect("reader sizes chroma correctly"),
            );
        }
    }
    Ok(Y4mVideo {
        frames,
        width,
        height,
        fps,
    })
}

/// Writes frames as YUV4MPEG2. All frames must consistently be mono or
/// 4:2:0; the colorspace tag follows the first frame.
pub fn write_y4m<W: Write>(mut w: W, frames: &[Frame], fps: u8) -> Result<(), LoadError> {
    let first = frames
        .first()
        .ok_or_else(|| LoadError::Geometry("no frames to write".into()))?;
    let colorspace = if first.chroma.is_some() {
        "C420"
    } else {
        "Cmono"
    };
    writeln!(
        w,
        "YUV4MPEG2 W{} H{} F{}:1 Ip A1:1 {colorspace}",
        first.width(),
        first.height(),
        fps
    )?;
    for frame in frames {
        if frame.width() != first.width()
            || frame.height() != first.height()
            || frame.chroma.is_some() != first.chroma.is_some()
        {
            return Err(LoadError::Geometry(
                "frames disagree on geometry or colorspace".into(),
            ));
        }
        writeln!(w, "FRAME")?;
        w.write_all(frame.luma.data())?;
        if let Some([cb, cr]) = &frame.chroma {
            w.write_all(cb.data())?;
            w.write_all(cr.data())?;
        }
    }
    Ok(())
}

/// Splits a raw planar 4:2:0 byte stream into frames. The byte length must
/// be an exact multiple of the frame size implied by the geometry.
pub fn read_raw_yuv420(bytes: &[u8], width: usize, height: usize) -> Result<Vec<Frame>, LoadError> {
    if width == 0 || height == 0 {
        return Err(LoadError::Geometry("zero dimension".into()));
    }
    let cw = chroma_dim(width);
    let ch = chroma_dim(height);
    let frame_size = width * height + 2 * cw * ch;
    if bytes.is_empty() || !bytes.len().is_multiple_of(frame_size) {
        return Err(LoadError::Geometry(format!(
            "{} bytes is not a multiple of the {frame_size}-byte frame size for {width}x{height} 4:2:0",
            bytes.len()
        )));
    }
    let mut frames = Vec::with_capacity(bytes.len() / frame_size);
    for (index, chunk) in bytes.chunks_exact(frame_size).enumerate() {
        let (y, uv) = chunk.split_at(width * height);
        let (u, v) = uv.split_at(cw * ch);
        let luma = Plane::from_data(width, height, y.to_vec()).expect("sized");
        let cb = Plane::from_data(cw, ch, u.to_vec()).expect("sized");
        let cr = Plane::from_data(cw, ch, v.to_vec()).expect("sized");
        frames.push(Frame::with_chroma(luma, cb, cr, index).expect("4:2:0 geometry"));
    }
    Ok(frames)
}

/// Convenience wrapper for writing a y4m file.
pub fn write_y4m_file(path: &Path, frames: &[Frame], fps: u8) -> Result<(), LoadError> {
    let file = File::create(path)?;
    write_y4m(std::io::BufWriter::new(file), frames, fps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y4m_bytes(header: &str, frames: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(header.as_bytes());
        out.push(b'\n');
        for f in frames {
            out.extend_from_slice(b"FRAME\n");
            out.extend_from_slice(f);
        }
        out
    }

    #[test]
    fn reads_a_minimal_mono_stream() {
        let bytes = y4m_bytes(
            "YUV4MPEG2 W64 H64 F30:1 Cmono",
            &[vec![1u8; 64 * 64], vec![2u8; 64 * 64], vec![3u8; 64 * 64]],
        );
        let video = read_y4m(&bytes[..]).unwrap();
        assert_eq!(video.frames.len(), 3);
        assert_eq!((video.width, video.height, video.fps), (64, 64, 30));
        assert_eq!(video.frames[1].luma.get(10, 10), 2);
        assert!(video.frames[0].chroma.is_none());
    }

    #[test]
    fn default_colorspace_is_420() {
        let frame_len = 16 * 16 + 2 * 8 * 8;
        let bytes = y4m_bytes("YUV4MPEG2 W16 H16 F25:1", &[vec![7u8; frame_len]]);
        let video = read_y4m(&bytes[..]).unwrap();
        assert_eq!(video.fps, 25);
        assert!(video.frames[0].chroma.is_some());
    }

    #[test]
    fn rejects_bad_magic_and_colorspace() {
        assert!(matches!(
            read_y4m(&b"YUV4MPEG3 W2 H2\n"[..]),
            Err(LoadError::Parse(_))
        ));
        assert!(matches!(
            read_y4m(&b"YUV4MPEG2 W2 H2 C444\n"[..]),
            Err(LoadError::Parse(_))
        ));
    }

    #[test]
    fn rejects_truncated_frame() {
        let bytes = y4m_bytes("YUV4MPEG2 W8 H8 Cmono", &[vec![0u8; 63]]);
        assert!(matches!(read_y4m(&bytes[..]), Err(LoadError::Parse(_))));
    }

    #[test]
    fn raw_reader_divides_by_frame_size() {
        let frame_size = 64 * 64 * 3 / 2;
        let frames = read_raw_yuv420(&vec![9u8; frame_size * 2], 64, 64).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(matches!(
            read_raw_yuv420(&vec![9u8; frame_size * 2 - 1], 64, 64),
            Err(LoadError::Geometry(_))
        ));
    }

    #[test]
    fn padding_replicates_edges() {
        let frame = Frame::mono(
            Plane::from_fn(50, 50, |x, y| ((x * 3 + y * 7) % 256) as u8),
            0,
        );
        let padded = pad_to_mb(&frame);
        assert_eq!((padded.width(), padded.height()), (64, 64));
        for y in 0..64 {
            for x in 0..64 {
                let expect = frame.luma.get(x.min(49), y.min(49));
                assert_eq!(padded.luma.get(x, y), expect, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn y4m_round_trip_preserves_luma() {
        let frames: Vec<Frame> = (0..3)
            .map(|i| {
                Frame::mono(
                    Plane::from_fn(32, 16, |x, y| ((x + y * 2 + i * 31) % 256) as u8),
                    i,
                )
            })
            .collect();
        let mut bytes = Vec::new();
        write_y4m(&mut bytes, &frames, 30).unwrap();
        let video = read_y4m(&bytes[..]).unwrap();
        assert_eq!(video.frames.len(), 3);
        for (a, b) in frames.iter().zip(&video.frames) {
            assert_eq!(a.luma, b.luma);
        }
    }

    #[test]
    fn load_sequence_pads_synthetic_sources() {
        let spec = SyntheticSpec {
            kind: crate::synth::SyntheticKind::TranslatingTexture { dx: 1, dy: 0 },
            seed: 3,
            width: 50,
            height: 34,
            frames: 2,
        };
        let loaded = load_sequence(&SequenceSource::Synthetic { spec, fps: 30 }).unwrap();
        assert_eq!(loaded.crop(), (50, 34));
        assert_eq!(loaded.frames[0].width(), 64);
        assert_eq!(loaded.frames[0].height(), 48);
    }
}
