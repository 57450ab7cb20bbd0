//! Sample planes, frames and macroblock geometry.
//!
//! Everything in the codec operates on 8-bit planes addressed as `(x, y)`
//! with `x` growing to the right and `y` growing downwards. Macroblocks are
//! fixed 16x16 luma tiles; frames handed to the encoder must have dimensions
//! that are multiples of [`MB_SIZE`] (ingestion pads, see [`crate::source`]).

use thiserror::Error;

/// Macroblock edge length in luma samples.
pub const MB_SIZE: usize = 16;
/// Samples per macroblock.
pub const MB_PIXELS: usize = MB_SIZE * MB_SIZE;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("plane data holds {got} samples, expected {width}x{height}={}", width * height)]
    BadPlaneSize {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("chroma plane is {got_w}x{got_h}, expected {want_w}x{want_h} for 4:2:0")]
    ChromaGeometry {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("frame dimensions {width}x{height} are not multiples of {MB_SIZE}")]
    NotMacroblockAligned { width: usize, height: usize },
    #[error("macroblock ({mb_x},{mb_y}) lies outside a {width}x{height} frame")]
    MbOutOfFrame {
        mb_x: usize,
        mb_y: usize,
        width: usize,
        height: usize,
    },
}

/// A single 8-bit sample grid stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Plane {
    /// Plane filled with a constant value.
    pub fn filled(width: usize, height: usize, value: u8) -> Plane {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Result<Plane, FrameError> {
        if data.len() != width * height {
            return Err(FrameError::BadPlaneSize {
                width,
                height,
                got: data.len(),
            });
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    /// Builds a plane by evaluating `f(x, y)` at every sample position.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Plane {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Sample access with replicated borders; out-of-frame coordinates are
    /// clamped to the nearest edge sample.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx]
    }
}

/// Expected chroma dimension for 4:2:0 subsampling (half, rounded up).
pub fn chroma_dim(luma_dim: usize) -> usize {
    luma_dim.div_ceil(2)
}

/// One video frame: a luma plane plus optional 4:2:0 chroma planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub luma: Plane,
    /// `[Cb, Cr]` when present; each exactly half the luma dimensions
    /// (rounded up).
    pub chroma: Option<[Plane; 2]>,
    /// Temporal index within the sequence.
    pub index: usize,
}

impl Frame {
    pub fn mono(luma: Plane, index: usize) -> Frame {
        Frame {
            luma,
            chroma: None,
            index,
        }
    }

    pub fn with_chroma(
        luma: Plane,
        cb: Plane,
        cr: Plane,
        index: usize,
    ) -> Result<Frame, FrameError> {
        let want_w = chroma_dim(luma.width());
        let want_h = chroma_dim(luma.height());
        for plane in [&cb, &cr] {
            if plane.width() != want_w || plane.height() != want_h {
                return Err(FrameError::ChromaGeometry {
                    got_w: plane.width(),
                    got_h: plane.height(),
                    want_w,
                    want_h,
                });
            }
        }
        Ok(Frame {
            luma,
            chroma: Some([cb, cr]),
            index,
        })
    }

    pub fn width(&self) -> usize {
        self.luma.width()
    }

    pub fn height(&self) -> usize {
        self.luma.height()
    }
}

/// Macroblock coordinates within a frame's 16x16 grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbPosition {
    pub mb_x: usize,
    pub mb_y: usize,
}

impl MbPosition {
    pub fn new(mb_x: usize, mb_y: usize) -> MbPosition {
        MbPosition { mb_x, mb_y }
    }

    /// Left edge of the macroblock in samples.
    #[inline]
    pub fn x0(&self) -> usize {
        self.mb_x * MB_SIZE
    }

    /// Top edge of the macroblock in samples.
    #[inline]
    pub fn y0(&self) -> usize {
        self.mb_y * MB_SIZE
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<(), FrameError> {
        if self.x0() + MB_SIZE > width || self.y0() + MB_SIZE > height {
            return Err(FrameError::MbOutOfFrame {
                mb_x: self.mb_x,
                mb_y: self.mb_y,
                width,
                height,
            });
        }
        Ok(())
    }

    /// True when the left, above and above-left neighbor macroblocks exist.
    #[inline]
    pub fn has_causal_neighbors(&self) -> bool {
        self.mb_x >= 1 && self.mb_y >= 1
    }
}

/// A 16x16 block of samples, the unit of prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block16 {
    data: [u8; MB_PIXELS],
}

impl Block16 {
    pub fn filled(value: u8) -> Block16 {
        Block16 {
            data: [value; MB_PIXELS],
        }
    }

    pub fn from_array(data: [u8; MB_PIXELS]) -> Block16 {
        Block16 { data }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> u8) -> Block16 {
        let mut data = [0u8; MB_PIXELS];
        for row in 0..MB_SIZE {
            for col in 0..MB_SIZE {
                data[row * MB_SIZE + col] = f(row, col);
            }
        }
        Block16 { data }
    }

    /// Copies the macroblock at `pos` out of a plane.
    pub fn from_plane(plane: &Plane, pos: MbPosition) -> Block16 {
        let mut data = [0u8; MB_PIXELS];
        for row in 0..MB_SIZE {
            let src = &plane.row(pos.y0() + row)[pos.x0()..pos.x0() + MB_SIZE];
            data[row * MB_SIZE..(row + 1) * MB_SIZE].copy_from_slice(src);
        }
        Block16 { data }
    }

    /// Writes this block into the plane at `pos`.
    pub fn write_to(&self, plane: &mut Plane, pos: MbPosition) {
        for row in 0..MB_SIZE {
            for col in 0..MB_SIZE {
                plane.set(pos.x0() + col, pos.y0() + row, self.get(row, col));
            }
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * MB_SIZE + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * MB_SIZE + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * MB_SIZE..(row + 1) * MB_SIZE]
    }

    #[inline]
    pub fn as_array(&self) -> &[u8; MB_PIXELS] {
        &self.data
    }
}

/// Sum of squared differences between two blocks.
pub fn block_ssd(a: &Block16, b: &Block16) -> u64 {
    a.as_array()
        .iter()
        .zip(b.as_array())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum()
}
