//! Deterministic synthetic test sequences.
//!
//! Three generators cover the prediction regimes the codec cares about:
//!
//! - [`SyntheticKind::TranslatingTexture`]: a raw noise texture translating
//!   by a fixed integer step per frame (with wraparound). Motion
//!   compensation is an exact predictor here and the noise has no
//!   self-similarity, so refinement has nothing to add - the null case.
//! - [`SyntheticKind::Occlusion`]: a rigid foreground square travels over a
//!   periodic background. Compensation fails along the occlusion edges and
//!   carries reference quantization noise elsewhere; the periodic texture
//!   gives the refinement plenty of matching patches to average.
//! - [`SyntheticKind::IlluminationRamp`]: a static textured scene whose
//!   luma is multiplied by a per-frame gain (with clamping). A displaced
//!   block can never express the gain change, while the already-decoded
//!   neighbors carry it - the case refinement is best at.
//!
//! Every generator is a pure function of its spec: the same seed always
//! produces bit-identical frames.

use std::str::FromStr;

use crate::frame::{Frame, Plane};

/// SplitMix64; deterministic and platform independent.
#[derive(Debug, Clone)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Prng {
        Prng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn next_byte(&mut self) -> u8 {
        (self.next_u64() >> 56) as u8
    }

    /// Uniform value in `[0, n)`.
    pub fn next_range(&mut self, n: u32) -> u32 {
        (self.next_u64() % u64::from(n)) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// Noise texture translating by `(dx, dy)` samples per frame.
    TranslatingTexture { dx: i32, dy: i32 },
    /// Foreground square moving by `(dx, dy)` per frame over a static
    /// periodic background.
    Occlusion { dx: i32, dy: i32 },
    /// Static scene scaled by `1 + gain_step * t` at frame `t`.
    IlluminationRamp { gain_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

impl FromStr for SyntheticKind {
    type Err = String;

    /// Parses `name[:key=value,...]`, e.g. `translating_texture:dx=1,dy=0`,
    /// `occlusion:dx=2,dy=1` or `illumination_ramp:gain=0.02`.
    fn from_str(s: &str) -> Result<SyntheticKind, String> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, a),
            None => (s, ""),
        };
        let mut dx: Option<i32> = None;
        let mut dy: Option<i32> = None;
        let mut gain: Option<f64> = None;
        for pair in args.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {pair:?}"))?;
            match key {
                "dx" => dx = Some(value.parse().map_err(|_| format!("bad dx {value:?}"))?),
                "dy" => dy = Some(value.parse().map_err(|_| format!("bad dy {value:?}"))?),
                "gain" => gain = Some(value.parse().map_err(|_| format!("bad gain {value:?}"))?),
                other => return Err(format!("unknown parameter {other:?}")),
            }
        }
        match name {
            "translating_texture" => Ok(SyntheticKind::TranslatingTexture {
                dx: dx.unwrap_or(1),
                dy: dy.unwrap_or(0),
            }),
            "occlusion" => Ok(SyntheticKind::Occlusion {
                dx: dx.unwrap_or(2),
                dy: dy.unwrap_or(1),
            }),
            "illumination_ramp" => Ok(SyntheticKind::IlluminationRamp {
                gain_step: gain.unwrap_or(0.02),
            }),
            other => Err(format!(
                "unknown generator {other:?}; expected translating_texture, occlusion or illumination_ramp"
            )),
        }
    }
}

/// Foreground square edge length of the occlusion generator.
pub const OCCLUSION_FG_SIZE: usize = 20;

/// Closed-form foreground origin at frame `t` for an occlusion spec:
/// the square starts at `(width/4, height/3)` and advances `(dx, dy)` per
/// frame, wrapping modularly.
pub fn occlusion_origin(spec: &SyntheticSpec, t: usize) -> (usize, usize) {
    let SyntheticKind::Occlusion { dx, dy } = spec.kind else {
        panic!("not an occlusion spec");
    };
    let x = (spec.width as i64 / 4 + i64::from(dx) * t as i64).rem_euclid(spec.width as i64);
    let y = (spec.height as i64 / 3 + i64::from(dy) * t as i64).rem_euclid(spec.height as i64);
    (x as usize, y as usize)
}

/// Periodic plaid, strongly self-similar at the given period in both axes,
/// which is what gives non-local averaging its matching patches. `dither`
/// adds a static per-sample jitter of up to that many levels on top.
fn plaid_texture(
    width: usize,
    height: usize,
    prng: &mut Prng,
    period: usize,
    amplitude: (i32, i32),
    dither: i32,
) -> Plane {
    let (col_amp, row_amp) = amplitude;
    let col_lut: Vec<i32> = (0..period)
        .map(|_| prng.next_range(2 * col_amp as u32 + 1) as i32 - col_amp)
        .collect();
    let row_lut: Vec<i32> = (0..period)
        .map(|_| prng.next_range(2 * row_amp as u32 + 1) as i32 - row_amp)
        .collect();
    Plane::from_fn(width, height, |x, y| {
        let jitter = if dither > 0 {
            prng.next_range(2 * dither as u32 + 1) as i32 - dither
        } else {
            0
        };
        (90 + col_lut[x % period] + row_lut[y % period] + jitter).clamp(0, 255) as u8
    })
}

fn translating_frames(spec: &SyntheticSpec, dx: i32, dy: i32) -> Vec<Frame> {
    let mut prng = Prng::new(spec.seed);
    let texture = Plane::from_fn(spec.width, spec.height, |_, _| prng.next_byte());
    (0..spec.frames)
        .map(|t| {
            let shift_x = i64::from(dx) * t as i64;
            let shift_y = i64::from(dy) * t as i64;
            let luma = Plane::from_fn(spec.width, spec.height, |x, y| {
                let sx = (x as i64 - shift_x).rem_euclid(spec.width as i64) as usize;
                let sy = (y as i64 - shift_y).rem_euclid(spec.height as i64) as usize;
                texture.get(sx, sy)
            });
            Frame::mono(luma, t)
        })
        .collect()
}

fn occlusion_frames(spec: &SyntheticSpec) -> Vec<Frame> {
    let mut prng = Prng::new(spec.seed);
    let background = plaid_texture(spec.width, spec.height, &mut prng, 8, (14, 10), 2);
    // Rigid foreground: a brighter patch with its own dither, drawn from a
    // separate stream so background and foreground stay independent.
    let mut fg_prng = Prng::new(spec.seed ^ 0x0cc1_0cc1_0cc1_0cc1);
    let foreground = Plane::from_fn(OCCLUSION_FG_SIZE, OCCLUSION_FG_SIZE, |_, _| {
        (132 + fg_prng.next_range(5) as i32 - 2) as u8
    });

    (0..spec.frames)
        .map(|t| {
            let (ox, oy) = occlusion_origin(spec, t);
            let luma = Plane::from_fn(spec.width, spec.height, |x, y| {
                let rel_x = (x + spec.width - ox) % spec.width;
                let rel_y = (y + spec.height - oy) % spec.height;
                if rel_x < OCCLUSION_FG_SIZE && rel_y < OCCLUSION_FG_SIZE {
                    foreground.get(rel_x, rel_y)
                } else {
                    background.get(x, y)
                }
            });
            Frame::mono(luma, t)
        })
        .collect()
}

fn ramp_frames(spec: &SyntheticSpec, gain_step: f64) -> Vec<Frame> {
    // No dither here: a changing gain is what the compensated block cannot
    // express, and a clean periodic scene keeps that the only error source.
    let mut prng = Prng::new(spec.seed);
    let texture = plaid_texture(spec.width, spec.height, &mut prng, 16, (25, 18), 0);
    (0..spec.frames)
        .map(|t| {
            let gain = 1.0 + gain_step * t as f64;
            let luma = Plane::from_fn(spec.width, spec.height, |x, y| {
                (f64::from(texture.get(x, y)) * gain)
                    .round()
                    .clamp(0.0, 255.0) as u8
            });
            Frame::mono(luma, t)
        })
        .collect()
}

/// Renders the spec into frames. Deterministic: the same spec always
/// yields bit-identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Vec<Frame> {
    match spec.kind {
        SyntheticKind::TranslatingTexture { dx, dy } => translating_frames(spec, dx, dy),
        SyntheticKind::Occlusion { .. } => occlusion_frames(spec),
        SyntheticKind::IlluminationRamp { gain_step } => ramp_frames(spec, gain_step),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: SyntheticKind) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            seed: 7,
            width: 64,
            height: 48,
            frames: 6,
        }
    }

    #[test]
    fn translation_shifts_columns() {
        let s = spec(SyntheticKind::TranslatingTexture { dx: 1, dy: 0 });
        let frames = generate_synthetic(&s);
        for y in 0..s.height {
            for x in 0..s.width {
                let src_x = (x + s.width - 1) % s.width;
                assert_eq!(frames[1].luma.get(x, y), frames[0].luma.get(src_x, y));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [
            SyntheticKind::TranslatingTexture { dx: 1, dy: 0 },
            SyntheticKind::Occlusion { dx: 2, dy: 1 },
            SyntheticKind::IlluminationRamp { gain_step: 0.02 },
        ] {
            let a = generate_synthetic(&spec(kind));
            let b = generate_synthetic(&spec(kind));
            assert_eq!(a, b);
            let other = generate_synthetic(&SyntheticSpec {
                seed: 8,
                ..spec(kind)
            });
            assert_ne!(a, other);
        }
    }

    #[test]
    fn occlusion_tracks_the_closed_form_trajectory() {
        let s = SyntheticSpec {
            kind: SyntheticKind::Occlusion { dx: 3, dy: 2 },
            seed: 11,
            width: 96,
            height: 96,
            frames: 9,
        };
        let frames = generate_synthetic(&s);
        // Pick two frames whose boxes are disjoint.
        let (t1, t2) = (0usize, 8usize);
        let (x1, y1) = occlusion_origin(&s, t1);
        let (x2, y2) = occlusion_origin(&s, t2);
        let inside = |ox: usize, oy: usize, x: usize, y: usize| {
            let rx = (x + s.width - ox) % s.width;
            let ry = (y + s.height - oy) % s.height;
            rx < OCCLUSION_FG_SIZE && ry < OCCLUSION_FG_SIZE
        };
        assert!(!inside(x1, y1, x2, y2) && !inside(x2, y2, x1, y1));

        let mut differing_outside_boxes = 0;
        let mut differing_in_box1 = 0;
        for y in 0..s.height {
            for x in 0..s.width {
                let differs = frames[t1].luma.get(x, y) != frames[t2].luma.get(x, y);
                let in1 = inside(x1, y1, x, y);
                let in2 = inside(x2, y2, x, y);
                if !in1 && !in2 && differs {
                    differing_outside_boxes += 1;
                }
                if in1 && differs {
                    differing_in_box1 += 1;
                }
            }
        }
        // Background is static; difference is confined to the two boxes.
        assert_eq!(differing_outside_boxes, 0);
        // And the foreground genuinely occludes most of its box.
        assert!(differing_in_box1 > (OCCLUSION_FG_SIZE * OCCLUSION_FG_SIZE * 8) / 10);

        // Rigidity: the square carries the same samples in every frame.
        for ry in 0..OCCLUSION_FG_SIZE {
            for rx in 0..OCCLUSION_FG_SIZE {
                assert_eq!(
                    frames[t1]
                        .luma
                        .get((x1 + rx) % s.width, (y1 + ry) % s.height),
                    frames[t2]
                        .luma
                        .get((x2 + rx) % s.width, (y2 + ry) % s.height),
                );
            }
        }
    }

    #[test]
    fn ramp_brightens_monotonically() {
        let s = spec(SyntheticKind::IlluminationRamp { gain_step: 0.02 });
        let frames = generate_synthetic(&s);
        let mean =
            |p: &Plane| p.data().iter().map(|&v| f64::from(v)).sum::<f64>() / p.data().len() as f64;
        let mut prev = mean(&frames[0].luma);
        for f in &frames[1..] {
            let m = mean(&f.luma);
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "translating_texture:dx=1,dy=0"
                .parse::<SyntheticKind>()
                .unwrap(),
            SyntheticKind::TranslatingTexture { dx: 1, dy: 0 }
        );
        assert_eq!(
            "occlusion".parse::<SyntheticKind>().unwrap(),
            SyntheticKind::Occlusion { dx: 2, dy: 1 }
        );
        assert_eq!(
            "illumination_ramp:gain=0.05"
                .parse::<SyntheticKind>()
                .unwrap(),
            SyntheticKind::IlluminationRamp { gain_step: 0.05 }
        );
        assert!("sparkles".parse::<SyntheticKind>().is_err());
        assert!("occlusion:warp=3".parse::<SyntheticKind>().is_err());
    }
}
