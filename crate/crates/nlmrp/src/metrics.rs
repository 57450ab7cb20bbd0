//! Quality and rate evaluation: PSNR, rate-distortion curves and the
//! Bjontegaard deltas between two curves.
//!
//! A curve is a set of (rate, PSNR) points measured at fixed quantizers.
//! The deltas fit a third-order polynomial to each curve - PSNR as a
//! function of log10(rate) for the quality delta, log10(rate) as a
//! function of PSNR for the rate delta - and average the difference of the
//! fits over the overlapping interval. A negative rate delta means the
//! test curve reaches the same quality with fewer bits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::codec::{decode_sequence, encode_sequence, CodecError, EncoderConfig};
use crate::frame::{Frame, Plane};
use crate::refine::NlmParams;
use crate::transform::Qp;

/// Identical planes report this instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("frames are {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("curve needs at least 4 points, got {got}")]
    InsufficientPoints { got: usize },
    #[error("curves do not overlap")]
    NoOverlap,
    #[error("rates must be positive and strictly increasing")]
    NonMonotoneRate,
    #[error("qp list must be strictly increasing and non-empty")]
    QpListNotIncreasing,
    #[error("csv parse error: {0}")]
    CsvParse(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

fn sse_region(a: &Plane, b: &Plane, width: usize, height: usize) -> u64 {
    let mut sse = 0u64;
    for y in 0..height {
        let ra = &a.row(y)[..width];
        let rb = &b.row(y)[..width];
        sse += ra
            .iter()
            .zip(rb)
            .map(|(&x, &y)| {
                let d = i64::from(x) - i64::from(y);
                (d * d) as u64
            })
            .sum::<u64>();
    }
    sse
}

/// Luma PSNR in dB over the top-left `width x height` region, capped at
/// [`PSNR_CAP_DB`] for identical content.
pub fn psnr_cropped(
    a: &Plane,
    b: &Plane,
    width: usize,
    height: usize,
) -> Result<f64, MetricsError> {
    if a.width() != b.width()
        || a.height() != b.height()
        || width > a.width()
        || height > a.height()
        || width == 0
        || height == 0
    {
        return Err(MetricsError::DimensionMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    let sse = sse_region(a, b, width, height);
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / (width * height) as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Luma PSNR between two frames.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64, MetricsError> {
    psnr_cropped(&a.luma, &b.luma, a.width(), a.height())
}

/// One rate-distortion measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub rate_kbps: f64,
    pub psnr_db: f64,
}

/// Measurements ordered by strictly increasing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(points: Vec<RdPoint>) -> Result<RdCurve, MetricsError> {
        if points.is_empty() {
            return Err(MetricsError::NonMonotoneRate);
        }
        for (i, p) in points.iter().enumerate() {
            let positive = p.rate_kbps.is_finite() && p.rate_kbps > 0.0;
            if !positive || (i > 0 && p.rate_kbps <= points[i - 1].rate_kbps) {
                return Err(MetricsError::NonMonotoneRate);
            }
        }
        Ok(RdCurve { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    /// True if PSNR never decreases with rate. A violation is suspicious
    /// but not an error; callers may warn.
    pub fn quality_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].psnr_db >= w[0].psnr_db)
    }
}

/// Cubic polynomial in a shifted variable, `p(x) = sum c_i (x - x0)^i`.
struct Cubic {
    c: [f64; 4],
    x0: f64,
}

impl Cubic {
    /// Least-squares fit (exact interpolation for four points). The
    /// abscissa is centered before solving to keep the normal equations
    /// well conditioned.
    #[allow(clippy::needless_range_loop)]
    fn fit(xs: &[f64], ys: &[f64]) -> Cubic {
        let n = xs.len();
        debug_assert!(n >= 4 && n == ys.len());
        let x0 = xs.iter().sum::<f64>() / n as f64;

        // Normal equations a[i][j] = sum x^(i+j), b[i] = sum x^i y.
        let mut pow_sums = [0f64; 7];
        let mut b = [0f64; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let t = x - x0;
            let mut p = 1.0;
            for (k, slot) in pow_sums.iter_mut().enumerate() {
                *slot += p;
                if k < 4 {
                    b[k] += p * y;
                }
                p *= t;
            }
        }
        let mut a = [[0f64; 5]; 4];
        for i in 0..4 {
            a[i][..4].copy_from_slice(&pow_sums[i..i + 4]);
            a[i][4] = b[i];
        }

        // Gaussian elimination with partial pivoting.
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .expect("non-empty range");
            a.swap(col, pivot);
            for row in col + 1..4 {
                let factor = a[row][col] / a[col][col];
                for k in col..5 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
        let mut c = [0f64; 4];
        for row in (0..4).rev() {
            let mut acc = a[row][4];
            for k in row + 1..4 {
                acc -= a[row][k] * c[k];
            }
            c[row] = acc / a[row][row];
        }
        Cubic { c, x0 }
    }

    /// Definite integral over `[lo, hi]` via the closed-form
    /// antiderivative.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = |x: f64| {
            let t = x - self.x0;
            t * (self.c[0] + t * (self.c[1] / 2.0 + t * (self.c[2] / 3.0 + t * self.c[3] / 4.0)))
        };
        anti(hi) - anti(lo)
    }
}

fn check_points(curve: &RdCurve) -> Result<(), MetricsError> {
    if curve.points().len() < 4 {
        return Err(MetricsError::InsufficientPoints {
            got: curve.points().len(),
        });
    }
    Ok(())
}

fn overlap(a: &[f64], b: &[f64]) -> Result<(f64, f64), MetricsError> {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Inputs are logs of validated positive rates or finite PSNRs.
    let lo = min(a).max(min(b));
    let hi = max(a).min(max(b));
    if hi <= lo {
        return Err(MetricsError::NoOverlap);
    }
    Ok((lo, hi))
}

/// Average PSNR difference (test minus anchor) in dB over the overlapping
/// rate interval. Positive means the test curve has higher quality.
pub fn bd_psnr(anchor: &RdCurve, test: &RdCurve) -> Result<f64, MetricsError> {
    check_points(anchor)?;
    check_points(test)?;
    let log_rate = |c: &RdCurve| {
        c.points()
            .iter()
            .map(|p| p.rate_kbps.log10())
            .collect::<Vec<_>>()
    };
    let quality = |c: &RdCurve| c.points().iter().map(|p| p.psnr_db).collect::<Vec<_>>();

    let (xa, ya) = (log_rate(anchor), quality(anchor));
    let (xt, yt) = (log_rate(test), quality(test));
    let (lo, hi) = overlap(&xa, &xt)?;
    let fa = Cubic::fit(&xa, &ya);
    let ft = Cubic::fit(&xt, &yt);
    Ok((ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo))
}

/// Average rate difference (test relative to anchor) in percent over the
/// overlapping quality interval. Negative means the test curve saves rate.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64, MetricsError> {
    check_points(anchor)?;
    check_points(test)?;
    let log_rate = |c: &RdCurve| {
        c.points()
            .iter()
            .map(|p| p.rate_kbps.log10())
            .collect::<Vec<_>>()
    };
    let quality = |c: &RdCurve| c.points().iter().map(|p| p.psnr_db).collect::<Vec<_>>();

    let (xa, ya) = (quality(anchor), log_rate(anchor));
    let (xt, yt) = (quality(test), log_rate(test));
    let (lo, hi) = overlap(&xa, &xt)?;
    let fa = Cubic::fit(&xa, &ya);
    let ft = Cubic::fit(&xt, &yt);
    let avg_log_diff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg_log_diff) - 1.0) * 100.0)
}

/// One row of the sweep output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdRow {
    pub qp: u8,
    pub rate_kbps: f64,
    pub psnr_db: f64,
    /// Macroblocks that chose refinement, summed over P-frames.
    pub mode_flags_set: u64,
    /// Macroblocks coded, summed over P-frames.
    pub total_mbs: u64,
}

pub const CSV_HEADER: &str = "qp,rate_kbps,psnr_db,mode_flags_set,total_mbs";

pub fn rd_rows_to_csv(rows: &[RdRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{},{}",
            r.qp, r.rate_kbps, r.psnr_db, r.mode_flags_set, r.total_mbs
        );
    }
    out
}

pub fn rd_rows_from_csv(text: &str) -> Result<Vec<RdRow>, MetricsError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(MetricsError::CsvParse(format!(
                "expected header {CSV_HEADER:?}, got {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(MetricsError::CsvParse(format!(
                "row {}: expected 5 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| MetricsError::CsvParse(format!("row {}: bad {what}", i + 2));
        rows.push(RdRow {
            qp: fields[0].trim().parse().map_err(|_| parse_err("qp"))?,
            rate_kbps: fields[1].trim().parse().map_err(|_| parse_err("rate"))?,
            psnr_db: fields[2].trim().parse().map_err(|_| parse_err("psnr"))?,
            mode_flags_set: fields[3].trim().parse().map_err(|_| parse_err("flags"))?,
            total_mbs: fields[4].trim().parse().map_err(|_| parse_err("mbs"))?,
        });
    }
    Ok(rows)
}

/// Builds an [`RdCurve`] from sweep rows, ordering points by rate.
pub fn curve_from_rows(rows: &[RdRow]) -> Result<RdCurve, MetricsError> {
    let mut points: Vec<RdPoint> = rows
        .iter()
        .map(|r| RdPoint {
            rate_kbps: r.rate_kbps,
            psnr_db: r.psnr_db,
        })
        .collect();
    points.sort_by(|a, b| a.rate_kbps.total_cmp(&b.rate_kbps));
    RdCurve::new(points)
}

/// Encodes the sequence once per quantizer and measures (rate, PSNR) per
/// point. PSNR is the arithmetic mean over decoded P-frames (the intra
/// frame is excluded), cropped to `crop` when the source was padded; rate
/// is `total_bits * fps / frame_count / 1000` in kbit/s.
///
/// The per-quantizer encodes are independent, so they run on worker
/// threads; results are merged in qp order.
pub fn collect_rd_curve(
    frames: &[Frame],
    crop: (usize, usize),
    qps: &[Qp],
    params: NlmParams,
    refine: bool,
    fps: u8,
) -> Result<(RdCurve, Vec<RdRow>), MetricsError> {
    if qps.is_empty() || qps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetricsError::QpListNotIncreasing);
    }

    let results: Vec<Result<RdRow, MetricsError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = qps
            .iter()
            .map(|&qp| {
                scope.spawn(move || -> Result<RdRow, MetricsError> {
                    let cfg = EncoderConfig::new(qp, params, refine, fps)?;
                    let enc = encode_sequence(frames, &cfg)?;
                    let dec = decode_sequence(&enc.bytes)?;

                    let mut psnr_sum = 0.0;
                    let mut p_frames = 0usize;
                    for (i, decoded) in dec.frames.iter().enumerate().skip(1) {
                        psnr_sum += psnr_cropped(&frames[i].luma, &decoded.luma, crop.0, crop.1)?;
                        p_frames += 1;
                    }
                    let mean_psnr = if p_frames > 0 {
                        psnr_sum / p_frames as f64
                    } else {
                        psnr_cropped(&frames[0].luma, &dec.frames[0].luma, crop.0, crop.1)?
                    };
                    let rate_kbps =
                        enc.stats.total_bits as f64 * f64::from(fps) / frames.len() as f64 / 1000.0;
                    let flags: u64 = enc
                        .stats
                        .frames
                        .iter()
                        .map(|f| u64::from(f.refined_mbs))
                        .sum();
                    let mbs: u64 = enc.stats.frames[1..]
                        .iter()
                        .map(|f| u64::from(f.total_mbs))
                        .sum();
                    Ok(RdRow {
                        qp: qp.value(),
                        rate_kbps,
                        psnr_db: mean_psnr,
                        mode_flags_set: flags,
                        total_mbs: mbs,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let rows: Vec<RdRow> = results.into_iter().collect::<Result<_, _>>()?;
    let curve = curve_from_rows(&rows)?;
    Ok((curve, rows))
}
