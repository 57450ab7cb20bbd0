//! Command-line frontend: encode, decode, rate-distortion sweeps,
//! Bjontegaard deltas between sweep CSVs, and synthetic sequence
//! generation.
//!
//! Exit codes: 0 on success, 1 for runtime failures (bad files, malformed
//! streams), 2 for usage errors.

use std::error::Error;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nlmrp::codec::{decode_sequence, encode_sequence, EncoderConfig};
use nlmrp::metrics::{
    bd_psnr, bd_rate, collect_rd_curve, curve_from_rows, psnr_cropped, rd_rows_from_csv,
    rd_rows_to_csv, RdRow,
};
use nlmrp::refine::NlmParams;
use nlmrp::source::{load_sequence, write_y4m_file, LoadedSequence, SequenceSource};
use nlmrp::synth::{generate_synthetic, SyntheticKind, SyntheticSpec};
use nlmrp::transform::Qp;

#[derive(Parser)]
#[command(
    name = "nlmrp",
    version,
    about = "Hybrid video codec with refined prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a sequence into an NLRP bitstream; prints stats JSON.
    Encode(EncodeArgs),
    /// Decode an NLRP bitstream to y4m.
    Decode(DecodeArgs),
    /// Sweep quantizers and write a rate-distortion CSV.
    Rdcurve(RdcurveArgs),
    /// Bjontegaard deltas between two sweep CSVs.
    Bd(BdArgs),
    /// Generate a synthetic test sequence as y4m.
    Synth(SynthArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input sequence: y4m, or raw planar 4:2:0 when --size is given.
    #[arg(long)]
    input: PathBuf,
    /// Geometry WxH of a raw planar 4:2:0 input.
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    /// Frame rate of a raw input (y4m carries its own).
    #[arg(long, default_value_t = 30)]
    fps: u8,
}

impl InputArgs {
    fn load(&self) -> Result<LoadedSequence, Box<dyn Error>> {
        let source = match self.size {
            Some((width, height)) => SequenceSource::RawYuv420 {
                path: self.input.clone(),
                width,
                height,
                fps: self.fps,
            },
            None => SequenceSource::Y4m {
                path: self.input.clone(),
            },
        };
        Ok(load_sequence(&source)?)
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Quantization parameter.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=51))]
    qp: u8,
    /// Disable the refinement path (plain motion compensation).
    #[arg(long)]
    no_refine: bool,
    /// Patch half-width for the refinement.
    #[arg(long, default_value_t = 3)]
    dm: u8,
    /// Averaging strength (stored in sixteenths in the stream header).
    #[arg(long = "h", default_value_t = 25.0)]
    strength: f64,
    /// Output bitstream path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input bitstream path.
    #[arg(long)]
    input: PathBuf,
    /// Output y4m path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SweepMode {
    /// Plain motion compensation only.
    Mc,
    /// Motion compensation with refinement.
    Nlmrp,
    /// Both, appended into one CSV (mc rows first).
    Both,
}

#[derive(Args)]
struct RdcurveArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated strictly increasing quantizers.
    #[arg(long, default_value = "16,19,22,25,28,31,34,37,40,43")]
    qps: String,
    #[arg(long, value_enum, default_value_t = SweepMode::Nlmrp)]
    mode: SweepMode,
    #[arg(long, default_value_t = 3)]
    dm: u8,
    #[arg(long = "h", default_value_t = 25.0)]
    strength: f64,
    /// Output CSV path.
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct BdArgs {
    /// CSV of the anchor sweep.
    #[arg(long)]
    anchor: PathBuf,
    /// CSV of the test sweep.
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec: translating_texture[:dx=..,dy=..],
    /// occlusion[:dx=..,dy=..] or illumination_ramp[:gain=..].
    #[arg(long, value_parser = parse_kind)]
    spec: SyntheticKind,
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    size: (usize, usize),
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    fps: u8,
    /// Output y4m path.
    #[arg(long)]
    output: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let width = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let height = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    if width == 0 || height == 0 {
        return Err("dimensions must be positive".into());
    }
    Ok((width, height))
}

fn parse_kind(s: &str) -> Result<SyntheticKind, String> {
    s.parse()
}

fn parse_qps(s: &str) -> Result<Vec<Qp>, Box<dyn Error>> {
    let mut qps = Vec::new();
    for part in s.split(',') {
        let raw: u8 = part
            .trim()
            .parse()
            .map_err(|_| format!("bad qp {part:?}"))?;
        qps.push(Qp::new(raw).ok_or(format!("qp {raw} out of range 0..=51"))?);
    }
    Ok(qps)
}

fn params(dm: u8, strength: f64) -> Result<NlmParams, Box<dyn Error>> {
    Ok(NlmParams::quantized(usize::from(dm), strength)?)
}

fn run_encode(args: &EncodeArgs) -> Result<(), Box<dyn Error>> {
    let loaded = args.input.load()?;
    let cfg = EncoderConfig::new(
        Qp::new(args.qp).expect("validated by clap"),
        params(args.dm, args.strength)?,
        !args.no_refine,
        loaded.fps,
    )?;
    let enc = encode_sequence(&loaded.frames, &cfg)?;
    fs::write(&args.output, &enc.bytes)?;

    let (crop_w, crop_h) = loaded.crop();
    let per_frame = enc
        .stats
        .frames
        .iter()
        .zip(&enc.recon)
        .zip(&loaded.frames)
        .map(|((fs, recon), source)| {
            let psnr = psnr_cropped(&source.luma, recon, crop_w, crop_h)?;
            Ok(json!({
                "psnr": psnr,
                "bits": fs.bits,
                "refined_mbs": fs.refined_mbs,
            }))
        })
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    let stats = json!({
        "total_bits": enc.stats.total_bits,
        "frames": loaded.frames.len(),
        "per_frame": per_frame,
    });
    println!("{stats}");
    Ok(())
}

fn run_decode(args: &DecodeArgs) -> Result<(), Box<dyn Error>> {
    let bytes = fs::read(&args.input)?;
    let decoded = decode_sequence(&bytes)?;
    write_y4m_file(&args.output, &decoded.frames, decoded.header.fps)?;
    Ok(())
}

fn sweep(
    loaded: &LoadedSequence,
    qps: &[Qp],
    params: NlmParams,
    refine: bool,
) -> Result<Vec<RdRow>, Box<dyn Error>> {
    let (curve, rows) = collect_rd_curve(
        &loaded.frames,
        loaded.crop(),
        qps,
        params,
        refine,
        loaded.fps,
    )?;
    if !curve.quality_monotone() {
        eprintln!("warning: PSNR is not monotone in rate for this sweep");
    }
    Ok(rows)
}

fn run_rdcurve(args: &RdcurveArgs) -> Result<(), Box<dyn Error>> {
    let loaded = args.input.load()?;
    let qps = parse_qps(&args.qps)?;
    let params = params(args.dm, args.strength)?;
    let mut rows = Vec::new();
    if matches!(args.mode, SweepMode::Mc | SweepMode::Both) {
        rows.extend(sweep(&loaded, &qps, params, false)?);
    }
    if matches!(args.mode, SweepMode::Nlmrp | SweepMode::Both) {
        rows.extend(sweep(&loaded, &qps, params, true)?);
    }
    fs::write(&args.csv, rd_rows_to_csv(&rows))?;
    Ok(())
}

fn run_bd(args: &BdArgs) -> Result<(), Box<dyn Error>> {
    let anchor_rows = rd_rows_from_csv(&fs::read_to_string(&args.anchor)?)?;
    let test_rows = rd_rows_from_csv(&fs::read_to_string(&args.test)?)?;
    let anchor = curve_from_rows(&anchor_rows)?;
    let test = curve_from_rows(&test_rows)?;
    println!("BD-rate: {:.2} %", bd_rate(&anchor, &test)?);
    println!("BD-PSNR: {:.2} dB", bd_psnr(&anchor, &test)?);
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        kind: args.spec,
        seed: args.seed,
        width: args.size.0,
        height: args.size.1,
        frames: args.frames,
    };
    let frames = generate_synthetic(&spec);
    write_y4m_file(&args.output, &frames, args.fps)?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode(args) => run_encode(args),
        Command::Decode(args) => run_decode(args),
        Command::Rdcurve(args) => run_rdcurve(args),
        Command::Bd(args) => run_bd(args),
        Command::Synth(args) => run_synth(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
