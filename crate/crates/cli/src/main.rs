//! `nightwatch`: batch CLI over the enhancement/detection pipeline.
//!
//! Exit codes: 0 success, 2 invalid arguments or failed validation,
//! 1 runtime failure. Diagnostics go to standard error.

mod commands;
mod config;
mod methods;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, bad config, missing referenced paths: exit 2.
    Usage(String),
    /// Failures after validation (I/O, malformed data): exit 1.
    Runtime(String),
}

impl CliError {
    pub fn runtime(err: impl std::fmt::Display) -> CliError {
        CliError::Runtime(err.to_string())
    }

    pub fn usage(err: impl std::fmt::Display) -> CliError {
        CliError::Usage(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "nightwatch",
    version,
    about = "Low-light enhancement, pedestrian detection, and throughput benchmarking on frame sequences"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply an enhancement or processing method to every frame
    Enhance(EnhanceArgs),
    /// Emit pedestrian-candidate boxes per frame as JSON lines
    Segment(SegmentArgs),
    /// Run the HOG+SVM detector over a sequence
    Detect(DetectArgs),
    /// Train a linear SVM on pos/ and neg/ crop directories
    Train(TrainArgs),
    /// Time methods over a sequence and report throughput/timeliness
    Bench(BenchArgs),
}

#[derive(Args)]
struct EnhanceArgs {
    /// Optional key=value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input sequence: directory, glob pattern, or single frame
    #[arg(long = "in")]
    input: Option<String>,
    /// Output directory for processed frames
    #[arg(long)]
    out: Option<PathBuf>,
    /// gamma | he | clahe | threshold | canny | harris | motion
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    fps: Option<f64>,
    /// Frame-parallel workers for stateless methods
    #[arg(long)]
    jobs: Option<usize>,
    /// Power-law exponent for --method gamma
    #[arg(long)]
    gamma: Option<f64>,
    /// CLAHE tile grid as TXxTY, e.g. 8x8
    #[arg(long)]
    tiles: Option<String>,
    /// CLAHE clip limit (multiple of the uniform bin height)
    #[arg(long)]
    clip: Option<f64>,
    /// Threshold for --method threshold
    #[arg(long)]
    t: Option<u8>,
    /// Gaussian sigma for --method canny
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    low: Option<f64>,
    #[arg(long)]
    high: Option<f64>,
    /// on | off: shadow labeling for --method motion
    #[arg(long)]
    shadows: Option<String>,
    /// Harris response coefficient
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "window-sigma")]
    window_sigma: Option<f64>,
    #[arg(long = "response-threshold")]
    response_threshold: Option<f64>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "in")]
    input: Option<String>,
    /// JSON-lines output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
    /// Adaptive-threshold window (odd, >= 3)
    #[arg(long)]
    window: Option<u32>,
    /// Adaptive-threshold offset
    #[arg(long)]
    offset: Option<i32>,
    #[arg(long = "min-area")]
    min_area: Option<u64>,
    #[arg(long = "max-area")]
    max_area: Option<u64>,
    /// Excluded top/bottom frame fraction
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long = "min-ratio")]
    min_ratio: Option<f64>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "in")]
    input: Option<String>,
    /// Detections output file (JSON lines)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trained model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Train in place from POS and NEG crop directories instead of --model
    #[arg(long, num_args = 2, value_names = ["POS", "NEG"])]
    train: Option<Vec<String>>,
    /// Directory for annotated frames (boxes burned in)
    #[arg(long)]
    annotate: Option<PathBuf>,
    #[arg(long = "score-threshold")]
    score_threshold: Option<f64>,
    #[arg(long = "scale-step")]
    scale_step: Option<f64>,
    /// Window stride in pixels
    #[arg(long)]
    stride: Option<u32>,
    #[arg(long = "nms-iou")]
    nms_iou: Option<f64>,
    #[arg(long = "max-levels")]
    max_levels: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    /// Training hyperparameters (used with --train)
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of positive 64x128 crops
    pos: String,
    /// Directory of negative 64x128 crops
    neg: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model output file
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "score-threshold")]
    score_threshold: Option<f64>,
    /// Directory of full negative frames for one hard-negative mining pass
    #[arg(long = "hard-neg")]
    hard_neg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// enhance | detect | all
    #[arg(long)]
    suite: Option<String>,
    #[arg(long = "in")]
    input: Option<String>,
    /// Ground-truth CSV (required for the detect suite)
    #[arg(long)]
    gt: Option<PathBuf>,
    /// External detection JSON-lines files to evaluate as extra rows
    #[arg(long)]
    ingest: Vec<PathBuf>,
    /// Model for the hog_svm row of the detect suite
    #[arg(long)]
    model: Option<PathBuf>,
    /// Report output path
    #[arg(long)]
    report: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Untimed warmup frames per stateless method
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long = "score-threshold")]
    score_threshold: Option<f64>,
    #[arg(long = "scale-step")]
    scale_step: Option<f64>,
    #[arg(long)]
    stride: Option<u32>,
    #[arg(long = "nms-iou")]
    nms_iou: Option<f64>,
    #[arg(long = "max-levels")]
    max_levels: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Enhance(args) => commands::enhance(args),
        Cmd::Segment(args) => commands::segment(args),
        Cmd::Detect(args) => commands::detect(args),
        Cmd::Train(args) => commands::train(args),
        Cmd::Bench(args) => commands::bench(args),
    };
    std::process::exit(match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    });
}
