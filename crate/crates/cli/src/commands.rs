//! Subcommand implementations. Each command validates everything it can
//! before touching the filesystem for output; validation failures exit 2,
//! failures after that exit 1.

use std::cell::RefCell;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use nightwatch_core::bench::{
    eval_first_detection, ingest_external_detections, load_ground_truth, save_detections,
    seconds_before_crash, time_method, timeline_footnote, write_report, BenchRecord,
    DetectionTable, GroundTruth, ReportFormat,
};
use nightwatch_core::detect::{
    detect_pedestrians, hog_descriptor, load_model, save_model, train_linear_svm,
    train_with_hard_negatives, Detection, HogParams, LinearModel, PyramidParams,
};
use nightwatch_core::enhance::{ClaheParams, GammaParams};
use nightwatch_core::frameio::{
    draw_boxes, load_frame, load_sequence, save_frame, to_grayscale, Frame,
};
use nightwatch_core::motionedge::{canny, harris, CannyParams, GmmParams, HarrisParams};
use nightwatch_core::segment::{pedestrian_candidates, CandidateFilterParams};

use crate::config::{resolve, resolve_opt, FileConfig};
use crate::methods::{apply_stateless, Method, MotionRunner};
use crate::{BenchArgs, CliError, DetectArgs, EnhanceArgs, SegmentArgs, TrainArgs};

fn file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::empty()),
    }
}

/// Loads the input sequence. Pattern problems (missing directory, nothing
/// matched) are usage errors; undecodable frames are runtime errors.
fn load_input(pattern: &str, fps: f64) -> Result<Vec<Frame>, CliError> {
    match load_sequence(pattern, fps) {
        Ok((frames, _)) => Ok(frames),
        Err(e @ nightwatch_core::Error::Param(_)) => Err(CliError::usage(e)),
        Err(e @ nightwatch_core::Error::Io { .. }) => Err(CliError::usage(e)),
        Err(e) => Err(CliError::runtime(e)),
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn parse_tiles(spec: &str) -> Result<(u32, u32), CliError> {
    let (tx, ty) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Usage(format!("--tiles expects TXxTY, got {spec:?}")))?;
    let parse = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| CliError::Usage(format!("--tiles expects TXxTY, got {spec:?}")))
    };
    Ok((parse(tx)?, parse(ty)?))
}

fn parse_on_off(value: &str, flag: &str) -> Result<bool, CliError> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(CliError::Usage(format!(
            "--{flag} expects on or off, got {other:?}"
        ))),
    }
}

fn output_name(index: usize, channels: u8) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("frame_{index:04}.{ext}")
}

pub fn enhance(args: EnhanceArgs) -> Result<(), CliError> {
    let mut cfg = file_config(&args.config)?;
    let input = require(resolve_opt(args.input, cfg.take("in")?), "in")?;
    let out_dir: PathBuf = require(resolve_opt(args.out, cfg.take("out")?), "out")?;
    let method_name: String = require(resolve_opt(args.method, cfg.take("method")?), "method")?;
    let fps = resolve(args.fps, cfg.take("fps")?, 24.0);
    let jobs = resolve(args.jobs, cfg.take("jobs")?, 1).max(1);

    let gamma = resolve(args.gamma, cfg.take("gamma")?, 3.5);
    let tiles_spec: String = resolve(args.tiles, cfg.take("tiles")?, "8x8".to_string());
    let clip = resolve(args.clip, cfg.take("clip")?, 2.0);
    let threshold = resolve(args.t, cfg.take("t")?, 128);
    let sigma = resolve(args.sigma, cfg.take("sigma")?, 1.0);
    let low = resolve(args.low, cfg.take("low")?, 40.0);
    let high = resolve(args.high, cfg.take("high")?, 120.0);
    let shadows_raw: String = resolve(args.shadows, cfg.take("shadows")?, "on".to_string());
    let k = resolve(args.k, cfg.take("k")?, 0.04);
    let window_sigma = resolve(args.window_sigma, cfg.take("window-sigma")?, 2.0);
    let response_threshold = resolve(
        args.response_threshold,
        cfg.take("response-threshold")?,
        0.01,
    );
    cfg.finish()?;

    let method = match method_name.as_str() {
        "gamma" => Method::Gamma(GammaParams::new(gamma).map_err(CliError::usage)?),
        "he" => Method::HistEq,
        "clahe" => {
            let (tx, ty) = parse_tiles(&tiles_spec)?;
            Method::Clahe(ClaheParams::new(tx, ty, clip).map_err(CliError::usage)?)
        }
        "threshold" => Method::Threshold(threshold),
        "canny" => {
            let p = CannyParams { sigma, low, high };
            // dry-run on a dummy frame so bad parameters exit 2 up front
            canny(&Frame::filled_gray(8, 8, 0), &p).map_err(CliError::usage)?;
            Method::Canny(p)
        }
        "harris" => {
            let p = HarrisParams {
                k,
                window_sigma,
                response_threshold,
            };
            harris(&Frame::filled_gray(8, 8, 0), &p).map_err(CliError::usage)?;
            Method::Harris(p)
        }
        "motion" => {
            let p = GmmParams {
                detect_shadows: parse_on_off(&shadows_raw, "shadows")?,
                ..GmmParams::default()
            };
            Method::Motion(p)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown method {other:?}; expected gamma|he|clahe|threshold|canny|harris|motion"
            )))
        }
    };

    let frames = load_input(&input, fps)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let outputs: Vec<Frame> = if let Method::Motion(params) = &method {
        if jobs > 1 {
            eprintln!("warning: --jobs ignored for the stateful motion method");
        }
        let mut runner = MotionRunner::new(*params);
        frames
            .iter()
            .map(|f| runner.step(f))
            .collect::<nightwatch_core::Result<_>>()
            .map_err(CliError::runtime)?
    } else if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(CliError::runtime)?;
        pool.install(|| {
            frames
                .par_iter()
                .map(|f| apply_stateless(&method, f))
                .collect::<nightwatch_core::Result<_>>()
        })
        .map_err(CliError::runtime)?
    } else {
        frames
            .iter()
            .map(|f| apply_stateless(&method, f))
            .collect::<nightwatch_core::Result<_>>()
            .map_err(CliError::runtime)?
    };

    for (i, frame) in outputs.iter().enumerate() {
        let path = out_dir.join(output_name(i, frame.channels()));
        save_frame(frame, &path).map_err(CliError::runtime)?;
    }
    Ok(())
}

pub fn segment(args: SegmentArgs) -> Result<(), CliError> {
    let mut cfg = file_config(&args.config)?;
    let input = require(resolve_opt(args.input, cfg.take("in")?), "in")?;
    let out: Option<PathBuf> = resolve_opt(args.out, cfg.take("out")?);
    let fps = resolve(args.fps, cfg.take("fps")?, 24.0);
    let params = CandidateFilterParams {
        min_area: resolve(args.min_area, cfg.take("min-area")?, 50),
        max_area: resolve(args.max_area, cfg.take("max-area")?, 10_000),
        margin_fraction: resolve(args.margin, cfg.take("margin")?, 0.10),
        min_area_ratio: resolve(args.min_ratio, cfg.take("min-ratio")?, 0.5),
        adaptive_window: resolve(args.window, cfg.take("window")?, 31),
        adaptive_offset: resolve(args.offset, cfg.take("offset")?, 10),
    };
    cfg.finish()?;
    params.validate().map_err(CliError::usage)?;
    if params.adaptive_window < 3 || params.adaptive_window.is_multiple_of(2) {
        return Err(CliError::Usage(format!(
            "--window must be odd and >= 3, got {}",
            params.adaptive_window
        )));
    }

    let frames = load_input(&input, fps)?;
    let mut lines = String::new();
    for (i, frame) in frames.iter().enumerate() {
        let boxes = pedestrian_candidates(frame, &params).map_err(CliError::runtime)?;
        let arrays: Vec<[u32; 4]> = boxes.iter().map(|b| [b.x, b.y, b.w, b.h]).collect();
        let line = serde_json::json!({ "frame": i, "boxes": arrays });
        lines.push_str(&line.to_string());
        lines.push('\n');
    }
    match out {
        Some(path) => std::fs::write(&path, lines)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{lines}");
            std::io::stdout().flush().map_err(CliError::runtime)
        }
    }
}

/// Loads every frame in a crop directory (sorted by file name), grayscale,
/// and checks the HOG window size.
fn load_crops(dir: &str, hog: &HogParams) -> Result<Vec<Vec<f64>>, CliError> {
    let dir_path = Path::new(dir);
    if !dir_path.is_dir() {
        return Err(CliError::Usage(format!("{dir} is not a directory")));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir_path)
        .map_err(|e| CliError::Runtime(format!("{dir}: {e}")))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut descriptors = Vec::new();
    for path in paths {
        let frame = load_frame(&path).map_err(CliError::runtime)?;
        let gray = to_grayscale(&frame);
        if gray.width() != hog.window_w || gray.height() != hog.window_h {
            return Err(CliError::Runtime(format!(
                "{}: crop must be {}x{}, got {}x{}",
                path.display(),
                hog.window_w,
                hog.window_h,
                gray.width(),
                gray.height()
            )));
        }
        descriptors.push(hog_descriptor(&gray, hog).map_err(CliError::runtime)?);
    }
    if descriptors.is_empty() {
        return Err(CliError::Runtime(format!("{dir}: no crops found")));
    }
    Ok(descriptors)
}

struct TrainSettings {
    lambda: f64,
    epochs: usize,
    seed: u64,
    score_threshold: f64,
}

fn run_training(
    pos_dir: &str,
    neg_dir: &str,
    hard_neg: Option<&Path>,
    settings: &TrainSettings,
) -> Result<LinearModel, CliError> {
    let hog = HogParams::default();
    let positives = load_crops(pos_dir, &hog)?;
    let negatives = load_crops(neg_dir, &hog)?;
    let mut model = match hard_neg {
        None => train_linear_svm(
            &positives,
            &negatives,
            settings.lambda,
            settings.epochs,
            settings.seed,
        )
        .map_err(CliError::runtime)?,
        Some(dir) => {
            let pattern = dir.to_string_lossy().to_string();
            let frames = load_input(&pattern, 24.0)?
                .iter()
                .map(to_grayscale)
                .collect::<Vec<_>>();
            train_with_hard_negatives(
                &positives,
                &negatives,
                &frames,
                &hog,
                &PyramidParams::default(),
                settings.lambda,
                settings.epochs,
                settings.seed,
            )
            .map_err(CliError::runtime)?
        }
    };
    model.score_threshold = settings.score_threshold;
    Ok(model)
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = file_config(&args.config)?;
    let out: PathBuf = require(resolve_opt(args.out, cfg.take("out")?), "out")?;
    let settings = TrainSettings {
        lambda: resolve(args.lambda, cfg.take("lambda")?, 1e-3),
        epochs: resolve(args.epochs, cfg.take("epochs")?, 50),
        seed: resolve(args.seed, cfg.take("seed")?, 7),
        score_threshold: resolve(args.score_threshold, cfg.take("score-threshold")?, 0.0),
    };
    cfg.finish()?;
    let model = run_training(&args.pos, &args.neg, args.hard_neg.as_deref(), &settings)?;
    save_model(&model, &out).map_err(CliError::runtime)?;
    eprintln!(
        "trained on {} + {}: {} weights, bias {:.6}",
        args.pos,
        args.neg,
        model.weights.len(),
        model.bias
    );
    Ok(())
}

pub fn detect(args: DetectArgs) -> Result<(), CliError> {
    let mut cfg = file_config(&args.config)?;
    let input = require(resolve_opt(args.input, cfg.take("in")?), "in")?;
    let out: PathBuf = require(resolve_opt(args.out, cfg.take("out")?), "out")?;
    let model_path: Option<PathBuf> = resolve_opt(args.model, cfg.take("model")?);
    let fps = resolve(args.fps, cfg.take("fps")?, 24.0);
    let pyr = PyramidParams {
        scale_step: resolve(args.scale_step, cfg.take("scale-step")?, 1.05),
        window_stride: resolve(args.stride, cfg.take("stride")?, 8),
        nms_iou: resolve(args.nms_iou, cfg.take("nms-iou")?, 0.3),
        max_levels: resolve(args.max_levels, cfg.take("max-levels")?, 64),
    };
    let score_threshold = resolve_opt(args.score_threshold, cfg.take("score-threshold")?);
    let lambda = resolve(args.lambda, cfg.take("lambda")?, 1e-3);
    let epochs = resolve(args.epochs, cfg.take("epochs")?, 50);
    let seed = resolve(args.seed, cfg.take("seed")?, 7);
    cfg.finish()?;
    pyr.validate().map_err(CliError::usage)?;

    let mut model = match (&model_path, &args.train) {
        (Some(path), None) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!(
                    "model file {} does not exist",
                    path.display()
                )));
            }
            load_model(path).map_err(CliError::runtime)?
        }
        (None, Some(dirs)) => {
            let settings = TrainSettings {
                lambda,
                epochs,
                seed,
                score_threshold: score_threshold.unwrap_or(0.0),
            };
            run_training(&dirs[0], &dirs[1], None, &settings)?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--model and --train are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "detect needs --model FILE or --train POS NEG".into(),
            ))
        }
    };
    if let Some(t) = score_threshold {
        model.score_threshold = t;
    }

    let hog = HogParams::default();
    if model.weights.len() != hog.descriptor_len() {
        return Err(CliError::Usage(format!(
            "model has {} weights, detector descriptor needs {}",
            model.weights.len(),
            hog.descriptor_len()
        )));
    }

    let frames = load_input(&input, fps)?;
    if let Some(dir) = &args.annotate {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }

    let mut all: Vec<Detection> = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let gray = to_grayscale(frame);
        let mut dets = detect_pedestrians(&gray, &model, &hog, &pyr).map_err(CliError::runtime)?;
        for d in &mut dets {
            d.frame_index = i;
        }
        if let Some(dir) = &args.annotate {
            let boxes: Vec<_> = dets
                .iter()
                .map(|d| (d.bbox, d.label.as_str(), d.score))
                .collect();
            let annotated = draw_boxes(frame, &boxes);
            save_frame(&annotated, dir.join(output_name(i, 3))).map_err(CliError::runtime)?;
        }
        all.extend(dets);
    }
    save_detections(&out, &all).map_err(CliError::runtime)?;
    eprintln!("{} detections over {} frames", all.len(), frames.len());
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    let mut cfg = file_config(&args.config)?;
    let suite: String = require(resolve_opt(args.suite, cfg.take("suite")?), "suite")?;
    let input = require(resolve_opt(args.input, cfg.take("in")?), "in")?;
    let report_path: PathBuf = require(resolve_opt(args.report, cfg.take("report")?), "report")?;
    let format: ReportFormat = resolve(args.format, cfg.take("format")?, "csv".to_string())
        .parse()
        .map_err(CliError::usage)?;
    let warmup = resolve(args.warmup, cfg.take("warmup")?, 5);
    let fps_flag = resolve(args.fps, cfg.take("fps")?, 24.0);
    let gt_path: Option<PathBuf> = resolve_opt(args.gt, cfg.take("gt")?);
    let model_path: Option<PathBuf> = resolve_opt(args.model, cfg.take("model")?);
    let pyr = PyramidParams {
        scale_step: resolve(args.scale_step, cfg.take("scale-step")?, 1.05),
        window_stride: resolve(args.stride, cfg.take("stride")?, 8),
        nms_iou: resolve(args.nms_iou, cfg.take("nms-iou")?, 0.3),
        max_levels: resolve(args.max_levels, cfg.take("max-levels")?, 64),
    };
    let score_threshold = resolve_opt(args.score_threshold, cfg.take("score-threshold")?);
    cfg.finish()?;
    pyr.validate().map_err(CliError::usage)?;

    let (run_enhance, run_detect) = match suite.as_str() {
        "enhance" => (true, false),
        "detect" => (false, true),
        "all" => (true, true),
        other => {
            return Err(CliError::Usage(format!(
                "unknown suite {other:?}; expected enhance|detect|all"
            )))
        }
    };
    if run_detect && gt_path.is_none() {
        return Err(CliError::Usage("--suite detect requires --gt".into()));
    }
    for path in &args.ingest {
        if !path.is_file() {
            return Err(CliError::Usage(format!(
                "ingest file {} does not exist",
                path.display()
            )));
        }
    }
    if let Some(p) = &model_path {
        if !p.is_file() {
            return Err(CliError::Usage(format!(
                "model file {} does not exist",
                p.display()
            )));
        }
    }
    if run_detect && model_path.is_none() && args.ingest.is_empty() {
        return Err(CliError::Usage(
            "detect suite needs --model and/or --ingest".into(),
        ));
    }

    let gt = match &gt_path {
        Some(p) => Some(load_ground_truth(p).map_err(CliError::runtime)?),
        None => None,
    };
    let frames = load_input(&input, fps_flag)?;
    if let Some(gt) = &gt {
        let (fw, fh) = (frames[0].width(), frames[0].height());
        for (&frame, boxes) in &gt.boxes {
            if frame >= frames.len() {
                return Err(CliError::Runtime(format!(
                    "ground truth references frame {frame}, sequence has {}",
                    frames.len()
                )));
            }
            for (bbox, _) in boxes {
                if !bbox.fits_in(fw, fh) {
                    return Err(CliError::Runtime(format!(
                        "ground truth box {bbox:?} at frame {frame} exceeds the {fw}x{fh} frame"
                    )));
                }
            }
        }
    }
    let fps_eff = gt.as_ref().and_then(|g| g.fps).unwrap_or(fps_flag);

    let mut records: Vec<BenchRecord> = Vec::new();
    let mut footnotes: Vec<String> = Vec::new();

    if run_enhance {
        records.extend(enhance_suite(&frames, warmup).map_err(CliError::runtime)?);
    }

    if run_detect {
        let gt = gt.as_ref().expect("validated above");
        if let Some(path) = &model_path {
            let mut model = load_model(path).map_err(CliError::runtime)?;
            if let Some(t) = score_threshold {
                model.score_threshold = t;
            }
            let hog = HogParams::default();
            if model.weights.len() != hog.descriptor_len() {
                return Err(CliError::Usage(format!(
                    "model has {} weights, detector descriptor needs {}",
                    model.weights.len(),
                    hog.descriptor_len()
                )));
            }
            let table: RefCell<DetectionTable> = RefCell::new(DetectionTable::new());
            let index = RefCell::new(0usize);
            let record = time_method(
                "hog_svm",
                |frame| {
                    let i = *index.borrow();
                    *index.borrow_mut() = i + 1;
                    let gray = to_grayscale(frame);
                    let mut dets = detect_pedestrians(&gray, &model, &hog, &pyr)
                        .expect("validated detector parameters");
                    for d in &mut dets {
                        d.frame_index = i;
                    }
                    table.borrow_mut().insert(i, dets);
                    frame.clone()
                },
                &frames,
                0, // stateless but indexed: every frame exactly once
            )
            .map_err(CliError::runtime)?;
            let table = table.into_inner();
            records.push(finish_detector_record(
                record,
                &table,
                gt,
                fps_eff,
                &mut footnotes,
            )?);
        }
        for path in &args.ingest {
            let table = ingest_external_detections(path).map_err(CliError::runtime)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "external".into());
            // Timing an ingested file measures local replay, not the
            // external detector; the row exists for its timeliness columns.
            let record = time_method(
                &name,
                |frame| {
                    std::hint::black_box(table.len());
                    frame.clone()
                },
                &frames,
                0,
            )
            .map_err(CliError::runtime)?;
            records.push(finish_detector_record(
                record,
                &table,
                gt,
                fps_eff,
                &mut footnotes,
            )?);
        }
    }

    write_report(&records, &report_path, format).map_err(CliError::runtime)?;
    for r in &records {
        println!(
            "{}: {:.3} s total, {:.2} fps{}",
            r.method,
            r.total_seconds,
            r.fps,
            r.first_detection_frame
                .map(|f| format!(", first detection at frame {f}"))
                .unwrap_or_default()
        );
    }
    for note in footnotes {
        println!("{note}");
    }
    Ok(())
}

fn finish_detector_record(
    mut record: BenchRecord,
    table: &DetectionTable,
    gt: &GroundTruth,
    fps: f64,
    footnotes: &mut Vec<String>,
) -> Result<BenchRecord, CliError> {
    record.first_detection_frame = eval_first_detection(table, gt, 0.5, "person");
    record.seconds_before_crash = match (record.first_detection_frame, gt.crash_frame) {
        (Some(first), Some(crash)) => {
            Some(seconds_before_crash(first, crash, fps).map_err(CliError::runtime)?)
        }
        _ => None,
    };
    if let Some(note) = timeline_footnote(gt, record.first_detection_frame) {
        footnotes.push(format!("{}: {note}", record.method));
    }
    Ok(record)
}

/// The registered enhancement-suite methods, timed in a fixed order.
fn enhance_suite(frames: &[Frame], warmup: usize) -> nightwatch_core::Result<Vec<BenchRecord>> {
    let mut records = Vec::new();

    let stateless: Vec<Method> = vec![
        Method::HistEq,
        Method::Canny(CannyParams::default()),
        Method::Threshold(128),
        Method::Gamma(GammaParams::new(3.5)?),
        Method::Clahe(ClaheParams::default()),
    ];
    for method in stateless {
        records.push(time_method(
            method.name(),
            |f| apply_stateless(&method, f).expect("valid default parameters"),
            frames,
            warmup,
        )?);
    }

    let seg_params = CandidateFilterParams::default();
    records.push(time_method(
        "adaptive_threshold_segmentation",
        |f| {
            std::hint::black_box(
                pedestrian_candidates(f, &seg_params).expect("valid default parameters"),
            );
            f.clone()
        },
        frames,
        warmup,
    )?);

    for (name, detect_shadows) in [
        ("motion_map_shadows", true),
        ("motion_map_no_shadows", false),
    ] {
        let params = GmmParams {
            detect_shadows,
            ..GmmParams::default()
        };
        let mut runner = MotionRunner::new(params);
        // stateful: no warmup, frames arrive in order exactly once
        records.push(time_method(
            name,
            |f| runner.step(f).expect("constant dimensions"),
            frames,
            0,
        )?);
    }

    let harris_method = Method::Harris(HarrisParams::default());
    records.push(time_method(
        harris_method.name(),
        |f| apply_stateless(&harris_method, f).expect("valid default parameters"),
        frames,
        // Harris is by far the slowest tier; one warmup frame is enough to
        // page everything in without dominating suite runtime.
        warmup.min(1),
    )?);

    Ok(records)
}
