//! Experiment harness: wall-clock throughput per method, detection
//! timeliness against ground truth, external-detection ingestion, and
//! CSV/JSON reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detect::Detection;
use crate::error::{Error, Result};
use crate::frameio::{BoundingBox, Frame};

/// Detections grouped by frame index.
pub type DetectionTable = BTreeMap<usize, Vec<Detection>>;

/// Per-frame annotation boxes plus sequence-level marks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub boxes: BTreeMap<usize, Vec<(BoundingBox, String)>>,
    pub crash_frame: Option<usize>,
    pub fps: Option<f64>,
    pub first_visible_frame: Option<usize>,
    pub full_silhouette_frame: Option<usize>,
}

impl GroundTruth {
    pub fn boxes_at(&self, frame: usize) -> &[(BoundingBox, String)] {
        self.boxes.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Loads the ground-truth CSV: `frame,x,y,w,h,label` rows, plus optional
/// comment lines like `# crash_frame=95 fps=24 first_visible_frame=60`
/// carrying sequence-level marks. A `frame,x,y,...` header row is skipped.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut gt = GroundTruth::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let at = |msg: String| Error::format(path, format!("line {}: {msg}", lineno + 1));
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some((key, value)) = token.split_once('=') {
                    match key {
                        "crash_frame" => {
                            gt.crash_frame = Some(
                                value
                                    .parse()
                                    .map_err(|_| at(format!("bad crash_frame value {value:?}")))?,
                            )
                        }
                        "fps" => {
                            gt.fps = Some(
                                value
                                    .parse()
                                    .map_err(|_| at(format!("bad fps value {value:?}")))?,
                            )
                        }
                        "first_visible_frame" => {
                            gt.first_visible_frame = Some(value.parse().map_err(|_| {
                                at(format!("bad first_visible_frame value {value:?}"))
                            })?)
                        }
                        "full_silhouette_frame" => {
                            gt.full_silhouette_frame = Some(value.parse().map_err(|_| {
                                at(format!("bad full_silhouette_frame value {value:?}"))
                            })?)
                        }
                        _ => {} // unrecognized marks stay comments
                    }
                }
            }
            continue;
        }
        if line.starts_with("frame,") {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(at(format!("expected frame,x,y,w,h[,label], got {line:?}")));
        }
        let parse_u = |s: &str, name: &str| -> Result<i64> {
            s.parse::<i64>()
                .map_err(|_| at(format!("bad {name} value {s:?}")))
        };
        let frame = parse_u(fields[0], "frame")? as usize;
        let x = parse_u(fields[1], "x")?;
        let y = parse_u(fields[2], "y")?;
        let w = parse_u(fields[3], "w")?;
        let h = parse_u(fields[4], "h")?;
        if x < 0 || y < 0 {
            return Err(at("box position must be non-negative".into()));
        }
        if w <= 0 || h <= 0 {
            return Err(at("box dimensions must be positive".into()));
        }
        let label = fields
            .get(5)
            .filter(|s| !s.is_empty())
            .unwrap_or(&"person")
            .to_string();
        gt.boxes.entry(frame).or_default().push((
            BoundingBox {
                x: x as u32,
                y: y as u32,
                w: w as u32,
                h: h as u32,
            },
            label,
        ));
    }
    Ok(gt)
}

/// One benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub total_seconds: f64,
    pub fps: f64,
    pub first_detection_frame: Option<usize>,
    pub seconds_before_crash: Option<f64>,
}

/// Times `method` over the sequence with a monotonic clock. The first
/// `warmup_frames` frames run untimed, then every frame runs exactly once,
/// in order, in the timed pass. `fps = frame_count / elapsed`.
pub fn time_method<F>(
    name: &str,
    mut method: F,
    frames: &[Frame],
    warmup_frames: usize,
) -> Result<BenchRecord>
where
    F: FnMut(&Frame) -> Frame,
{
    if frames.is_empty() {
        return Err(Error::Param("cannot time an empty sequence".into()));
    }
    for frame in frames.iter().take(warmup_frames) {
        std::hint::black_box(method(frame));
    }
    let start = Instant::now();
    for frame in frames {
        std::hint::black_box(method(frame));
    }
    let total_seconds = start.elapsed().as_secs_f64();
    Ok(BenchRecord {
        method: name.to_string(),
        total_seconds,
        fps: frames.len() as f64 / total_seconds,
        first_detection_frame: None,
        seconds_before_crash: None,
    })
}

/// Smallest frame index whose detections include a `label` box overlapping
/// a same-frame, same-label ground-truth box with IoU >= `iou_min`.
pub fn eval_first_detection(
    dets: &DetectionTable,
    gt: &GroundTruth,
    iou_min: f64,
    label: &str,
) -> Option<usize> {
    for (&frame, frame_dets) in dets {
        let truth = gt.boxes_at(frame);
        if truth.is_empty() {
            continue;
        }
        for det in frame_dets {
            if det.label != label {
                continue;
            }
            for (gt_box, gt_label) in truth {
                if gt_label == label && crate::detect::iou(&det.bbox, gt_box) >= iou_min {
                    return Some(frame);
                }
            }
        }
    }
    None
}

/// `(crash_frame - detect_frame) / fps`, in seconds.
pub fn seconds_before_crash(detect_frame: usize, crash_frame: usize, fps: f64) -> Result<f64> {
    if detect_frame > crash_frame {
        return Err(Error::Param(format!(
            "detection frame {detect_frame} is after crash frame {crash_frame}"
        )));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::Param(format!("fps must be positive, got {fps}")));
    }
    Ok((crash_frame - detect_frame) as f64 / fps)
}

/// Explains how the exact frame-delta seconds relate to the two-decimal
/// figures usually quoted for this timeline. Needs `crash_frame` and `fps`.
pub fn timeline_footnote(gt: &GroundTruth, first_detection_frame: Option<usize>) -> Option<String> {
    let crash = gt.crash_frame?;
    let fps = gt.fps?;
    let trunc2 = |v: f64| (v * 100.0).floor() / 100.0;
    let crash_time = crash as f64 / fps;
    let mut note = format!(
        "note: crash at frame {crash} = {crash_time:.4} s at {fps} fps (two-decimal form {:.2} s).",
        trunc2(crash_time)
    );
    if let Some(det) = first_detection_frame.filter(|&d| d <= crash) {
        let exact = (crash - det) as f64 / fps;
        let legacy = trunc2(trunc2(crash_time) - det as f64 / fps);
        note.push_str(&format!(
            " First detection at frame {det}: {exact:.4} s before the crash; differencing from the truncated {:.2} s crash time gives the commonly quoted {legacy:.2} s.",
            trunc2(crash_time)
        ));
    }
    if let Some(feet) = gt.first_visible_frame.filter(|&f| f <= crash) {
        let exact = (crash - feet) as f64 / fps;
        note.push_str(&format!(
            " Feet first visible at frame {feet}: {exact:.4} s before the crash ({:.2} s truncated).",
            trunc2(exact)
        ));
    }
    if let Some(full) = gt.full_silhouette_frame.filter(|&f| f <= crash) {
        let exact = (crash - full) as f64 / fps;
        note.push_str(&format!(
            " Full silhouette visible at frame {full}: {exact:.4} s before the crash ({:.2} s truncated).",
            trunc2(exact)
        ));
    }
    Some(note)
}

#[derive(Serialize, Deserialize)]
struct DetectionLine {
    frame: usize,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
    score: f64,
    label: String,
}

/// Writes detections as JSON lines in the wire format
/// `{"frame":i,"x":..,"y":..,"w":..,"h":..,"score":..,"label":".."}`.
pub fn emit_detections<W: Write>(mut out: W, dets: &[Detection]) -> Result<()> {
    for det in dets {
        let line = DetectionLine {
            frame: det.frame_index,
            x: det.bbox.x as i64,
            y: det.bbox.y as i64,
            w: det.bbox.w as i64,
            h: det.bbox.h as i64,
            score: det.score,
            label: det.label.clone(),
        };
        let json = serde_json::to_string(&line)
            .map_err(|e| Error::Contract(format!("detection serialization failed: {e}")))?;
        writeln!(out, "{json}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn save_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    emit_detections(std::io::BufWriter::new(file), dets)
}

/// Reads a detection JSON-lines file, grouping by frame index. Malformed
/// lines and non-positive box dimensions are reported with their line
/// number.
pub fn ingest_external_detections(path: impl AsRef<Path>) -> Result<DetectionTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = DetectionTable::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: DetectionLine = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        if parsed.w <= 0 || parsed.h <= 0 {
            return Err(Error::format(
                path,
                format!("line {}: box dimensions must be positive", lineno + 1),
            ));
        }
        if parsed.x < 0 || parsed.y < 0 {
            return Err(Error::format(
                path,
                format!("line {}: box position must be non-negative", lineno + 1),
            ));
        }
        table.entry(parsed.frame).or_default().push(Detection {
            frame_index: parsed.frame,
            bbox: BoundingBox {
                x: parsed.x as u32,
                y: parsed.y as u32,
                w: parsed.w as u32,
                h: parsed.h as u32,
            },
            score: parsed.score,
            label: parsed.label,
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Param(format!("unknown report format {other:?}"))),
        }
    }
}

pub const REPORT_HEADER: &str =
    "method,total_seconds,fps,first_detection_frame,seconds_before_crash";

/// Writes records in input order. CSV columns are exactly
/// `method,total_seconds,fps,first_detection_frame,seconds_before_crash`
/// with empty cells for absent optionals; JSON is an array of objects with
/// the same keys.
pub fn write_report(
    records: &[BenchRecord],
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    match format {
        ReportFormat::Csv => {
            text.push_str(REPORT_HEADER);
            text.push('\n');
            for r in records {
                let first = r
                    .first_detection_frame
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                let secs = r
                    .seconds_before_crash
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.method, r.total_seconds, r.fps, first, secs
                ));
            }
        }
        ReportFormat::Json => {
            text = serde_json::to_string_pretty(records)
                .map_err(|e| Error::Contract(format!("report serialization failed: {e}")))?;
            text.push('\n');
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a report written by [`write_report`].
pub fn read_report(path: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ReportFormat::Json => serde_json::from_str(&text)
            .map_err(|e| Error::format(path, format!("bad report json: {e}"))),
        ReportFormat::Csv => {
            let mut out = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if lineno == 0 {
                    if line != REPORT_HEADER {
                        return Err(Error::format(path, "unexpected report header"));
                    }
                    continue;
                }
                if line.is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 5 {
                    return Err(Error::format(
                        path,
                        format!("line {}: expected 5 columns", lineno + 1),
                    ));
                }
                let bad = |col: &str| {
                    Error::format(path, format!("line {}: bad {col} value", lineno + 1))
                };
                out.push(BenchRecord {
                    method: fields[0].to_string(),
                    total_seconds: fields[1].parse().map_err(|_| bad("total_seconds"))?,
                    fps: fields[2].parse().map_err(|_| bad("fps"))?,
                    first_detection_frame: if fields[3].is_empty() {
                        None
                    } else {
                        Some(
                            fields[3]
                                .parse()
                                .map_err(|_| bad("first_detection_frame"))?,
                        )
                    },
                    seconds_before_crash: if fields[4].is_empty() {
                        None
                    } else {
                        Some(fields[4].parse().map_err(|_| bad("seconds_before_crash"))?)
                    },
                });
            }
            Ok(out)
        }
    }
}
