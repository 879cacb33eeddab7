//! Frame and sequence I/O, color conversion, and annotation rendering.
//!
//! Every other module consumes [`Frame`]: a row-major 8-bit raster with one
//! (grayscale) or three (RGB) channels. Frames are immutable values once
//! built; all operations here are pure functions returning new frames.

mod draw;
mod font;
mod pnm;

pub use draw::{draw_boxes, BOX_COLOR, TEXT_COLOR};
pub use pnm::{load_frame, save_frame};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// 8-bit raster, row-major, interleaved samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Frame {
    /// Builds a frame, checking the dimension/length invariants.
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Frame> {
        if width == 0 || height == 0 {
            return Err(Error::Param(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Param(format!(
                "frame must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::Param(format!(
                "frame data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    /// Single-channel frame filled with a constant value.
    pub fn filled_gray(width: u32, height: u32, value: u8) -> Frame {
        Frame::new(
            width,
            height,
            1,
            vec![value; width as usize * height as usize],
        )
        .expect("positive dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// Sample index of pixel (x, y), channel 0.
    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// Grayscale sample at (x, y). Panics if out of bounds or multi-channel.
    #[inline]
    pub fn gray_at(&self, x: u32, y: u32) -> u8 {
        debug_assert_eq!(self.channels, 1);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Replaces the sample buffer, keeping dimensions. Length must match.
    pub(crate) fn with_data(&self, data: Vec<u8>) -> Frame {
        debug_assert_eq!(data.len(), self.data.len());
        Frame {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }

    /// True when the frame contains only the values 0 and 255.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0 || v == 255)
    }
}

/// Sequence-level metadata attached to a loaded frame list.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub fps: f64,
    pub frame_count: usize,
    pub source: String,
}

/// Axis-aligned pixel rectangle. `w` and `h` are always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<BoundingBox> {
        if w == 0 || h == 0 {
            return Err(Error::Param(format!(
                "bounding box must have positive extent, got {w}x{h}"
            )));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    /// Last row covered by the box.
    pub fn bottom_row(&self) -> u32 {
        self.y + self.h - 1
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }
}

/// BT.601 luma conversion with round-half-up; 1-channel input is returned
/// unchanged.
pub fn to_grayscale(frame: &Frame) -> Frame {
    if frame.channels == 1 {
        return frame.clone();
    }
    let mut data = Vec::with_capacity(frame.width as usize * frame.height as usize);
    for px in frame.data.chunks_exact(3) {
        let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
        data.push(y.round() as u8);
    }
    Frame {
        width: frame.width,
        height: frame.height,
        channels: 1,
        data,
    }
}

/// Loads an ordered frame sequence.
///
/// `pattern` may be a directory (every `.pgm`/`.ppm`/`.png` file inside), a
/// path whose file name contains `*` wildcards, or a single file. Frames are
/// ordered by the last integer run in their file name, which matches
/// `<stem>_<zero-padded index>.<ext>` dumps from video splitters.
pub fn load_sequence(pattern: &str, fps: f64) -> Result<(Vec<Frame>, SequenceMeta)> {
    if fps <= 0.0 || !fps.is_finite() {
        return Err(Error::Param(format!("fps must be positive, got {fps}")));
    }
    let paths = expand_pattern(pattern)?;
    if paths.is_empty() {
        return Err(Error::Param(format!("no frames match pattern {pattern:?}")));
    }

    let mut indexed: Vec<(u64, PathBuf)> = Vec::with_capacity(paths.len());
    for path in paths {
        let idx = frame_index(&path)
            .ok_or_else(|| Error::format(&path, "no frame index (integer run) in file name"))?;
        indexed.push((idx, path));
    }
    indexed.sort();

    let mut frames = Vec::with_capacity(indexed.len());
    for (_, path) in &indexed {
        let frame = load_frame(path)?;
        if let Some(first) = frames.first() {
            let f: &Frame = first;
            if f.width != frame.width || f.height != frame.height || f.channels != frame.channels {
                return Err(Error::Contract(format!(
                    "dimension mismatch: {} is {}x{}x{}, expected {}x{}x{}",
                    path.display(),
                    frame.width,
                    frame.height,
                    frame.channels,
                    f.width,
                    f.height,
                    f.channels
                )));
            }
        }
        frames.push(frame);
    }

    let meta = SequenceMeta {
        fps,
        frame_count: frames.len(),
        source: pattern.to_string(),
    };
    Ok((frames, meta))
}

/// Last run of ASCII digits in the file stem, parsed as the frame index.
fn frame_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_string_lossy();
    let bytes = stem.as_bytes();
    let mut end = bytes.len();
    while end > 0 && !bytes[end - 1].is_ascii_digit() {
        end -= 1;
    }
    if end == 0 {
        return None;
    }
    let mut start = end;
    while start > 0 && bytes[start - 1].is_ascii_digit() {
        start -= 1;
    }
    stem[start..end].parse().ok()
}

fn expand_pattern(pattern: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(pattern);
    if path.is_dir() {
        let mut out = Vec::new();
        let entries = std::fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(path, e))?;
            let p = entry.path();
            if p.is_file() && has_frame_extension(&p) {
                out.push(p);
            }
        }
        return Ok(out);
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if name.contains('*') {
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut out = Vec::new();
        let entries = std::fs::read_dir(&parent).map_err(|e| Error::io(&parent, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&parent, e))?;
            let p = entry.path();
            let fname = p.file_name().map(|n| n.to_string_lossy().into_owned());
            if let Some(fname) = fname {
                if p.is_file() && glob_match(&name, &fname) {
                    out.push(p);
                }
            }
        }
        return Ok(out);
    }
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    Ok(Vec::new())
}

fn has_frame_extension(path: &Path) -> bool {
    matches!(
        path.extension()
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
            .and_then(|e| e.to_str()),
        Some("pgm") | Some("ppm") | Some("png")
    )
}

/// Minimal `*` wildcard match, enough for `frame_*.pgm` style patterns.
fn glob_match(pattern: &str, name: &str) -> bool {
    fn inner(p: &[u8], n: &[u8]) -> bool {
        match p.first() {
            None => n.is_empty(),
            Some(b'*') => (0..=n.len()).any(|k| inner(&p[1..], &n[k..])),
            Some(&c) => n.first() == Some(&c) && inner(&p[1..], &n[1..]),
        }
    }
    inner(pattern.as_bytes(), name.as_bytes())
}
