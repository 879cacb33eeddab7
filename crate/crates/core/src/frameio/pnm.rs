//! Binary PGM (P5) / PPM (P6) reader and writer, maxval 255.
//!
//! These are the native formats: the byte layout is trivial, so golden-file
//! tests can assert bit-exact round-trips. PNG is accepted on load as a
//! convenience (dispatched on the file signature) but never written.

use std::io::Write;
use std::path::Path;

use super::Frame;
use crate::error::{Error, Result};

pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        return load_png(path, &bytes);
    }
    load_pnm(path, &bytes)
}

pub fn save_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let magic = if frame.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height());
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(header.as_bytes())
        .and_then(|_| w.write_all(frame.data()))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn load_pnm(path: &Path, bytes: &[u8]) -> Result<Frame> {
    let channels: u8 = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            return Err(Error::format(
                path,
                "malformed header: expected P5 or P6 magic",
            ))
        }
    };
    let mut pos = 2;
    let width = read_header_int(path, bytes, &mut pos)?;
    let height = read_header_int(path, bytes, &mut pos)?;
    let maxval = read_header_int(path, bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::format(path, format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::format(
                path,
                "malformed header: missing raster separator",
            ))
        }
    }
    if width == 0 || height == 0 {
        return Err(Error::format(path, "malformed header: zero dimension"));
    }
    let expected = width as usize * height as usize * channels as usize;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(Error::format(
            path,
            format!(
                "truncated pixel data: expected {expected} bytes, found {}",
                data.len()
            ),
        ));
    }
    Frame::new(
        width as u32,
        height as u32,
        channels,
        data[..expected].to_vec(),
    )
}

/// Reads the next ASCII integer, skipping whitespace and `#` comment lines.
fn read_header_int(path: &Path, bytes: &[u8], pos: &mut usize) -> Result<u64> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::format(path, "malformed header: expected integer"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(path, "malformed header: integer out of range"))
}

fn load_png(path: &Path, bytes: &[u8]) -> Result<Frame> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| Error::format(path, format!("png decode failed: {e}")))?;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Frame::new(w, h, 1, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Frame::new(w, h, 3, rgb.into_raw())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_p5_bytes_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P5\n2 2\n255\n\x00\x40\x80\xff").unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (2, 2, 1));
        assert_eq!(f.data(), &[0, 64, 128, 255]);
    }

    #[test]
    fn loads_p6_single_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        std::fs::write(&path, b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (1, 1, 3));
        assert_eq!(f.data(), &[255, 0, 0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P5\n# made by hand\n2 1\n# another\n255\n\x01\x02").unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!(f.data(), &[1, 2]);
    }

    #[test]
    fn rejects_wide_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P5\n1 1\n65535\n\x00\x00").unwrap();
        let err = load_frame(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported maxval"), "{err}");
    }

    #[test]
    fn rejects_truncated_data() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P5\n4 4\n255\n\x00\x01").unwrap();
        let err = load_frame(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        std::fs::write(&path, b"P2\n1 1\n255\n0").unwrap();
        assert!(load_frame(&path).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_frame("/nonexistent/frame.pgm").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let f = Frame::filled_gray(2, 2, 0);
        let err = save_frame(&f, "/nonexistent/dir/out.pgm").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn png_convenience_decode() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = image::GrayImage::from_raw(3, 2, vec![0, 50, 100, 150, 200, 250]).unwrap();
        img.save(&path).unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!((f.width(), f.height(), f.channels()), (3, 2, 1));
        assert_eq!(f.data(), &[0, 50, 100, 150, 200, 250]);

        let rgb = image::RgbImage::from_raw(1, 1, vec![9, 8, 7]).unwrap();
        let path = dir.path().join("c.png");
        rgb.save(&path).unwrap();
        let f = load_frame(&path).unwrap();
        assert_eq!((f.channels(), f.data()), (3, &[9u8, 8, 7][..]));
    }

    #[test]
    fn three_channel_saves_as_p6() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ppm");
        let f = Frame::new(1, 1, 3, vec![9, 8, 7]).unwrap();
        save_frame(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n"));
    }

    proptest! {
        // Save -> load is bit-exact for arbitrary valid frames.
        #[test]
        fn roundtrip_is_bit_exact(
            w in 1u32..24,
            h in 1u32..24,
            gray in proptest::bool::ANY,
            seed in proptest::num::u64::ANY,
        ) {
            let channels = if gray { 1 } else { 3 };
            let n = (w * h * channels as u32) as usize;
            let mut state = seed | 1;
            let data: Vec<u8> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 56) as u8
                })
                .collect();
            let frame = Frame::new(w, h, channels, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join(if gray { "f.pgm" } else { "f.ppm" });
            save_frame(&frame, &path).unwrap();
            prop_assert_eq!(load_frame(&path).unwrap(), frame);
        }
    }
}
