//! Box and label overlay rendering for detection output frames.

use super::font;
use super::{BoundingBox, Frame};

/// Outline color for rendered boxes.
pub const BOX_COLOR: [u8; 3] = [0, 255, 0];
/// Color for label text.
pub const TEXT_COLOR: [u8; 3] = [255, 255, 0];

/// Returns a 3-channel copy of `frame` with a 1-px outline per box and, when
/// there is room above the box, a `label score` caption. Boxes reaching past
/// the frame are clipped; the input frame is never modified.
pub fn draw_boxes(frame: &Frame, boxes: &[(BoundingBox, &str, f64)]) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let mut data = if frame.channels() == 3 {
        frame.data().to_vec()
    } else {
        let mut rgb = Vec::with_capacity(w as usize * h as usize * 3);
        for &v in frame.data() {
            rgb.extend_from_slice(&[v, v, v]);
        }
        rgb
    };

    for (bbox, label, score) in boxes {
        draw_rect(&mut data, w, h, bbox);
        let text = if label.is_empty() {
            String::new()
        } else {
            format!("{label} {score:.2}")
        };
        if !text.is_empty() && bbox.y > font::GLYPH_H {
            draw_text(&mut data, w, h, bbox.x, bbox.y - font::GLYPH_H - 1, &text);
        }
    }

    Frame::new(w, h, 3, data).expect("dimensions preserved")
}

fn put(data: &mut [u8], w: u32, x: u32, y: u32, color: [u8; 3]) {
    let i = (y as usize * w as usize + x as usize) * 3;
    data[i..i + 3].copy_from_slice(&color);
}

fn draw_rect(data: &mut [u8], w: u32, h: u32, b: &BoundingBox) {
    if b.x >= w || b.y >= h {
        return;
    }
    let x1 = (b.x + b.w - 1).min(w - 1);
    let y1 = (b.y + b.h - 1).min(h - 1);
    for x in b.x..=x1 {
        put(data, w, x, b.y, BOX_COLOR);
        put(data, w, x, y1, BOX_COLOR);
    }
    for y in b.y..=y1 {
        put(data, w, b.x, y, BOX_COLOR);
        put(data, w, x1, y, BOX_COLOR);
    }
}

fn draw_text(data: &mut [u8], w: u32, h: u32, x0: u32, y0: u32, text: &str) {
    let mut x = x0;
    for c in text.chars() {
        let glyph = font::glyph(c);
        for (dy, row) in glyph.iter().enumerate() {
            for dx in 0..font::GLYPH_W {
                if row & (1 << (font::GLYPH_W - 1 - dx)) != 0 {
                    let (px, py) = (x + dx, y0 + dy as u32);
                    if px < w && py < h {
                        put(data, w, px, py, TEXT_COLOR);
                    }
                }
            }
        }
        x += font::ADVANCE;
        if x >= w {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb_at(f: &Frame, x: u32, y: u32) -> [u8; 3] {
        let i = f.index(x, y);
        [f.data()[i], f.data()[i + 1], f.data()[i + 2]]
    }

    #[test]
    fn empty_box_list_is_plain_conversion() {
        let f = Frame::new(2, 2, 1, vec![10, 20, 30, 40]).unwrap();
        let out = draw_boxes(&f, &[]);
        assert_eq!(out.channels(), 3);
        assert_eq!(
            out.data(),
            &[10, 10, 10, 20, 20, 20, 30, 30, 30, 40, 40, 40]
        );
    }

    #[test]
    fn outline_pixels_enumerated_by_hand() {
        // A 2x2 box at the origin of a 4x4 frame is all outline: the four
        // pixels (0,0) (1,0) (0,1) (1,1). Everything else is untouched.
        let f = Frame::filled_gray(4, 4, 7);
        let b = BoundingBox::new(0, 0, 2, 2).unwrap();
        let out = draw_boxes(&f, &[(b, "", 0.0)]);
        for y in 0..4 {
            for x in 0..4 {
                let expected = if x < 2 && y < 2 { BOX_COLOR } else { [7, 7, 7] };
                assert_eq!(rgb_at(&out, x, y), expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn oversized_box_is_clipped() {
        let f = Frame::filled_gray(4, 4, 0);
        let b = BoundingBox::new(2, 2, 10, 10).unwrap();
        let out = draw_boxes(&f, &[(b, "", 0.0)]);
        // No panic, and corner pixel of the clipped outline is set.
        assert_eq!(rgb_at(&out, 3, 3), BOX_COLOR);
        assert_eq!(rgb_at(&out, 0, 0), [0, 0, 0]);
    }

    #[test]
    fn label_renders_above_box_when_it_fits() {
        let f = Frame::filled_gray(64, 64, 0);
        let b = BoundingBox::new(8, 20, 16, 16).unwrap();
        let out = draw_boxes(&f, &[(b, "person", 0.5)]);
        let text_pixels = (0..20u32)
            .flat_map(|y| (0..64u32).map(move |x| (x, y)))
            .filter(|&(x, y)| rgb_at(&out, x, y) == TEXT_COLOR)
            .count();
        assert!(text_pixels > 10, "expected glyph pixels above the box");
    }

    #[test]
    fn input_frame_is_unmodified() {
        let f = Frame::filled_gray(8, 8, 3);
        let before = f.clone();
        let b = BoundingBox::new(1, 1, 4, 4).unwrap();
        let _ = draw_boxes(&f, &[(b, "x", 1.0)]);
        assert_eq!(f, before);
    }
}
