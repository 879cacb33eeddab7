//! Connected-component labeling and the pedestrian-candidate filter.
//!
//! The pipeline is: grayscale -> local-mean adaptive binarization ->
//! block-based component labeling -> rule filter (area band, frame margins,
//! area ratio). Labeling scans 2x2 pixel blocks and resolves equivalences
//! with union-find; any two foreground pixels inside one block are already
//! 8-adjacent, so one label per block is exact for 8-connectivity.

use crate::error::{Error, Result};
use crate::frameio::{to_grayscale, BoundingBox, Frame};

/// One connected component with the statistics the candidate filter needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: u32,
    pub area: u64,
    pub bbox: BoundingBox,
    /// area / (bbox.w * bbox.h), in (0, 1].
    pub area_ratio: f64,
}

/// Thresholds for the candidate filter and its binarization stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateFilterParams {
    pub min_area: u64,
    pub max_area: u64,
    pub margin_fraction: f64,
    pub min_area_ratio: f64,
    pub adaptive_window: u32,
    pub adaptive_offset: i32,
}

impl Default for CandidateFilterParams {
    fn default() -> Self {
        CandidateFilterParams {
            min_area: 50,
            max_area: 10_000,
            margin_fraction: 0.10,
            min_area_ratio: 0.5,
            adaptive_window: 31,
            adaptive_offset: 10,
        }
    }
}

impl CandidateFilterParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_area == 0 || self.min_area >= self.max_area {
            return Err(Error::Param(format!(
                "area band must satisfy 0 < min < max, got [{}, {}]",
                self.min_area, self.max_area
            )));
        }
        if !(self.margin_fraction > 0.0 && self.margin_fraction < 0.5) {
            return Err(Error::Param(format!(
                "margin_fraction must be in (0, 0.5), got {}",
                self.margin_fraction
            )));
        }
        if !(self.min_area_ratio > 0.0 && self.min_area_ratio <= 1.0) {
            return Err(Error::Param(format!(
                "min_area_ratio must be in (0, 1], got {}",
                self.min_area_ratio
            )));
        }
        Ok(())
    }
}

/// Local-mean adaptive threshold: a pixel turns foreground iff its value
/// exceeds the mean of the centered `window`x`window` neighborhood (clamped
/// at frame borders) by more than `offset`. The mean comes from an integral
/// image, so cost is O(1) per pixel regardless of window size.
pub fn adaptive_binarize(gray: &Frame, window: u32, offset: i32) -> Result<Frame> {
    if gray.channels() != 1 {
        return Err(Error::Contract(
            "adaptive_binarize requires a 1-channel frame".into(),
        ));
    }
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Param(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let data = gray.data();

    // integral[y][x] = sum over rect [0,y) x [0,x), dimensions (h+1) x (w+1)
    let mut integral = vec![0u64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0u64;
        for x in 0..w {
            row_sum += data[y * w + x] as u64;
            integral[(y + 1) * (w + 1) + (x + 1)] = integral[y * (w + 1) + (x + 1)] + row_sum;
        }
    }

    let r = (window / 2) as isize;
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let y0 = (y as isize - r).max(0) as usize;
        let y1 = ((y as isize + r + 1) as usize).min(h);
        for x in 0..w {
            let x0 = (x as isize - r).max(0) as usize;
            let x1 = ((x as isize + r + 1) as usize).min(w);
            let sum = integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
                - integral[y0 * (w + 1) + x1]
                - integral[y1 * (w + 1) + x0];
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            let mean = sum as f64 / count;
            if data[y * w + x] as f64 > mean + offset as f64 {
                out[y * w + x] = 255;
            }
        }
    }
    Ok(gray.with_data(out))
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind { parent: vec![0] } // slot 0 unused; labels start at 1
    }

    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // anchor on the smaller root so dense ids follow scan order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels 8-connected foreground components of a binary frame.
///
/// Returns the per-pixel label map (0 = background, labels dense `1..=n` in
/// scan order) and one [`Component`] per label.
pub fn label_components(binary: &Frame) -> Result<(Vec<u32>, Vec<Component>)> {
    if binary.channels() != 1 {
        return Err(Error::Contract(
            "label_components requires a 1-channel frame".into(),
        ));
    }
    if !binary.is_binary() {
        return Err(Error::Contract(
            "label_components requires values in {0, 255}".into(),
        ));
    }
    let (w, h) = (binary.width() as usize, binary.height() as usize);
    let data = binary.data();
    let fg = |x: isize, y: isize| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && data[y as usize * w + x as usize] == 255
    };

    let bw = w.div_ceil(2);
    let bh = h.div_ceil(2);
    let mut block_label = vec![0u32; bw * bh];
    let mut uf = UnionFind::new();

    // First pass over 2x2 blocks. Per block, pixels are
    //   a b
    //   c d
    // and only the facing rows/columns of the W, NW, N, NE neighbor blocks
    // can be 8-adjacent to them, which gives the merge tests below.
    for by in 0..bh {
        for bx in 0..bw {
            let x0 = (bx * 2) as isize;
            let y0 = (by * 2) as isize;
            let a = fg(x0, y0);
            let b = fg(x0 + 1, y0);
            let c = fg(x0, y0 + 1);
            let d = fg(x0 + 1, y0 + 1);
            if !(a || b || c || d) {
                continue;
            }
            let cur = uf.make_set();
            block_label[by * bw + bx] = cur;

            if by > 0 {
                let nc = fg(x0, y0 - 1);
                let nd = fg(x0 + 1, y0 - 1);
                let mut merged_n = false;
                if (a || b) && (nc || nd) {
                    uf.union(cur, block_label[(by - 1) * bw + bx]);
                    merged_n = true;
                }
                // NW connects only through the corner pair a ~ NW.d; when the
                // N merge used nc, N and NW are already equivalent, so the
                // extra union would be redundant.
                if a && !(merged_n && nc) && fg(x0 - 1, y0 - 1) {
                    let nw = block_label[(by - 1) * bw + (bx - 1)];
                    uf.union(cur, nw);
                }
                if b && !(merged_n && nd) && fg(x0 + 2, y0 - 1) && bx + 1 < bw {
                    let ne = block_label[(by - 1) * bw + (bx + 1)];
                    uf.union(cur, ne);
                }
            }
            if bx > 0 && (a || c) && (fg(x0 - 1, y0) || fg(x0 - 1, y0 + 1)) {
                uf.union(cur, block_label[by * bw + (bx - 1)]);
            }
        }
    }

    // Dense relabeling in block scan order.
    let mut dense = vec![0u32; uf.parent.len()];
    let mut next = 0u32;
    for by in 0..bh {
        for bx in 0..bw {
            let lbl = block_label[by * bw + bx];
            if lbl == 0 {
                continue;
            }
            let root = uf.find(lbl) as usize;
            if dense[root] == 0 {
                next += 1;
                dense[root] = next;
            }
        }
    }

    // Second pass: per-pixel labels and component statistics.
    let mut labels = vec![0u32; w * h];
    let mut stats: Vec<(u64, u32, u32, u32, u32)> =
        vec![(0, u32::MAX, 0, u32::MAX, 0); next as usize];
    for y in 0..h {
        for x in 0..w {
            if data[y * w + x] != 255 {
                continue;
            }
            let block = block_label[(y / 2) * bw + (x / 2)];
            let lbl = dense[uf.find(block) as usize];
            labels[y * w + x] = lbl;
            let s = &mut stats[(lbl - 1) as usize];
            s.0 += 1;
            s.1 = s.1.min(x as u32);
            s.2 = s.2.max(x as u32);
            s.3 = s.3.min(y as u32);
            s.4 = s.4.max(y as u32);
        }
    }

    let components = stats
        .iter()
        .enumerate()
        .map(|(i, &(area, min_x, max_x, min_y, max_y))| {
            let bbox = BoundingBox {
                x: min_x,
                y: min_y,
                w: max_x - min_x + 1,
                h: max_y - min_y + 1,
            };
            Component {
                label: i as u32 + 1,
                area,
                bbox,
                area_ratio: area as f64 / bbox.area() as f64,
            }
        })
        .collect();
    Ok((labels, components))
}

/// Applies the three candidate rules. A component survives iff
/// `min_area <= area <= max_area`, its bottom-most pixel row falls outside
/// both the top and bottom `margin_fraction` bands of the frame, and its
/// area ratio is at least `min_area_ratio`.
pub fn filter_candidates(
    components: &[Component],
    frame_height: u32,
    params: &CandidateFilterParams,
) -> Vec<Component> {
    let margin = params.margin_fraction * frame_height as f64;
    components
        .iter()
        .filter(|c| {
            let bottom = c.bbox.bottom_row() as f64;
            c.area >= params.min_area
                && c.area <= params.max_area
                && bottom >= margin
                && bottom < frame_height as f64 - margin
                && c.area_ratio >= params.min_area_ratio
        })
        .cloned()
        .collect()
}

/// Full candidate pipeline: grayscale, adaptive binarization, component
/// labeling, rule filter. Returns the surviving bounding boxes.
pub fn pedestrian_candidates(
    frame: &Frame,
    params: &CandidateFilterParams,
) -> Result<Vec<BoundingBox>> {
    params.validate()?;
    let gray = to_grayscale(frame);
    let binary = adaptive_binarize(&gray, params.adaptive_window, params.adaptive_offset)?;
    let (_, components) = label_components(&binary)?;
    Ok(filter_candidates(&components, frame.height(), params)
        .into_iter()
        .map(|c| c.bbox)
        .collect())
}
