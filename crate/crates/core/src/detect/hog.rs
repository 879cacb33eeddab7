//! Histogram-of-oriented-gradients descriptor.
//!
//! Gradients are centered [-1,0,1] differences with clamped borders,
//! orientations are unsigned (0-180 degrees) and split between the two
//! adjacent bins, cell histograms are magnitude-weighted, and 2x2-cell
//! blocks are L2-Hys normalized (L2, clip, re-L2) and concatenated
//! row-major.

use crate::error::{Error, Result};
use crate::frameio::Frame;

/// Canonical pedestrian configuration: 64x128 window, 8-px cells, 2x2-cell
/// blocks at 1-cell stride, 9 unsigned bins, clip 0.2. Descriptor length is
/// 7 * 15 * 4 * 9 = 3780.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogParams {
    pub window_w: u32,
    pub window_h: u32,
    pub cell: u32,
    pub block: u32,
    pub block_stride: u32,
    pub bins: usize,
    pub norm_clip: f64,
    pub epsilon: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            window_w: 64,
            window_h: 128,
            cell: 8,
            block: 2,
            block_stride: 1,
            bins: 9,
            norm_clip: 0.2,
            epsilon: 1e-6,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell == 0
            || !self.window_w.is_multiple_of(self.cell)
            || !self.window_h.is_multiple_of(self.cell)
        {
            return Err(Error::Param(format!(
                "window {}x{} must divide evenly into {}-px cells",
                self.window_w, self.window_h, self.cell
            )));
        }
        if self.block == 0 || self.block_stride == 0 {
            return Err(Error::Param(
                "block and block_stride must be positive".into(),
            ));
        }
        let cells_x = self.window_w / self.cell;
        let cells_y = self.window_h / self.cell;
        if cells_x < self.block || cells_y < self.block {
            return Err(Error::Param("window holds less than one block".into()));
        }
        if self.bins == 0 {
            return Err(Error::Param("bins must be positive".into()));
        }
        if !(self.norm_clip > 0.0 && self.epsilon > 0.0) {
            return Err(Error::Param(
                "norm_clip and epsilon must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn cells_per_window(&self) -> (usize, usize) {
        (
            (self.window_w / self.cell) as usize,
            (self.window_h / self.cell) as usize,
        )
    }

    pub fn blocks_per_window(&self) -> (usize, usize) {
        let (cx, cy) = self.cells_per_window();
        let b = self.block as usize;
        let s = self.block_stride as usize;
        ((cx - b) / s + 1, (cy - b) / s + 1)
    }

    pub fn block_len(&self) -> usize {
        (self.block * self.block) as usize * self.bins
    }

    pub fn descriptor_len(&self) -> usize {
        let (bx, by) = self.blocks_per_window();
        bx * by * self.block_len()
    }
}

/// Magnitude-weighted orientation histograms on a cell grid covering the
/// pixel rect `[x0, x0+cells_x*cell) x [y0, y0+cells_y*cell)` of `plane`.
/// Gradients see the whole plane (clamped at its borders), so a window cut
/// from a larger frame keeps its surrounding context.
#[allow(clippy::too_many_arguments)]
pub(crate) fn cell_histograms_rect(
    plane: &[f64],
    w: usize,
    h: usize,
    x0: usize,
    y0: usize,
    cells_x: usize,
    cells_y: usize,
    params: &HogParams,
) -> Vec<f64> {
    let cell = params.cell as usize;
    let bins = params.bins;
    let bin_width = 180.0 / bins as f64;
    let mut hist = vec![0.0f64; cells_x * cells_y * bins];

    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let base = (cy * cells_x + cx) * bins;
            for py in 0..cell {
                let y = y0 + cy * cell + py;
                for px in 0..cell {
                    let x = x0 + cx * cell + px;
                    let xm = x.saturating_sub(1);
                    let xp = (x + 1).min(w - 1);
                    let ym = y.saturating_sub(1);
                    let yp = (y + 1).min(h - 1);
                    let gx = plane[y * w + xp] - plane[y * w + xm];
                    let gy = plane[yp * w + x] - plane[ym * w + x];
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    let mut angle = gy.atan2(gx).to_degrees();
                    if angle < 0.0 {
                        angle += 180.0;
                    }
                    let t = angle / bin_width;
                    let i0 = (t.floor() as usize) % bins;
                    let frac = t - t.floor();
                    hist[base + i0] += mag * (1.0 - frac);
                    hist[base + (i0 + 1) % bins] += mag * frac;
                }
            }
        }
    }
    hist
}

/// L2-Hys normalization in place: L2 (with epsilon), clip at `norm_clip`,
/// L2 again.
pub(crate) fn l2_hys(block: &mut [f64], params: &HogParams) {
    let eps2 = params.epsilon * params.epsilon;
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
    for v in block.iter_mut() {
        *v = (*v / norm).min(params.norm_clip);
    }
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
    for v in block.iter_mut() {
        *v /= norm;
    }
}

/// Assembles the window descriptor from a cell-histogram grid: blocks
/// row-major, cells row-major within a block, bins innermost.
pub(crate) fn blocks_from_cells(
    cells: &[f64],
    cells_x: usize,
    cells_y: usize,
    params: &HogParams,
) -> Vec<f64> {
    let b = params.block as usize;
    let s = params.block_stride as usize;
    let bins = params.bins;
    let blocks_x = (cells_x - b) / s + 1;
    let blocks_y = (cells_y - b) / s + 1;
    let mut out = Vec::with_capacity(blocks_x * blocks_y * params.block_len());
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            let start = out.len();
            for cy in 0..b {
                for cx in 0..b {
                    let cell = ((by * s + cy) * cells_x + bx * s + cx) * bins;
                    out.extend_from_slice(&cells[cell..cell + bins]);
                }
            }
            l2_hys(&mut out[start..], params);
        }
    }
    out
}

/// Descriptor of a window-sized grayscale frame.
pub fn hog_descriptor(window: &Frame, params: &HogParams) -> Result<Vec<f64>> {
    params.validate()?;
    if window.channels() != 1 {
        return Err(Error::Contract(
            "hog_descriptor requires a 1-channel frame".into(),
        ));
    }
    if window.width() != params.window_w || window.height() != params.window_h {
        return Err(Error::Contract(format!(
            "window must be exactly {}x{}, got {}x{}",
            params.window_w,
            params.window_h,
            window.width(),
            window.height()
        )));
    }
    let (w, h) = (window.width() as usize, window.height() as usize);
    let plane: Vec<f64> = window.data().iter().map(|&v| v as f64).collect();
    let (cells_x, cells_y) = params.cells_per_window();
    let cells = cell_histograms_rect(&plane, w, h, 0, 0, cells_x, cells_y, params);
    Ok(blocks_from_cells(&cells, cells_x, cells_y, params))
}
