//! Structural and temporal cues: Canny edges, Harris corners, and
//! Gaussian-mixture background subtraction with optional shadow labeling.
//!
//! Convolution border handling is clamp-to-edge everywhere, so frame borders
//! do not manufacture spurious edges.

mod canny;
mod gmm;
mod harris;

pub use canny::{canny, CannyParams};
pub use gmm::{gmm_init, BackgroundModel, GmmParams, SHADOW_LABEL};
pub use harris::{harris, HarrisParams};

/// Separable Gaussian kernel with radius `ceil(3*sigma)`, normalized to
/// sum 1.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        kernel.push((-0.5 * d * d / (sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    kernel
}

/// Separable Gaussian blur on an f64 plane, clamp-to-edge borders.
pub(crate) fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let xi = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                acc += k * row[xi as usize];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let yi = (y as isize + i as isize - radius as isize).clamp(0, h as isize - 1);
                acc += k * tmp[yi as usize * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// 3x3 Sobel gradients of an f64 plane, clamp-to-edge borders.
/// Returns (gx, gy).
pub(crate) fn sobel(src: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let at = |x: isize, y: isize| -> f64 {
        let xi = x.clamp(0, w as isize - 1) as usize;
        let yi = y.clamp(0, h as isize - 1) as usize;
        src[yi * w + xi]
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let tl = at(x - 1, y - 1);
            let tc = at(x, y - 1);
            let tr = at(x + 1, y - 1);
            let ml = at(x - 1, y);
            let mr = at(x + 1, y);
            let bl = at(x - 1, y + 1);
            let bc = at(x, y + 1);
            let br = at(x + 1, y + 1);
            let i = y as usize * w + x as usize;
            gx[i] = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            gy[i] = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
        }
    }
    (gx, gy)
}
