//! Canny edge extraction: Gaussian smoothing, Sobel gradients, non-maximal
//! suppression quantized to four directions, and dual-threshold hysteresis.
//!
//! This sits in the fast tier of the throughput table, so the pipeline is
//! integer fixed-point end to end: an 8-bit-weight Gaussian, u8 Sobel with
//! squared u32 magnitudes (no square roots), and suppression that touches
//! only pixels the hysteresis thresholds could ever keep.

use super::gaussian_kernel;
use crate::error::{Error, Result};
use crate::frameio::Frame;

/// Smoothing width and hysteresis thresholds. Thresholds apply to the raw
/// Sobel gradient magnitude of the smoothed image (a full-contrast step edge
/// peaks above 1000).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            sigma: 1.0,
            low: 40.0,
            high: 120.0,
        }
    }
}

pub fn canny(gray: &Frame, params: &CannyParams) -> Result<Frame> {
    if gray.channels() != 1 {
        return Err(Error::Contract("canny requires a 1-channel frame".into()));
    }
    if !(params.sigma > 0.0 && params.sigma.is_finite()) {
        return Err(Error::Param(format!(
            "sigma must be positive, got {}",
            params.sigma
        )));
    }
    if !(params.low >= 0.0 && params.low < params.high) {
        return Err(Error::Param(format!(
            "thresholds must satisfy 0 <= low < high, got low={} high={}",
            params.low, params.high
        )));
    }

    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let blurred = blur_u8(gray.data(), w, h, params.sigma);
    // An integer magnitude² m passes a real threshold t² iff m >= ceil(t²).
    let low2 = square_threshold(params.low);
    let high2 = square_threshold(params.high);
    let (thin, seeds) = suppress_non_maxima(&blurred, w, h, low2, high2);
    Ok(gray.with_data(hysteresis(&thin, &seeds, w, h, low2)))
}

fn square_threshold(t: f64) -> u32 {
    (t * t).ceil().clamp(0.0, u32::MAX as f64) as u32
}

/// Gaussian kernel quantized to integer weights summing exactly to 256.
/// The rounding residual is spread center-outward in symmetric pairs so
/// the kernel stays symmetric for every sigma.
fn fixed_point_kernel(sigma: f64) -> Vec<u32> {
    let kernel = gaussian_kernel(sigma);
    let mut fixed: Vec<i32> = kernel.iter().map(|&k| (k * 256.0).round() as i32).collect();
    let c = fixed.len() / 2;
    let mut residual = 256 - fixed.iter().sum::<i32>();
    if residual % 2 != 0 {
        let sign = residual.signum();
        fixed[c] += sign;
        residual -= sign;
    }
    let mut d = 1;
    while residual != 0 && d <= c {
        let sign = residual.signum();
        if sign > 0 || (fixed[c - d] > 0 && fixed[c + d] > 0) {
            fixed[c - d] += sign;
            fixed[c + d] += sign;
            residual -= 2 * sign;
        }
        d += 1;
    }
    fixed[c] += residual; // whatever is left lands on the center
    debug_assert!(fixed[c] >= 1);
    fixed.iter().map(|&k| k.max(0) as u32).collect()
}

/// Separable 8-bit fixed-point Gaussian blur, clamp-to-edge borders.
/// Each pass multiplies u8 samples by 8-bit kernel weights in u16 lanes
/// (products cap at 255 * 256 = 65280) and rounds back to u8, so both
/// passes run sixteen SIMD lanes wide. Common kernel widths get
/// monomorphized loops.
fn blur_u8(data: &[u8], w: usize, h: usize, sigma: f64) -> Vec<u8> {
    let kernel = fixed_point_kernel(sigma);
    match kernel.len() {
        3 => blur_fixed::<3>(data, w, h, &kernel),
        5 => blur_fixed::<5>(data, w, h, &kernel),
        7 => blur_fixed::<7>(data, w, h, &kernel),
        9 => blur_fixed::<9>(data, w, h, &kernel),
        13 => blur_fixed::<13>(data, w, h, &kernel),
        19 => blur_fixed::<19>(data, w, h, &kernel),
        _ => blur_any(data, w, h, &kernel),
    }
}

fn blur_fixed<const N: usize>(data: &[u8], w: usize, h: usize, kernel_slice: &[u32]) -> Vec<u8> {
    let mut kernel = [0u16; N];
    for (slot, &k) in kernel.iter_mut().zip(kernel_slice) {
        *slot = k as u16;
    }
    let r = N / 2;

    let mut hpass = vec![0u8; w * h];
    let mut acc = vec![0u16; w];
    for y in 0..h {
        let src = &data[y * w..y * w + w];
        let dst = &mut hpass[y * w..y * w + w];
        if w > 2 * r {
            for (x, slot) in dst.iter_mut().enumerate().take(r) {
                *slot = clamped_tap(src, w, x, &kernel, r);
            }
            // Interior as tap-wise accumulation over shifted slices; each
            // tap is a straight u16 multiply-add stream.
            let interior = w - N + 1;
            acc[..interior].fill(0);
            for (i, &k) in kernel.iter().enumerate() {
                let shifted = &src[i..i + interior];
                for (a, &s) in acc[..interior].iter_mut().zip(shifted) {
                    *a += k * s as u16;
                }
            }
            for (slot, &a) in dst[r..r + interior].iter_mut().zip(&acc[..interior]) {
                *slot = ((a + 128) >> 8) as u8;
            }
            for (x, slot) in dst.iter_mut().enumerate().skip(w - r) {
                *slot = clamped_tap(src, w, x, &kernel, r);
            }
        } else {
            for (x, slot) in dst.iter_mut().enumerate() {
                *slot = clamped_tap(src, w, x, &kernel, r);
            }
        }
    }
    blur_vertical(&hpass, w, h, &kernel)
}

fn blur_any(data: &[u8], w: usize, h: usize, kernel_u32: &[u32]) -> Vec<u8> {
    let kernel: Vec<u16> = kernel_u32.iter().map(|&k| k as u16).collect();
    let r = kernel.len() / 2;
    let mut hpass = vec![0u8; w * h];
    for y in 0..h {
        let src = &data[y * w..y * w + w];
        let dst = &mut hpass[y * w..y * w + w];
        for (x, slot) in dst.iter_mut().enumerate() {
            *slot = clamped_tap(src, w, x, &kernel, r);
        }
    }
    blur_vertical(&hpass, w, h, &kernel)
}

/// Vertical pass: u16 tap accumulation streaming whole rows, rounded back
/// to u8.
fn blur_vertical(hpass: &[u8], w: usize, h: usize, kernel: &[u16]) -> Vec<u8> {
    let r = kernel.len() / 2;
    let mut acc = vec![0u16; w];
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        acc.fill(0);
        for (j, &k) in kernel.iter().enumerate() {
            let yj = (y as isize + j as isize - r as isize).clamp(0, h as isize - 1) as usize;
            let src = &hpass[yj * w..yj * w + w];
            for (a, &s) in acc.iter_mut().zip(src) {
                *a += k * s as u16;
            }
        }
        for (o, &a) in out[y * w..y * w + w].iter_mut().zip(acc.iter()) {
            *o = ((a + 128) >> 8) as u8;
        }
    }
    out
}

fn clamped_tap(src: &[u8], w: usize, x: usize, kernel: &[u16], r: usize) -> u8 {
    let mut acc = 0u16;
    for (i, &k) in kernel.iter().enumerate() {
        let xi = (x as isize + i as isize - r as isize).clamp(0, w as isize - 1);
        acc += k * src[xi as usize] as u16;
    }
    ((acc + 128) >> 8) as u8
}

#[inline]
fn sobel_at(plane: &[u8], w: usize, h: usize, x: usize, y: usize) -> (i32, i32) {
    let xm = x.saturating_sub(1);
    let xp = (x + 1).min(w - 1);
    let ym = y.saturating_sub(1);
    let yp = (y + 1).min(h - 1);
    let top = &plane[ym * w..ym * w + w];
    let mid = &plane[y * w..y * w + w];
    let bot = &plane[yp * w..yp * w + w];
    let gx = (top[xp] as i32 + 2 * mid[xp] as i32 + bot[xp] as i32)
        - (top[xm] as i32 + 2 * mid[xm] as i32 + bot[xm] as i32);
    let gy = (bot[xm] as i32 + 2 * bot[x] as i32 + bot[xp] as i32)
        - (top[xm] as i32 + 2 * top[x] as i32 + top[xp] as i32);
    (gx, gy)
}

/// One row of 3x3 Sobel output: gradients (i16, bounded by ±4*255) and the
/// squared magnitude (u32, at most 2 * 1020²).
fn sobel_row(
    plane: &[u8],
    w: usize,
    h: usize,
    y: usize,
    mag2: &mut [u32],
    gx: &mut [i16],
    gy: &mut [i16],
) {
    let ym = y.saturating_sub(1);
    let yp = (y + 1).min(h - 1);
    let top = &plane[ym * w..ym * w + w];
    let mid = &plane[y * w..y * w + w];
    let bot = &plane[yp * w..yp * w + w];
    if w >= 2 {
        for x in [0, w - 1] {
            let (vx, vy) = sobel_at(plane, w, h, x, y);
            mag2[x] = (vx * vx + vy * vy) as u32;
            gx[x] = vx as i16;
            gy[x] = vy as i16;
        }
        for x in 1..w - 1 {
            let vx = (top[x + 1] as i32 + 2 * mid[x + 1] as i32 + bot[x + 1] as i32)
                - (top[x - 1] as i32 + 2 * mid[x - 1] as i32 + bot[x - 1] as i32);
            let vy = (bot[x - 1] as i32 + 2 * bot[x] as i32 + bot[x + 1] as i32)
                - (top[x - 1] as i32 + 2 * top[x] as i32 + top[x + 1] as i32);
            mag2[x] = (vx * vx + vy * vy) as u32;
            gx[x] = vx as i16;
            gy[x] = vy as i16;
        }
    } else {
        let (vx, vy) = sobel_at(plane, w, h, 0, y);
        mag2[0] = (vx * vx + vy * vy) as u32;
        gx[0] = vx as i16;
        gy[0] = vy as i16;
    }
}

/// Gradient direction quantized to one of four axes, as the forward
/// neighbor offset. Integer ratio test against tan(22.5°) ≈ 53/128.
#[inline]
fn quantized_offset(gx: i32, gy: i32) -> (isize, isize) {
    let ax = gx.abs();
    let ay = gy.abs();
    if 128 * ay <= 53 * ax {
        (1, 0) // mostly horizontal gradient
    } else if 128 * ax <= 53 * ay {
        (0, 1) // mostly vertical
    } else if (gx > 0) == (gy > 0) {
        (1, 1) // descending diagonal
    } else {
        (1, -1) // ascending diagonal
    }
}

/// Fused Sobel + non-maximal suppression over a three-row rolling window,
/// so no full gradient planes are materialized. A pixel survives when its
/// squared magnitude strictly beats the forward neighbor along the
/// quantized gradient axis and at least ties the backward one; the
/// asymmetry keeps exactly one pixel of a two-wide tie.
///
/// Pixels below `low2` are skipped outright: hysteresis can never keep
/// them, and the survival test never reads `thin` values of neighbors, so
/// the output is unchanged. Strong survivors are collected as hysteresis
/// seeds on the way.
fn suppress_non_maxima(
    plane: &[u8],
    w: usize,
    h: usize,
    low2: u32,
    high2: u32,
) -> (Vec<u32>, Vec<usize>) {
    let mut thin = vec![0u32; w * h];
    let mut seeds = Vec::new();

    // ring[r] holds Sobel output for one row; row y lives in ring[y % 3]
    let mut ring_mag: [Vec<u32>; 3] = [vec![0; w], vec![0; w], vec![0; w]];
    let mut ring_gx: [Vec<i16>; 3] = [vec![0; w], vec![0; w], vec![0; w]];
    let mut ring_gy: [Vec<i16>; 3] = [vec![0; w], vec![0; w], vec![0; w]];
    for y in 0..2.min(h) {
        sobel_row(
            plane,
            w,
            h,
            y,
            &mut ring_mag[y],
            &mut ring_gx[y],
            &mut ring_gy[y],
        );
    }

    for y in 0..h {
        if y + 1 < h && y > 0 {
            let slot = (y + 1) % 3;
            let (mut m, mut gx, mut gy) = (
                std::mem::take(&mut ring_mag[slot]),
                std::mem::take(&mut ring_gx[slot]),
                std::mem::take(&mut ring_gy[slot]),
            );
            sobel_row(plane, w, h, y + 1, &mut m, &mut gx, &mut gy);
            ring_mag[slot] = m;
            ring_gx[slot] = gx;
            ring_gy[slot] = gy;
        }
        let above: &[u32] = if y > 0 { &ring_mag[(y - 1) % 3] } else { &[] };
        let below: &[u32] = if y + 1 < h {
            &ring_mag[(y + 1) % 3]
        } else {
            &[]
        };
        let cur_mag = &ring_mag[y % 3];
        let cur_gx = &ring_gx[y % 3];
        let cur_gy = &ring_gy[y % 3];

        let mag_at = |row: &[u32], x: isize| -> u32 {
            if row.is_empty() || x < 0 || x >= w as isize {
                0 // outside the frame counts as zero, so border maxima survive
            } else {
                row[x as usize]
            }
        };
        for (x, &m) in cur_mag.iter().enumerate() {
            if m < low2 || m == 0 {
                continue;
            }
            let (dx, dy) = quantized_offset(cur_gx[x] as i32, cur_gy[x] as i32);
            let (frow, brow): (&[u32], &[u32]) = match dy {
                0 => (cur_mag, cur_mag),
                1 => (below, above),
                _ => (above, below),
            };
            let forward = mag_at(frow, x as isize + dx);
            let backward = mag_at(brow, x as isize - dx);
            if m > forward && m >= backward {
                thin[y * w + x] = m;
                if m >= high2 {
                    seeds.push(y * w + x);
                }
            }
        }
    }
    (thin, seeds)
}

/// Dual-threshold edge tracking: strong pixels (the precollected `seeds`,
/// at or above the high threshold) start a traversal that keeps every
/// pixel at or above `low` that is 8-connected (transitively) to a strong
/// one. Thresholds arrive squared.
fn hysteresis(thin: &[u32], seeds: &[usize], w: usize, h: usize, low2: u32) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for &i in seeds {
        if thin[i] > 0 && out[i] == 0 {
            out[i] = 255;
            stack.push(i);
            while let Some(p) = stack.pop() {
                let (px, py) = (p % w, p / w);
                if px > 0 && px < w - 1 && py > 0 && py < h - 1 {
                    // interior: all eight neighbors exist
                    for off in [
                        p - w - 1,
                        p - w,
                        p - w + 1,
                        p - 1,
                        p + 1,
                        p + w - 1,
                        p + w,
                        p + w + 1,
                    ] {
                        if out[off] == 0 && thin[off] >= low2 && thin[off] > 0 {
                            out[off] = 255;
                            stack.push(off);
                        }
                    }
                } else {
                    for dy in -1..=1isize {
                        for dx in -1..=1isize {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let (nx, ny) = (px as isize + dx, py as isize + dy);
                            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                                continue;
                            }
                            let n = ny as usize * w + nx as usize;
                            if out[n] == 0 && thin[n] >= low2 && thin[n] > 0 {
                                out[n] = 255;
                                stack.push(n);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical_step(w: u32, h: u32, step_col: u32) -> Frame {
        let data = (0..h)
            .flat_map(|_| (0..w).map(move |x| if x >= step_col { 255u8 } else { 0 }))
            .collect();
        Frame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn constant_image_has_no_edges() {
        let f = Frame::filled_gray(16, 16, 80);
        let out = canny(&f, &CannyParams::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn blur_preserves_constant_input() {
        let out = blur_u8(&vec![91u8; 24 * 24], 24, 24, 1.7);
        assert!(out.iter().all(|&v| v == 91));
    }

    #[test]
    fn fixed_kernel_is_symmetric_and_sums_to_256() {
        for sigma in [0.3, 0.5, 1.0, 2.0, 3.7, 6.0, 11.0] {
            let k = fixed_point_kernel(sigma);
            assert_eq!(k.iter().sum::<u32>(), 256, "sigma {sigma}");
            for i in 0..k.len() / 2 {
                assert_eq!(k[i], k[k.len() - 1 - i], "sigma {sigma}");
            }
        }
    }

    #[test]
    fn step_edge_is_single_column_at_the_step() {
        let f = vertical_step(32, 32, 16);
        let out = canny(
            &f,
            &CannyParams {
                sigma: 1.0,
                low: 20.0,
                high: 60.0,
            },
        )
        .unwrap();
        let mut edge_cols = std::collections::BTreeSet::new();
        for y in 0..32 {
            let row_edges: Vec<u32> = (0..32).filter(|&x| out.gray_at(x, y) == 255).collect();
            assert_eq!(
                row_edges.len(),
                1,
                "row {y} must hold exactly one edge pixel"
            );
            edge_cols.insert(row_edges[0]);
        }
        assert_eq!(edge_cols.len(), 1, "edge must be one straight column");
        let col = *edge_cols.iter().next().unwrap();
        // The ideal edge lies between columns 15 and 16; NMS keeps one of
        // the two columns flanking it.
        assert!(col == 15 || col == 16, "edge at column {col}");
    }

    #[test]
    fn nms_leaves_no_thick_runs_across_the_gradient() {
        let step = vertical_step(32, 32, 10);
        let ramp_data: Vec<u8> = (0..32u32)
            .flat_map(|_| (0..32u32).map(|x| (x * 8) as u8))
            .collect();
        let ramp = Frame::new(32, 32, 1, ramp_data).unwrap();
        for f in [step, ramp] {
            let out = canny(
                &f,
                &CannyParams {
                    sigma: 1.4,
                    low: 10.0,
                    high: 30.0,
                },
            )
            .unwrap();
            for y in 0..32 {
                for x in 0..30 {
                    let run = (0..3).all(|d| out.gray_at(x + d, y) == 255);
                    assert!(!run, "3-wide horizontal edge run at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn raising_high_never_adds_edges() {
        // Structured test image: two blobs on a ramp.
        let (w, h) = (48u32, 48u32);
        let mut data = vec![0u8; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut v = (x * 3) as i32;
                if (8..20).contains(&x) && (8..20).contains(&y) {
                    v += 140;
                }
                if (28..40).contains(&x) && (24..44).contains(&y) {
                    v += 90;
                }
                data[(y * w + x) as usize] = v.min(255) as u8;
            }
        }
        let f = Frame::new(w, h, 1, data).unwrap();
        let mut prev: Option<Vec<u8>> = None;
        for high in [60.0, 120.0, 200.0, 400.0] {
            let out = canny(
                &f,
                &CannyParams {
                    sigma: 1.0,
                    low: 30.0,
                    high,
                },
            )
            .unwrap();
            if let Some(prev) = &prev {
                for (i, (&now, &was)) in out.data().iter().zip(prev).enumerate() {
                    assert!(now <= was, "raising high added an edge pixel at index {i}");
                }
            }
            prev = Some(out.data().to_vec());
        }
    }

    #[test]
    fn lazy_nms_matches_exhaustive_nms() {
        // The low2 skip must not change any pixel hysteresis could keep:
        // run suppression with and without the skip on a busy image and
        // compare everywhere at or above low².
        let (w, h) = (64usize, 64usize);
        let mut state = 3u64;
        let data: Vec<u8> = (0..w * h)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 56) as u8
            })
            .collect();
        let blurred = blur_u8(&data, w, h, 1.0);
        let low2 = square_threshold(40.0);
        let high2 = square_threshold(120.0);
        let (lazy, lazy_seeds) = suppress_non_maxima(&blurred, w, h, low2, high2);
        let (full, full_seeds) = suppress_non_maxima(&blurred, w, h, 0, high2);
        for i in 0..w * h {
            if full[i] >= low2 || lazy[i] >= low2 {
                assert_eq!(lazy[i], full[i], "divergence at index {i}");
            }
        }
        assert_eq!(lazy_seeds, full_seeds, "seed sets must agree");
    }

    #[test]
    fn weak_segment_kept_only_when_touching_strong() {
        // Handcrafted 7x7 post-NMS magnitude field, evaluated by hand with
        // low=20, high=60 (stored and compared squared):
        //   (1,1)=100 strong seed
        //   (2,1)=30  weak, 8-adjacent to the seed        -> retained
        //   (3,2)=30  weak, 8-adjacent to the weak above  -> retained
        //   (5,5)=30  weak, isolated                      -> dropped
        let w = 7usize;
        let at = |x: usize, y: usize| y * w + x;
        let mut thin = vec![0u32; w * w];
        thin[at(1, 1)] = 100 * 100;
        thin[at(2, 1)] = 30 * 30;
        thin[at(3, 2)] = 30 * 30;
        thin[at(5, 5)] = 30 * 30;
        let seeds: Vec<usize> = (0..w * w).filter(|&i| thin[i] >= 60 * 60).collect();
        assert_eq!(seeds, vec![at(1, 1)]);

        let out = hysteresis(&thin, &seeds, w, w, 20 * 20);
        assert_eq!(out[at(1, 1)], 255);
        assert_eq!(out[at(2, 1)], 255);
        assert_eq!(out[at(3, 2)], 255);
        assert_eq!(out[at(5, 5)], 0, "isolated weak segment must be dropped");
        assert_eq!(out.iter().filter(|&&v| v == 255).count(), 3);
    }

    #[test]
    fn hysteresis_without_strong_seed_keeps_nothing() {
        let w = 5usize;
        let mut thin = vec![0u32; w * w];
        thin[6..9].fill(45 * 45); // all weak
        let seeds: Vec<usize> = (0..w * w).filter(|&i| thin[i] >= 60 * 60).collect();
        let out = hysteresis(&thin, &seeds, w, w, 20 * 20);
        assert!(out.iter().all(|&v| v == 0));
    }

    #[test]
    fn rejects_inverted_thresholds() {
        let f = Frame::filled_gray(8, 8, 0);
        let err = canny(
            &f,
            &CannyParams {
                sigma: 1.0,
                low: 60.0,
                high: 20.0,
            },
        );
        assert!(matches!(err, Err(Error::Param(_))));
    }
}
