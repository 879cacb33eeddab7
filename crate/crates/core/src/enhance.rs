//! Per-frame photometric enhancement: gamma correction, global histogram
//! equalization, CLAHE, and binary thresholding.
//!
//! All four operations are 256-entry-LUT point remaps (CLAHE per tile), which
//! is what keeps them in the high-FPS tier of the benchmark harness.

use crate::error::{Error, Result};
use crate::frameio::Frame;

/// Power-law exponent. The mapping applied is `v_out = v_in^(1/gamma)` on
/// luminance normalized to [0,1]: gamma > 1 lightens, gamma < 1 darkens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub gamma: f64,
}

impl GammaParams {
    pub fn new(gamma: f64) -> Result<GammaParams> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Param(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(GammaParams { gamma })
    }
}

/// CLAHE tile grid and clip factor. `clip_limit` is a multiple of the uniform
/// bin height (tile pixels / 256); a non-finite value disables clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheParams {
    pub tiles_x: u32,
    pub tiles_y: u32,
    pub clip_limit: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        ClaheParams {
            tiles_x: 8,
            tiles_y: 8,
            clip_limit: 2.0,
        }
    }
}

impl ClaheParams {
    pub fn new(tiles_x: u32, tiles_y: u32, clip_limit: f64) -> Result<ClaheParams> {
        if tiles_x == 0 || tiles_y == 0 {
            return Err(Error::Param("tile counts must be at least 1".into()));
        }
        if clip_limit.is_nan() || clip_limit < 1.0 {
            return Err(Error::Param(format!(
                "clip_limit must be >= 1.0, got {clip_limit}"
            )));
        }
        Ok(ClaheParams {
            tiles_x,
            tiles_y,
            clip_limit,
        })
    }
}

/// Applies the power-law LUT `round(255 * (v/255)^(1/gamma))` to every
/// sample; RGB frames are remapped per channel. 0 and 255 are fixed points
/// for every gamma.
pub fn gamma_correct(frame: &Frame, params: &GammaParams) -> Result<Frame> {
    let lut = gamma_lut(params)?;
    let data = frame.data().iter().map(|&v| lut[v as usize]).collect();
    Ok(frame.with_data(data))
}

/// The 256-entry table behind [`gamma_correct`].
pub fn gamma_lut(params: &GammaParams) -> Result<[u8; 256]> {
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::Param(format!(
            "gamma must be positive and finite, got {}",
            params.gamma
        )));
    }
    let inv = 1.0 / params.gamma;
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = (255.0 * (v as f64 / 255.0).powf(inv)).round() as u8;
    }
    Ok(lut)
}

/// Global histogram equalization on a grayscale frame.
///
/// Mapping: `v -> round((cdf(v) - cdf_min) / (N - cdf_min) * 255)` with
/// `cdf_min` the smallest nonzero CDF value. A single-gray-level image is
/// returned unchanged (the formula's denominator would be zero, and any
/// constant image is already equalized).
pub fn hist_equalize(gray: &Frame) -> Result<Frame> {
    require_gray(gray, "hist_equalize")?;
    let hist = histogram(gray.data());
    match equalization_lut(&hist, gray.data().len() as u64) {
        None => Ok(gray.clone()),
        Some(lut) => {
            let data = gray.data().iter().map(|&v| lut[v as usize]).collect();
            Ok(gray.with_data(data))
        }
    }
}

/// Contrast-limited adaptive histogram equalization.
///
/// Per-tile histograms are clipped at `clip_limit * tile_pixels / 256`, the
/// clipped mass is redistributed uniformly (one pass, remainder dropped), and
/// each pixel is remapped by bilinear interpolation between the mappings of
/// the nearest tile centers. With a 1x1 grid and no clipping this reduces to
/// [`hist_equalize`] exactly.
pub fn clahe(gray: &Frame, params: &ClaheParams) -> Result<Frame> {
    require_gray(gray, "clahe")?;
    let (w, h) = (gray.width(), gray.height());
    let (tx, ty) = (params.tiles_x, params.tiles_y);
    if tx == 0 || ty == 0 {
        return Err(Error::Param("tile counts must be at least 1".into()));
    }
    if tx > w || ty > h {
        return Err(Error::Param(format!(
            "tile grid {tx}x{ty} exceeds frame dimensions {w}x{h}"
        )));
    }

    // Tile column/row boundaries by even integer division; every pixel
    // belongs to exactly one tile.
    let col_bounds: Vec<(u32, u32)> = (0..tx).map(|i| (i * w / tx, (i + 1) * w / tx)).collect();
    let row_bounds: Vec<(u32, u32)> = (0..ty).map(|j| (j * h / ty, (j + 1) * h / ty)).collect();

    // Per-tile equalization LUTs. A degenerate tile maps to identity.
    let mut luts = vec![[0u8; 256]; tx as usize * ty as usize];
    for (j, &(y0, y1)) in row_bounds.iter().enumerate() {
        for (i, &(x0, x1)) in col_bounds.iter().enumerate() {
            let mut hist = [0u64; 256];
            for y in y0..y1 {
                let row = &gray.data()[(y * w) as usize..((y + 1) * w) as usize];
                for &v in &row[x0 as usize..x1 as usize] {
                    hist[v as usize] += 1;
                }
            }
            let tile_px = (x1 - x0) as u64 * (y1 - y0) as u64;
            let total = clip_histogram(&mut hist, tile_px, params.clip_limit);
            luts[j * tx as usize + i] = match equalization_lut(&hist, total) {
                Some(lut) => lut,
                None => identity_lut(),
            };
        }
    }

    let col_centers: Vec<f64> = col_bounds
        .iter()
        .map(|&(a, b)| (a + b - 1) as f64 / 2.0)
        .collect();
    let row_centers: Vec<f64> = row_bounds
        .iter()
        .map(|&(a, b)| (a + b - 1) as f64 / 2.0)
        .collect();
    let col_blend: Vec<(usize, usize, f64)> = (0..w)
        .map(|x| neighbor_blend(&col_centers, x as f64))
        .collect();
    let row_blend: Vec<(usize, usize, f64)> = (0..h)
        .map(|y| neighbor_blend(&row_centers, y as f64))
        .collect();

    let mut data = vec![0u8; gray.data().len()];
    for y in 0..h as usize {
        let (j0, j1, fy) = row_blend[y];
        let src_row = &gray.data()[y * w as usize..(y + 1) * w as usize];
        let dst_row = &mut data[y * w as usize..(y + 1) * w as usize];
        for x in 0..w as usize {
            let (i0, i1, fx) = col_blend[x];
            let v = src_row[x] as usize;
            dst_row[x] = if i0 == i1 && j0 == j1 {
                // Single contributing tile: take its mapping verbatim so the
                // 1x1-grid case reduces to global HE bit-exactly.
                luts[j0 * tx as usize + i0][v]
            } else {
                let tl = luts[j0 * tx as usize + i0][v] as f64;
                let tr = luts[j0 * tx as usize + i1][v] as f64;
                let bl = luts[j1 * tx as usize + i0][v] as f64;
                let br = luts[j1 * tx as usize + i1][v] as f64;
                let top = tl * (1.0 - fx) + tr * fx;
                let bottom = bl * (1.0 - fx) + br * fx;
                (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
            };
        }
    }
    Ok(gray.with_data(data))
}

/// `v >= t` -> 255, else 0.
pub fn binary_threshold(gray: &Frame, t: u8) -> Result<Frame> {
    require_gray(gray, "binary_threshold")?;
    let data = gray
        .data()
        .iter()
        .map(|&v| if v >= t { 255 } else { 0 })
        .collect();
    Ok(gray.with_data(data))
}

fn require_gray(frame: &Frame, op: &str) -> Result<()> {
    if frame.channels() != 1 {
        return Err(Error::Contract(format!(
            "{op} requires a 1-channel frame, got {} channels",
            frame.channels()
        )));
    }
    Ok(())
}

pub(crate) fn histogram(data: &[u8]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in data {
        hist[v as usize] += 1;
    }
    hist
}

/// Clips bins at `clip_limit * pixels / 256` and redistributes the excess
/// uniformly. Returns the histogram's new total mass (the dropped remainder
/// makes it slightly less than `pixels`). Non-finite clip disables clipping.
fn clip_histogram(hist: &mut [u64; 256], pixels: u64, clip_limit: f64) -> u64 {
    if !clip_limit.is_finite() {
        return pixels;
    }
    let limit = ((clip_limit * pixels as f64 / 256.0).floor() as u64).max(1);
    let mut clipped: u64 = 0;
    for bin in hist.iter_mut() {
        if *bin > limit {
            clipped += *bin - limit;
            *bin = limit;
        }
    }
    if clipped == 0 {
        return pixels;
    }
    let share = clipped / 256;
    if share > 0 {
        for bin in hist.iter_mut() {
            *bin += share;
        }
    }
    pixels - (clipped % 256)
}

/// Equalization mapping for a histogram with `total` mass. `None` means the
/// degenerate single-level case (callers decide between identity and
/// returning the input unchanged).
fn equalization_lut(hist: &[u64; 256], total: u64) -> Option<[u8; 256]> {
    let mut cdf = [0u64; 256];
    let mut acc = 0u64;
    let mut cdf_min = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        acc += count;
        cdf[v] = acc;
        if cdf_min == 0 && acc > 0 {
            cdf_min = acc;
        }
    }
    if total == 0 || cdf_min == total {
        return None;
    }
    let denom = (total - cdf_min) as f64;
    let mut lut = [0u8; 256];
    for v in 0..256 {
        let num = cdf[v] as f64 - cdf_min as f64;
        lut[v] = (num / denom * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    Some(lut)
}

/// For a coordinate between tile centers, the bracketing tile indices and
/// the blend fraction toward the second one. Positions outside the center
/// span collapse to the nearest tile (no extrapolation).
fn neighbor_blend(centers: &[f64], pos: f64) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let mut i1 = 1;
    while centers[i1] < pos {
        i1 += 1;
    }
    let i0 = i1 - 1;
    let frac = (pos - centers[i0]) / (centers[i1] - centers[i0]);
    (i0, i1, frac)
}

fn identity_lut() -> [u8; 256] {
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = v as u8;
    }
    lut
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_gray(w: u32, h: u32, seed: u64) -> Frame {
        let mut state = seed | 1;
        let data = (0..(w * h) as usize)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 56) as u8
            })
            .collect();
        Frame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn gamma_one_is_identity() {
        let f = random_gray(16, 16, 7);
        let out = gamma_correct(&f, &GammaParams { gamma: 1.0 }).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn gamma_demo_value() {
        // round(255 * (64/255)^(1/3.5)) = 172
        let lut = gamma_lut(&GammaParams { gamma: 3.5 }).unwrap();
        assert_eq!(lut[64], 172);
    }

    #[test]
    fn gamma_endpoints_fixed() {
        for gamma in [0.2, 0.9, 1.0, 2.2, 3.5, 9.0] {
            let lut = gamma_lut(&GammaParams { gamma }).unwrap();
            assert_eq!(lut[0], 0);
            assert_eq!(lut[255], 255);
        }
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        for gamma in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            let f = Frame::filled_gray(2, 2, 0);
            assert!(gamma_correct(&f, &GammaParams { gamma }).is_err());
        }
    }

    #[test]
    fn gamma_lut_monotone_and_directional() {
        let mut state = 0x12345u64;
        for _ in 0..100 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let gamma = 0.1 + (state >> 11) as f64 / (1u64 << 53) as f64 * 9.9;
            let lut = gamma_lut(&GammaParams { gamma }).unwrap();
            assert!(
                lut.windows(2).all(|pair| pair[1] >= pair[0]),
                "gamma {gamma} not monotone"
            );
            for (v, &out) in lut.iter().enumerate() {
                if gamma < 1.0 {
                    assert!(out <= v as u8, "gamma {gamma} must darken");
                } else {
                    assert!(out >= v as u8, "gamma {gamma} must lighten");
                }
            }
        }
    }

    #[test]
    fn he_constant_image_unchanged() {
        let f = Frame::filled_gray(8, 8, 77);
        assert_eq!(hist_equalize(&f).unwrap(), f);
    }

    #[test]
    fn he_two_level_image_maps_to_extremes() {
        let mut data = vec![0u8; 32];
        data.extend(vec![255u8; 32]);
        let f = Frame::new(8, 8, 1, data).unwrap();
        let out = hist_equalize(&f).unwrap();
        for (i, &v) in out.data().iter().enumerate() {
            assert_eq!(v, if i < 32 { 0 } else { 255 });
        }
    }

    #[test]
    fn he_uniform_histogram_moves_each_level_at_most_one() {
        // One pixel of every level: cdf(v) = v+1, cdf_min = 1,
        // map(v) = round(v/255*255) = v. Exactly identity here; the
        // guaranteed bound is max displacement <= 1.
        let data: Vec<u8> = (0..=255).collect();
        let f = Frame::new(16, 16, 1, data).unwrap();
        let out = hist_equalize(&f).unwrap();
        for (a, b) in f.data().iter().zip(out.data()) {
            assert!((*a as i16 - *b as i16).abs() <= 1);
        }
    }

    #[test]
    fn he_rejects_color_input() {
        let f = Frame::new(1, 1, 3, vec![0, 0, 0]).unwrap();
        assert!(matches!(hist_equalize(&f), Err(Error::Contract(_))));
    }

    #[test]
    fn he_idempotent_within_one_level() {
        for seed in 1..20u64 {
            let f = random_gray(32, 32, seed);
            let once = hist_equalize(&f).unwrap();
            let twice = hist_equalize(&once).unwrap();
            let max_diff = once
                .data()
                .iter()
                .zip(twice.data())
                .map(|(a, b)| (*a as i16 - *b as i16).abs())
                .max()
                .unwrap();
            assert!(max_diff <= 1, "seed {seed}: max diff {max_diff}");
        }
    }

    #[test]
    fn clahe_single_tile_unbounded_equals_he() {
        for seed in 1..30u64 {
            let f = random_gray(24, 18, seed);
            let p = ClaheParams {
                tiles_x: 1,
                tiles_y: 1,
                clip_limit: f64::INFINITY,
            };
            assert_eq!(clahe(&f, &p).unwrap(), hist_equalize(&f).unwrap());
        }
    }

    #[test]
    fn clahe_single_tile_large_finite_clip_equals_he() {
        let f = random_gray(64, 64, 3);
        let p = ClaheParams {
            tiles_x: 1,
            tiles_y: 1,
            clip_limit: (64 * 64) as f64,
        };
        assert_eq!(clahe(&f, &p).unwrap(), hist_equalize(&f).unwrap());
    }

    #[test]
    fn clahe_constant_image_unchanged() {
        let f = Frame::filled_gray(32, 24, 50);
        for p in [
            ClaheParams::default(),
            ClaheParams {
                tiles_x: 4,
                tiles_y: 3,
                clip_limit: 1.5,
            },
        ] {
            assert_eq!(clahe(&f, &p).unwrap(), f);
        }
    }

    fn half_std(frame: &Frame, left: bool) -> f64 {
        let w = frame.width() as usize;
        let vals: Vec<f64> = frame
            .data()
            .chunks_exact(w)
            .flat_map(|row| {
                let half = if left { &row[..w / 2] } else { &row[w / 2..] };
                half.iter().map(|&v| v as f64)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
    }

    #[test]
    fn clahe_two_tiles_stretch_local_contrast_beyond_global_he() {
        // Dark textured left half, bright right half. With one tile per
        // half, the left tile equalizes over its own narrow range, so its
        // output spread must beat the global mapping's.
        let (w, h) = (64u32, 64u32);
        let mut data = vec![0u8; (w * h) as usize];
        let mut state = 99u64;
        for y in 0..h as usize {
            for x in 0..w as usize {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let noise = ((state >> 58) & 31) as u8;
                data[y * w as usize + x] = if x < (w / 2) as usize {
                    10 + noise
                } else {
                    200 + noise
                };
            }
        }
        let f = Frame::new(w, h, 1, data).unwrap();
        let local = clahe(
            &f,
            &ClaheParams {
                tiles_x: 2,
                tiles_y: 1,
                clip_limit: f64::INFINITY,
            },
        )
        .unwrap();
        let global = hist_equalize(&f).unwrap();
        assert!(
            half_std(&local, true) > half_std(&global, true),
            "clahe left-half std {} vs global {}",
            half_std(&local, true),
            half_std(&global, true)
        );
    }

    #[test]
    fn clahe_rejects_oversized_grid() {
        let f = Frame::filled_gray(4, 4, 0);
        let p = ClaheParams {
            tiles_x: 5,
            tiles_y: 1,
            clip_limit: 2.0,
        };
        assert!(clahe(&f, &p).is_err());
    }

    #[test]
    fn threshold_boundary_convention() {
        let f = Frame::new(2, 1, 1, vec![127, 128]).unwrap();
        let out = binary_threshold(&f, 128).unwrap();
        assert_eq!(out.data(), &[0, 255]);
    }

    #[test]
    fn threshold_zero_lights_everything() {
        let f = random_gray(8, 8, 5);
        let out = binary_threshold(&f, 0).unwrap();
        assert!(out.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn threshold_255_keeps_only_saturated() {
        let f = Frame::new(3, 1, 1, vec![254, 255, 0]).unwrap();
        let out = binary_threshold(&f, 255).unwrap();
        assert_eq!(out.data(), &[0, 255, 0]);
    }

    proptest! {
        #[test]
        fn he_mapping_monotone(seed in proptest::num::u64::ANY) {
            let f = random_gray(24, 24, seed);
            let out = hist_equalize(&f).unwrap();
            // Observed mapping must be monotone in the input level.
            let mut seen: Vec<Option<u8>> = vec![None; 256];
            for (&a, &b) in f.data().iter().zip(out.data()) {
                seen[a as usize] = Some(b);
            }
            let mut prev = None;
            for v in seen.into_iter().flatten() {
                if let Some(p) = prev {
                    prop_assert!(v >= p);
                }
                prev = Some(v);
            }
        }

        #[test]
        fn threshold_idempotent(seed in proptest::num::u64::ANY, t in 1u8..=255) {
            let f = random_gray(12, 12, seed);
            let once = binary_threshold(&f, t).unwrap();
            let twice = binary_threshold(&once, t).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn operations_preserve_dimensions_and_range(seed in proptest::num::u64::ANY) {
            let f = random_gray(17, 13, seed);
            let outs = [
                gamma_correct(&f, &GammaParams { gamma: 2.2 }).unwrap(),
                hist_equalize(&f).unwrap(),
                clahe(&f, &ClaheParams { tiles_x: 2, tiles_y: 2, clip_limit: 3.0 }).unwrap(),
                binary_threshold(&f, 100).unwrap(),
            ];
            for out in outs {
                prop_assert_eq!(out.width(), f.width());
                prop_assert_eq!(out.height(), f.height());
                prop_assert_eq!(out.channels(), 1);
            }
        }
    }
}
