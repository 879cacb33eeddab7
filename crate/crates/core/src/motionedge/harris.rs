//! Harris corner detection over a Gaussian-weighted structure tensor.

use super::{gaussian_blur, sobel};
use crate::error::{Error, Result};
use crate::frameio::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    /// Response coefficient in `R = det(M) - k * trace(M)^2`.
    pub k: f64,
    /// Std-dev of the Gaussian weighting of the structure tensor.
    pub window_sigma: f64,
    /// Keep maxima with response >= this fraction of the global maximum.
    pub response_threshold: f64,
}

impl Default for HarrisParams {
    fn default() -> Self {
        HarrisParams {
            k: 0.04,
            window_sigma: 2.0,
            response_threshold: 0.01,
        }
    }
}

/// A corner: pixel position and Harris response.
pub type Corner = (u32, u32, f64);

/// Returns 3x3 local maxima of the Harris response with
/// `R >= response_threshold * max(R)`, ordered by scan position.
/// A flat or edge-only image (no positive response) yields nothing.
pub fn harris(gray: &Frame, params: &HarrisParams) -> Result<Vec<Corner>> {
    if gray.channels() != 1 {
        return Err(Error::Contract("harris requires a 1-channel frame".into()));
    }
    if !(params.k > 0.0 && params.k < 0.25) {
        return Err(Error::Param(format!(
            "k must lie in (0, 0.25), got {}",
            params.k
        )));
    }
    if !(params.window_sigma > 0.0 && params.window_sigma.is_finite()) {
        return Err(Error::Param(format!(
            "window_sigma must be positive, got {}",
            params.window_sigma
        )));
    }
    if !(params.response_threshold > 0.0 && params.response_threshold <= 1.0) {
        return Err(Error::Param(format!(
            "response_threshold must lie in (0, 1], got {}",
            params.response_threshold
        )));
    }

    let response = harris_response(gray, params);
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let max_r = response.iter().cloned().fold(f64::MIN, f64::max);
    if max_r.is_nan() || max_r <= 0.0 {
        return Ok(Vec::new());
    }
    let cutoff = params.response_threshold * max_r;

    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            f64::MIN
        } else {
            response[y as usize * w + x as usize]
        }
    };

    let mut corners = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let r = response[y as usize * w + x as usize];
            if r <= 0.0 || r < cutoff {
                continue;
            }
            // Ties on a plateau resolve to the first pixel in scan order:
            // earlier neighbors may tie, later ones must be strictly smaller.
            let earlier = [(-1, -1), (0, -1), (1, -1), (-1, 0)];
            let later = [(1, 0), (-1, 1), (0, 1), (1, 1)];
            if earlier.iter().all(|&(dx, dy)| r >= at(x + dx, y + dy))
                && later.iter().all(|&(dx, dy)| r > at(x + dx, y + dy))
            {
                corners.push((x as u32, y as u32, r));
            }
        }
    }
    Ok(corners)
}

/// The raw Harris response plane (exposed for the transpose-symmetry
/// property and the CLI's corner-map rendering).
pub fn harris_response(gray: &Frame, params: &HarrisParams) -> Vec<f64> {
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let plane: Vec<f64> = gray.data().iter().map(|&v| v as f64).collect();
    let (gx, gy) = sobel(&plane, w, h);

    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for i in 0..w * h {
        ixx[i] = gx[i] * gx[i];
        iyy[i] = gy[i] * gy[i];
        ixy[i] = gx[i] * gy[i];
    }
    let sxx = gaussian_blur(&ixx, w, h, params.window_sigma);
    let syy = gaussian_blur(&iyy, w, h, params.window_sigma);
    let sxy = gaussian_blur(&ixy, w, h, params.window_sigma);

    (0..w * h)
        .map(|i| {
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let trace = sxx[i] + syy[i];
            det - params.k * trace * trace
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_yields_no_corners() {
        let f = Frame::filled_gray(32, 32, 90);
        assert!(harris(&f, &HarrisParams::default()).unwrap().is_empty());
    }

    #[test]
    fn white_square_yields_its_four_corners() {
        let (w, h) = (64u32, 64u32);
        let mut data = vec![0u8; (w * h) as usize];
        for y in 20..44 {
            for x in 20..44 {
                data[(y * w + x) as usize] = 255;
            }
        }
        let f = Frame::new(w, h, 1, data).unwrap();
        let corners = harris(
            &f,
            &HarrisParams {
                k: 0.04,
                window_sigma: 2.0,
                response_threshold: 0.1,
            },
        )
        .unwrap();

        let truth = [(20u32, 20u32), (43, 20), (20, 43), (43, 43)];
        assert_eq!(corners.len(), 4, "got {corners:?}");
        for &(tx, ty) in &truth {
            let hit = corners.iter().any(|&(x, y, _)| {
                (x as i64 - tx as i64).abs() <= 2 && (y as i64 - ty as i64).abs() <= 2
            });
            assert!(hit, "no corner within 2 px of ({tx},{ty}): {corners:?}");
        }
    }

    #[test]
    fn straight_edge_interior_fires_nothing() {
        // Half-plane step: an ideal edge has rank-1 structure tensor, so
        // R <= 0 along it and only (possibly) frame-corner artifacts could
        // respond. With clamp-to-edge borders the response never goes
        // positive anywhere.
        let (w, h) = (48u32, 48u32);
        let data = (0..h)
            .flat_map(|_| (0..w).map(move |x| if x >= 24 { 255u8 } else { 0 }))
            .collect();
        let f = Frame::new(w, h, 1, data).unwrap();
        let corners = harris(&f, &HarrisParams::default()).unwrap();
        assert!(corners.is_empty(), "edge produced corners: {corners:?}");
    }

    #[test]
    fn response_map_symmetric_under_transpose() {
        let (w, h) = (24u32, 16u32);
        let mut data = vec![0u8; (w * h) as usize];
        let mut state = 5u64;
        for v in data.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *v = (state >> 56) as u8;
        }
        let f = Frame::new(w, h, 1, data.clone()).unwrap();
        let mut tdata = vec![0u8; (w * h) as usize];
        for y in 0..h as usize {
            for x in 0..w as usize {
                tdata[x * h as usize + y] = data[y * w as usize + x];
            }
        }
        let ft = Frame::new(h, w, 1, tdata).unwrap();

        let p = HarrisParams::default();
        let r = harris_response(&f, &p);
        let rt = harris_response(&ft, &p);
        let scale = r.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
        for y in 0..h as usize {
            for x in 0..w as usize {
                let a = r[y * w as usize + x];
                let b = rt[x * h as usize + y];
                assert!(
                    ((a - b) / scale).abs() < 1e-9,
                    "transpose asymmetry at ({x},{y}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let f = Frame::filled_gray(8, 8, 0);
        for p in [
            HarrisParams {
                k: 0.0,
                ..Default::default()
            },
            HarrisParams {
                k: 0.3,
                ..Default::default()
            },
            HarrisParams {
                window_sigma: 0.0,
                ..Default::default()
            },
            HarrisParams {
                response_threshold: 0.0,
                ..Default::default()
            },
            HarrisParams {
                response_threshold: 1.5,
                ..Default::default()
            },
        ] {
            assert!(harris(&f, &p).is_err(), "params {p:?} must be rejected");
        }
    }
}
