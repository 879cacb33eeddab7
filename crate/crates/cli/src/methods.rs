//! Shared per-frame method plumbing used by `enhance` and `bench`.

use nightwatch_core::enhance::{binary_threshold, clahe, gamma_correct, hist_equalize};
use nightwatch_core::enhance::{ClaheParams, GammaParams};
use nightwatch_core::frameio::{to_grayscale, Frame};
use nightwatch_core::motionedge::{canny, gmm_init, harris, BackgroundModel};
use nightwatch_core::motionedge::{CannyParams, GmmParams, HarrisParams};
use nightwatch_core::Result;

/// One enhancement/processing method, fully parameterized.
#[derive(Debug, Clone)]
pub enum Method {
    Gamma(GammaParams),
    HistEq,
    Clahe(ClaheParams),
    Threshold(u8),
    Canny(CannyParams),
    Harris(HarrisParams),
    Motion(GmmParams),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gamma(_) => "gamma_correction",
            Method::HistEq => "hist_equalization",
            Method::Clahe(_) => "clahe",
            Method::Threshold(_) => "binary_threshold",
            Method::Canny(_) => "canny_edge",
            Method::Harris(_) => "harris_corners",
            Method::Motion(_) => "motion_map",
        }
    }
}

/// Applies a stateless method to one frame. Gamma keeps the channel count
/// (its LUT runs per channel); everything else converts to grayscale first.
pub fn apply_stateless(method: &Method, frame: &Frame) -> Result<Frame> {
    match method {
        Method::Gamma(p) => gamma_correct(frame, p),
        Method::HistEq => hist_equalize(&to_grayscale(frame)),
        Method::Clahe(p) => clahe(&to_grayscale(frame), p),
        Method::Threshold(t) => binary_threshold(&to_grayscale(frame), *t),
        Method::Canny(p) => canny(&to_grayscale(frame), p),
        Method::Harris(p) => {
            let gray = to_grayscale(frame);
            let corners = harris(&gray, p)?;
            Ok(corner_map(&gray, &corners))
        }
        Method::Motion(_) => unreachable!("motion is stateful"),
    }
}

/// Holds the background model across frames for the motion method.
pub struct MotionRunner {
    params: GmmParams,
    model: Option<BackgroundModel>,
}

impl MotionRunner {
    pub fn new(params: GmmParams) -> MotionRunner {
        MotionRunner {
            params,
            model: None,
        }
    }

    pub fn step(&mut self, frame: &Frame) -> Result<Frame> {
        let gray = to_grayscale(frame);
        if self.model.is_none() {
            self.model = Some(gmm_init(&self.params, gray.width(), gray.height())?);
        }
        self.model.as_mut().unwrap().update(&gray)
    }
}

/// Renders corners as 3x3 white crosses on black, same dimensions as the
/// input.
pub fn corner_map(gray: &Frame, corners: &[(u32, u32, f64)]) -> Frame {
    let (w, h) = (gray.width(), gray.height());
    let mut data = vec![0u8; (w * h) as usize];
    for &(x, y, _) in corners {
        for (dx, dy) in [(0i64, 0i64), (-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (px, py) = (x as i64 + dx, y as i64 + dy);
            if px >= 0 && py >= 0 && (px as u32) < w && (py as u32) < h {
                data[(py as u32 * w + px as u32) as usize] = 255;
            }
        }
    }
    gray.with_dimensions_of(data)
}

/// Frame-shaped helper the core Frame API does not need to expose.
trait WithData {
    fn with_dimensions_of(&self, data: Vec<u8>) -> Frame;
}

impl WithData for Frame {
    fn with_dimensions_of(&self, data: Vec<u8>) -> Frame {
        Frame::new(self.width(), self.height(), 1, data).expect("dimensions preserved")
    }
}
