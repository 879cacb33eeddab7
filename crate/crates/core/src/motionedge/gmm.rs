//! Online Gaussian-mixture background subtraction.
//!
//! Each pixel carries up to K Gaussian components (weight, mean, variance)
//! kept sorted by fitness weight/sqrt(variance). Updates follow the adaptive
//! scheme: the matched component moves toward the observation at the
//! learning rate, unmatched weights decay, components lighter than
//! `alpha * COMPLEXITY_PRIOR` are pruned, and an unmatched observation
//! replaces the weakest component. Mask labels: 0 background, 127 shadow
//! (when enabled), 255 foreground.

use crate::error::{Error, Result};
use crate::frameio::Frame;

/// Mask value for pixels classified as shadow. In no-shadow mode would-be
/// shadows come out as plain foreground (255).
pub const SHADOW_LABEL: u8 = 127;

/// Weight-pruning prior: components with weight below
/// `learning_rate * COMPLEXITY_PRIOR` are dropped.
const COMPLEXITY_PRIOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmParams {
    /// Maximum Gaussians per pixel (1..=8).
    pub max_components: usize,
    /// Update rate alpha in (0, 1).
    pub learning_rate: f64,
    /// Cumulative weight share that counts as background, in (0, 1).
    pub background_fraction: f64,
    /// Variance assigned to newly created components (intensity^2).
    pub initial_variance: f64,
    /// Variance floor keeping components from collapsing.
    pub min_variance: f64,
    /// Match window in standard deviations.
    pub match_threshold: f64,
    /// Label darkened background as 127 instead of 255.
    pub detect_shadows: bool,
    /// Intensity-ratio band (low, high) for the shadow test.
    pub shadow_luma_band: (f64, f64),
}

impl Default for GmmParams {
    fn default() -> Self {
        GmmParams {
            max_components: 5,
            learning_rate: 0.02,
            background_fraction: 0.9,
            initial_variance: 225.0,
            min_variance: 4.0,
            match_threshold: 2.5,
            detect_shadows: true,
            shadow_luma_band: (0.4, 0.95),
        }
    }
}

impl GmmParams {
    fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.max_components) {
            return Err(Error::Param(format!(
                "max_components must lie in 1..=8, got {}",
                self.max_components
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(Error::Param(format!(
                "learning_rate must lie in (0, 1), got {}",
                self.learning_rate
            )));
        }
        if !(self.background_fraction > 0.0 && self.background_fraction < 1.0) {
            return Err(Error::Param(format!(
                "background_fraction must lie in (0, 1), got {}",
                self.background_fraction
            )));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.initial_variance) || !positive(self.min_variance) {
            return Err(Error::Param("variances must be positive".into()));
        }
        if !positive(self.match_threshold) {
            return Err(Error::Param("match_threshold must be positive".into()));
        }
        let (lo, hi) = self.shadow_luma_band;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::Param(format!(
                "shadow_luma_band must satisfy 0 < low < high <= 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Gaussian {
    weight: f32,
    mean: f32,
    var: f32,
}

/// Per-pixel mixture state plus the frame counter.
pub struct BackgroundModel {
    params: GmmParams,
    width: u32,
    height: u32,
    frames_seen: u64,
    /// K slots per pixel; the first `active[p]` are live, sorted by fitness.
    slots: Vec<Gaussian>,
    active: Vec<u8>,
}

/// Creates a model where every pixel starts with a single full-weight
/// component. Its mean is a placeholder replaced by the first observation.
pub fn gmm_init(params: &GmmParams, width: u32, height: u32) -> Result<BackgroundModel> {
    params.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::Param(format!(
            "model dimensions must be positive, got {width}x{height}"
        )));
    }
    let pixels = width as usize * height as usize;
    let empty = Gaussian {
        weight: 0.0,
        mean: 0.0,
        var: params.initial_variance as f32,
    };
    let mut slots = vec![empty; pixels * params.max_components];
    for p in 0..pixels {
        slots[p * params.max_components].weight = 1.0;
    }
    Ok(BackgroundModel {
        params: *params,
        width,
        height,
        frames_seen: 0,
        slots,
        active: vec![1; pixels],
    })
}

impl BackgroundModel {
    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Dominant (highest-fitness) component mean at a pixel.
    pub fn dominant_mean(&self, x: u32, y: u32) -> f64 {
        let p = (y * self.width + x) as usize;
        self.slots[p * self.params.max_components].mean as f64
    }

    /// Checks the model's structural invariants: per-pixel weights sum to
    /// 1 within 1e-6 and no variance sits below the configured floor.
    pub fn validate_invariants(&self) -> Result<()> {
        let k = self.params.max_components;
        for (p, &n) in self.active.iter().enumerate() {
            let comps = &self.slots[p * k..p * k + n as usize];
            let sum: f64 = comps.iter().map(|c| c.weight as f64).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Contract(format!(
                    "pixel {p}: weights sum to {sum}, not 1"
                )));
            }
            for c in comps {
                if (c.var as f64) < self.params.min_variance - 1e-6 {
                    return Err(Error::Contract(format!(
                        "pixel {p}: variance {} below floor {}",
                        c.var, self.params.min_variance
                    )));
                }
            }
        }
        Ok(())
    }

    /// Absorbs one frame (frames must arrive in temporal order) and returns
    /// the segmentation mask: 0 background, 127 shadow, 255 foreground.
    pub fn update(&mut self, gray: &Frame) -> Result<Frame> {
        if gray.channels() != 1 {
            return Err(Error::Contract(
                "gmm update requires a 1-channel frame".into(),
            ));
        }
        if gray.width() != self.width || gray.height() != self.height {
            return Err(Error::Contract(format!(
                "frame is {}x{}, model is {}x{}",
                gray.width(),
                gray.height(),
                self.width,
                self.height
            )));
        }

        let k = self.params.max_components;
        let alpha = self.params.learning_rate as f32;
        let prune_below = (self.params.learning_rate * COMPLEXITY_PRIOR) as f32;
        let var_floor = self.params.min_variance as f32;
        let mt2 = (self.params.match_threshold * self.params.match_threshold) as f32;
        let first_frame = self.frames_seen == 0;

        let mut mask = vec![0u8; gray.data().len()];
        for (p, &sample) in gray.data().iter().enumerate() {
            let v = sample as f32;
            let comps = &mut self.slots[p * k..(p + 1) * k];
            let n = &mut self.active[p];

            if first_frame {
                comps[0].mean = v;
            }

            // Find the best-fitness matching component.
            let matched = comps[..*n as usize].iter().position(|c| {
                let d = v - c.mean;
                d * d <= mt2 * c.var
            });

            match matched {
                Some(m) => {
                    for (i, c) in comps.iter_mut().enumerate().take(*n as usize) {
                        let o = if i == m { 1.0 } else { 0.0 };
                        c.weight += alpha * (o - c.weight);
                    }
                    let c = &mut comps[m];
                    let d = v - c.mean;
                    c.mean += alpha * d;
                    c.var = (c.var + alpha * (d * d - c.var)).max(var_floor);

                    // Prune starved components (never the last one).
                    let mut i = 0;
                    while i < *n as usize {
                        if *n > 1 && comps[i].weight < prune_below {
                            comps.copy_within(i + 1..*n as usize, i);
                            *n -= 1;
                        } else {
                            i += 1;
                        }
                    }
                }
                None => {
                    for c in comps.iter_mut().take(*n as usize) {
                        c.weight *= 1.0 - alpha;
                    }
                    let new = Gaussian {
                        weight: alpha,
                        mean: v,
                        var: self.params.initial_variance as f32,
                    };
                    if (*n as usize) < k {
                        comps[*n as usize] = new;
                        *n += 1;
                    } else {
                        comps[k - 1] = new; // replace the weakest
                    }
                }
            }

            // Renormalize and re-sort by fitness.
            let live = &mut comps[..*n as usize];
            let total: f32 = live.iter().map(|c| c.weight).sum();
            if total > 0.0 {
                for c in live.iter_mut() {
                    c.weight /= total;
                }
            }
            live.sort_by(|a, b| {
                let fa = a.weight / a.var.sqrt();
                let fb = b.weight / b.var.sqrt();
                fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
            });

            // Background = the leading components holding `background_fraction`
            // of the weight.
            let mut bg_count = 0;
            let mut cum = 0.0f32;
            for c in live.iter() {
                bg_count += 1;
                cum += c.weight;
                if cum >= self.params.background_fraction as f32 {
                    break;
                }
            }

            let mut label = 255u8;
            for c in live[..bg_count].iter() {
                let d = v - c.mean;
                if d * d <= mt2 * c.var {
                    label = 0;
                    break;
                }
            }
            if label == 255 && self.params.detect_shadows {
                let (lo, hi) = self.params.shadow_luma_band;
                for c in live[..bg_count].iter() {
                    if c.mean > 0.0 {
                        let ratio = (v / c.mean) as f64;
                        if ratio >= lo && ratio <= hi {
                            label = SHADOW_LABEL;
                            break;
                        }
                    }
                }
            }
            mask[p] = label;
        }

        self.frames_seen += 1;
        Ok(gray.with_data(mask))
    }
}
