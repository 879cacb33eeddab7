//! Linear SVM: primal sub-gradient training on the hinge loss, scoring, and
//! the flat binary model file.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};

/// Hyperplane classifier plus the detector's decision cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub score_threshold: f64,
}

pub const MODEL_MAGIC: &[u8; 6] = b"NWSVM1";

/// `w . x + b`.
pub fn svm_score(model: &LinearModel, descriptor: &[f64]) -> Result<f64> {
    if descriptor.len() != model.weights.len() {
        return Err(Error::Contract(format!(
            "descriptor length {} does not match model length {}",
            descriptor.len(),
            model.weights.len()
        )));
    }
    Ok(dot(&model.weights, descriptor) + model.bias)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains a linear SVM by shuffled per-sample sub-gradient steps on
/// `lambda/2 ||w||^2 + mean hinge`, step size `1/(lambda t)`.
///
/// The full-set objective is evaluated at every epoch end; an epoch that
/// regressed is rolled back to the best state seen, so the epoch-end
/// objective sequence is non-increasing and the returned model is the best
/// iterate. Deterministic for a fixed seed.
pub fn train_linear_svm(
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    train_linear_svm_with_history(positives, negatives, lambda, epochs, seed).map(|(m, _)| m)
}

/// Like [`train_linear_svm`] but also returns the objective value at each
/// epoch end.
pub fn train_linear_svm_with_history(
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<(LinearModel, Vec<f64>)> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Param("both classes must be non-empty".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Param(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let dim = positives[0].len();
    if dim == 0 {
        return Err(Error::Param("descriptors must be non-empty".into()));
    }
    for d in positives.iter().chain(negatives) {
        if d.len() != dim {
            return Err(Error::Contract(format!(
                "descriptor length mismatch: {} vs {dim}",
                d.len()
            )));
        }
    }

    let samples: Vec<(&[f64], f64)> = positives
        .iter()
        .map(|d| (d.as_slice(), 1.0))
        .chain(negatives.iter().map(|d| (d.as_slice(), -1.0)))
        .collect();

    let objective = |w: &[f64], b: f64| -> f64 {
        let hinge: f64 = samples
            .iter()
            .map(|&(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
            .sum();
        0.5 * lambda * dot(w, w) + hinge / samples.len() as f64
    };

    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut best_w = w.clone();
    let mut best_b = b;
    let mut best_obj = objective(&w, b);
    let mut history = Vec::with_capacity(epochs);
    let mut t: u64 = 0;

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = samples[i];
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                for (v, &xi) in w.iter_mut().zip(x) {
                    *v += eta * y * xi;
                }
                b += eta * y;
            }
        }
        let obj = objective(&w, b);
        if obj <= best_obj {
            best_obj = obj;
            best_w.copy_from_slice(&w);
            best_b = b;
        } else {
            w.copy_from_slice(&best_w);
            b = best_b;
        }
        history.push(best_obj);
    }

    Ok((
        LinearModel {
            weights: best_w,
            bias: best_b,
            score_threshold: 0.0,
        },
        history,
    ))
}

/// Writes the flat binary model file: magic `NWSVM1`, u32-LE weight count,
/// weights as f64-LE, then bias and score_threshold as f64-LE.
pub fn save_model(model: &LinearModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(10 + 8 * (model.weights.len() + 2));
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&(model.weights.len() as u32).to_le_bytes());
    for wv in &model.weights {
        bytes.extend_from_slice(&wv.to_le_bytes());
    }
    bytes.extend_from_slice(&model.bias.to_le_bytes());
    bytes.extend_from_slice(&model.score_threshold.to_le_bytes());
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = std::io::BufWriter::new(file);
    wtr.write_all(&bytes)
        .and_then(|_| wtr.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LinearModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 10 || &bytes[..6] != MODEL_MAGIC {
        return Err(Error::format(path, "not a model file (bad magic)"));
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let expected = 10 + 8 * (dim + 2);
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "truncated model: expected {expected} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    let f64_at = |offset: usize| -> f64 {
        f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap())
    };
    let weights: Vec<f64> = (0..dim).map(|i| f64_at(10 + 8 * i)).collect();
    let bias = f64_at(10 + 8 * dim);
    let score_threshold = f64_at(10 + 8 * (dim + 1));
    Ok(LinearModel {
        weights,
        bias,
        score_threshold,
    })
}
