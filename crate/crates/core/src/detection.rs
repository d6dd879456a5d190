//! Keypoint target masks and the focal keypoint loss, as pure functions
//! over probability grids.

use ndarray::{Array2, Array3, Zip};
use thiserror::Error;

use crate::geometry::Point2D;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;
pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_HEATMAP_SIGMA: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("keypoint ({x}, {y}) falls outside the {width}x{height} grid")]
    OutOfBounds { x: f64, y: f64, width: usize, height: usize },
    #[error("heatmap sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("probability {value} at [{k}, {i}, {j}] is outside (0, 1)")]
    InvalidProbability { value: f64, k: usize, i: usize, j: usize },
    #[error("shape mismatch: probabilities {probs:?} vs targets {targets:?}")]
    ShapeMismatch { probs: Vec<usize>, targets: Vec<usize> },
    #[error("invalid loss parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskKind {
    Binary,
    Heatmap { sigma: f64 },
}

/// Target mask for one keypoint, indexed `[row, column]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointMask {
    pub kind: MaskKind,
    pub values: Array2<f64>,
    /// `(row, column)` of the keypoint cell.
    pub peak: (usize, usize),
}

impl KeypointMask {
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }
}

fn keypoint_cell(location: Point2D, width: usize, height: usize) -> Result<(usize, usize), DetectionError> {
    let col = location.x.round();
    let row = location.y.round();
    let inside = col >= 0.0 && row >= 0.0 && col < width as f64 && row < height as f64;
    if !inside {
        return Err(DetectionError::OutOfBounds { x: location.x, y: location.y, width, height });
    }
    Ok((row as usize, col as usize))
}

/// One-hot mask: 1 at the nearest cell, 0 elsewhere.
pub fn binary_mask(location: Point2D, width: usize, height: usize) -> Result<KeypointMask, DetectionError> {
    let peak = keypoint_cell(location, width, height)?;
    let mut values = Array2::zeros((height, width));
    values[peak] = 1.0;
    Ok(KeypointMask { kind: MaskKind::Binary, values, peak })
}

/// Unnormalized Gaussian centred on the keypoint cell, peak exactly 1.
pub fn heatmap_mask(
    location: Point2D,
    width: usize,
    height: usize,
    sigma: f64,
) -> Result<KeypointMask, DetectionError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(DetectionError::InvalidSigma(sigma));
    }
    let peak = keypoint_cell(location, width, height)?;
    let (pr, pc) = (peak.0 as f64, peak.1 as f64);
    let two_s2 = 2.0 * sigma * sigma;
    let values = Array2::from_shape_fn((height, width), |(i, j)| {
        let d2 = (i as f64 - pr).powi(2) + (j as f64 - pc).powi(2);
        (-d2 / two_s2).exp()
    });
    Ok(KeypointMask { kind: MaskKind::Heatmap { sigma }, values, peak })
}

/// Predicted probabilities and binary targets, both shaped `[K, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalLossInput {
    pub probs: Array3<f64>,
    pub targets: Array3<bool>,
    pub gamma: f64,
    /// Normalizer; `None` uses the number of keypoints `K`.
    pub normalizer: Option<f64>,
}

impl FocalLossInput {
    pub fn new(probs: Array3<f64>, targets: Array3<bool>) -> Self {
        Self { probs, targets, gamma: DEFAULT_GAMMA, normalizer: None }
    }

    /// Stacks one-hot masks into a target tensor.
    pub fn targets_from_masks(masks: &[KeypointMask]) -> Result<Array3<bool>, DetectionError> {
        let (h, w) = masks.first().map(|m| (m.height(), m.width())).unwrap_or((0, 0));
        let mut t = Array3::from_elem((masks.len(), h, w), false);
        for (k, m) in masks.iter().enumerate() {
            if (m.height(), m.width()) != (h, w) {
                return Err(DetectionError::ShapeMismatch {
                    probs: vec![h, w],
                    targets: vec![m.height(), m.width()],
                });
            }
            t[[k, m.peak.0, m.peak.1]] = true;
        }
        Ok(t)
    }

    fn validate(&self) -> Result<f64, DetectionError> {
        if self.probs.shape() != self.targets.shape() {
            return Err(DetectionError::ShapeMismatch {
                probs: self.probs.shape().to_vec(),
                targets: self.targets.shape().to_vec(),
            });
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(DetectionError::InvalidParameter(format!("gamma {} must be >= 0", self.gamma)));
        }
        for ((k, i, j), &p) in self.probs.indexed_iter() {
            if !(p > 0.0 && p < 1.0) {
                return Err(DetectionError::InvalidProbability { value: p, k, i, j });
            }
        }
        let n = self.normalizer.unwrap_or(self.probs.shape()[0] as f64);
        if !(n > 0.0 && n.is_finite()) {
            return Err(DetectionError::InvalidParameter(format!("normalizer {n} must be positive")));
        }
        Ok(n)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `(1-p)^γ log p` on positive cells, `p^γ log(1-p)` elsewhere, summed,
/// negated and divided by the normalizer.
pub fn focal_keypoint_loss(input: &FocalLossInput) -> Result<f64, DetectionError> {
    let n = input.validate()?;
    let g = input.gamma;
    let mut sum = 0.0;
    Zip::from(&input.probs).and(&input.targets).for_each(|&p, &y| {
        let p = clamp_prob(p);
        sum += if y {
            (1.0 - p).powf(g) * p.ln()
        } else {
            p.powf(g) * (1.0 - p).ln()
        };
    });
    Ok(-sum / n)
}

/// Plain binary cross-entropy with the same normalizer and clamping.
pub fn cross_entropy_loss(input: &FocalLossInput) -> Result<f64, DetectionError> {
    let n = input.validate()?;
    let mut sum = 0.0;
    Zip::from(&input.probs).and(&input.targets).for_each(|&p, &y| {
        let p = clamp_prob(p);
        sum += if y { p.ln() } else { (1.0 - p).ln() };
    });
    Ok(-sum / n)
}

/// Analytic `∂loss/∂p` for every cell. Cells whose probability is clamped
/// have zero derivative.
pub fn focal_loss_gradient(input: &FocalLossInput) -> Result<Array3<f64>, DetectionError> {
    let n = input.validate()?;
    let g = input.gamma;
    let mut grad = Array3::zeros(input.probs.raw_dim());
    Zip::from(&mut grad)
        .and(&input.probs)
        .and(&input.targets)
        .for_each(|out, &p, &y| {
            if clamp_prob(p) != p {
                *out = 0.0;
                return;
            }
            let d = if y {
                // d/dp (1-p)^γ ln p
                let q = 1.0 - p;
                let modulating = if g == 0.0 { 0.0 } else { -g * q.powf(g - 1.0) * p.ln() };
                modulating + q.powf(g) / p
            } else {
                // d/dp p^γ ln(1-p)
                let q = 1.0 - p;
                let modulating = if g == 0.0 { 0.0 } else { g * p.powf(g - 1.0) * q.ln() };
                modulating - p.powf(g) / q
            };
            *out = -d / n;
        });
    Ok(grad)
}
