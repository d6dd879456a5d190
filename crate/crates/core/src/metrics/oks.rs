use super::MetricsError;

/// Inputs to the per-keypoint object keypoint similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OksInput {
    /// Euclidean distance between detection and ground truth (px).
    pub distance: f64,
    /// Object scale: square root of the pelvic bounding-box area (px).
    pub scale: f64,
    /// Per-keypoint falloff constant.
    pub k: f64,
}

/// `exp(-d² / (2 s² k²))`.
pub fn oks(input: &OksInput) -> Result<f64, MetricsError> {
    let OksInput { distance, scale, k } = *input;
    if !(scale > 0.0 && scale.is_finite() && k > 0.0 && k.is_finite()) {
        return Err(MetricsError::InvalidScale { scale, k });
    }
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(MetricsError::InvalidInput(format!("distance {distance} must be finite and non-negative")));
    }
    let sk = scale * k;
    Ok((-(distance * distance) / (2.0 * sk * sk)).exp())
}
