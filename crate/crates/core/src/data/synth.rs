//! Synthetic pelves built by inverting the measurement definitions.
//!
//! Given target CE, Tönnis and Sharp angles and a Crowe ratio, the
//! generator places landmarks on a template pelvis so that
//! [`measure_hip`](crate::geometry::measure_hip) recovers the targets to
//! floating-point precision:
//!
//! * C sits at the Sharp inclination from the ipsilateral teardrop A.
//! * D sits medially below (or above) C at the Tönnis inclination.
//! * B sits below C, tilted from the vertical by the CE angle.
//! * E sits `r · pelvic_height` above the teardrop line.
//! * F and G sit on two fixed levels whose separation is the pelvic height.
//!
//! Segment lengths and lateral offsets are drawn from the seeded RNG; they
//! do not affect any measurement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BBox, DataError, HipLabel, PelvisAnnotation, PerSide, Study, FUSED_ANNOTATOR};
use crate::geometry::{
    build_reference_frame, measure_hip, HipKeypoints, HipSide, PelvisKeypoints, Point2D, Vec2,
};
use crate::scoring::{score_hip, AngleRanges, ScoringParams};

/// Measurement targets for one hip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HipTargets {
    pub ce_deg: f64,
    pub tonnis_deg: f64,
    pub sharp_deg: f64,
    pub crowe_r: f64,
}

impl HipTargets {
    pub fn new(ce_deg: f64, tonnis_deg: f64, sharp_deg: f64, crowe_r: f64) -> Self {
        Self { ce_deg, tonnis_deg, sharp_deg, crowe_r }
    }

    fn validate(&self) -> Result<(), DataError> {
        let ok = self.ce_deg.abs() < 90.0
            && self.tonnis_deg.abs() < 90.0
            && (0.0..90.0).contains(&self.sharp_deg)
            && self.crowe_r >= 0.0
            && self.crowe_r.is_finite();
        if ok {
            Ok(())
        } else {
            Err(DataError::InvalidTarget(format!("{self:?}")))
        }
    }
}

/// Template skeleton the synthetic landmarks are attached to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PelvisTemplate {
    pub right_teardrop: Point2D,
    pub teardrop_span: f64,
    pub pelvic_height: f64,
    /// Rotation of the teardrop line in degrees (image y-down).
    pub rotation_deg: f64,
}

impl Default for PelvisTemplate {
    fn default() -> Self {
        Self {
            right_teardrop: Point2D::new(320.0, 420.0),
            teardrop_span: 160.0,
            pelvic_height: 200.0,
            rotation_deg: 0.0,
        }
    }
}

impl PelvisTemplate {
    pub fn left_teardrop(&self) -> Point2D {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        self.right_teardrop.offset(Vec2::new(c, s).scale(self.teardrop_span))
    }

    fn validate(&self) -> Result<(), DataError> {
        let ok = self.teardrop_span > 1.0
            && self.pelvic_height > 1.0
            && self.rotation_deg.abs() < 80.0
            && self.right_teardrop.is_finite();
        if ok {
            Ok(())
        } else {
            Err(DataError::InvalidTarget(format!("template {self:?}")))
        }
    }
}

const ILIUM_LEVEL: f64 = 0.75;
const ISCHIUM_LEVEL: f64 = -0.25;

fn side_seed(seed: u64, side: HipSide) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (side.index() as u64 + 1)
}

/// Landmarks of one hip hitting `targets` on the given template.
pub fn synth_hip(
    targets: &HipTargets,
    side: HipSide,
    template: &PelvisTemplate,
    seed: u64,
) -> Result<HipKeypoints, DataError> {
    targets.validate()?;
    template.validate()?;
    let frame = build_reference_frame(template.right_teardrop, template.left_teardrop())?;
    let mut rng = ChaCha8Rng::seed_from_u64(side_seed(seed, side));
    let lat = frame.lateral(side);
    let up = frame.u_vertical;
    let along = |lateral: f64, superior: f64| lat.scale(lateral).add(up.scale(superior));
    let h = template.pelvic_height;

    let teardrop = match side {
        HipSide::Right => template.right_teardrop,
        HipSide::Left => template.left_teardrop(),
    };
    let (sharp_s, sharp_c) = targets.sharp_deg.to_radians().sin_cos();
    let (tonnis_s, tonnis_c) = targets.tonnis_deg.to_radians().sin_cos();
    let (ce_s, ce_c) = targets.ce_deg.to_radians().sin_cos();

    let roof = rng.random_range(0.28..0.38) * h;
    let lat_sourcil = teardrop.offset(along(roof * sharp_c, roof * sharp_s));
    let sourcil = rng.random_range(0.09..0.15) * h;
    let med_sourcil = lat_sourcil.offset(along(sourcil * tonnis_c, sourcil * tonnis_s).neg());
    let radius = rng.random_range(0.18..0.25) * h;
    let fh_center = lat_sourcil.offset(along(radius * ce_s, radius * ce_c).neg());
    let fhn_junction = teardrop.offset(along(rng.random_range(0.15..0.3) * h, targets.crowe_r * h));
    let inf_ischium = teardrop.offset(along(rng.random_range(-0.15..0.05) * h, ISCHIUM_LEVEL * h));
    let sup_ilium = teardrop.offset(along(rng.random_range(0.3..0.5) * h, ILIUM_LEVEL * h));

    Ok(HipKeypoints {
        teardrop,
        fh_center,
        lat_sourcil,
        med_sourcil,
        fhn_junction,
        inf_ischium,
        sup_ilium,
    })
}

pub fn synth_pelvis(
    right: &HipTargets,
    left: &HipTargets,
    template: &PelvisTemplate,
    seed: u64,
) -> Result<PelvisKeypoints, DataError> {
    Ok(PelvisKeypoints {
        right: synth_hip(right, HipSide::Right, template, seed)?,
        left: synth_hip(left, HipSide::Left, template, seed)?,
    })
}

/// Uniform sampling intervals for the per-hip targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleDistributions {
    pub ce_deg: (f64, f64),
    pub tonnis_deg: (f64, f64),
    pub sharp_deg: (f64, f64),
    pub crowe_r: (f64, f64),
}

impl Default for AngleDistributions {
    fn default() -> Self {
        Self {
            ce_deg: (5.0, 40.0),
            tonnis_deg: (0.0, 20.0),
            sharp_deg: (35.0, 55.0),
            crowe_r: (0.0, 0.3),
        }
    }
}

impl AngleDistributions {
    fn sample(&self, rng: &mut ChaCha8Rng) -> HipTargets {
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        HipTargets {
            ce_deg: draw(self.ce_deg),
            tonnis_deg: draw(self.tonnis_deg),
            sharp_deg: draw(self.sharp_deg),
            crowe_r: draw(self.crowe_r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of studies (two hips each).
    pub n_studies: usize,
    pub distributions: AngleDistributions,
    pub planted: ScoringParams,
    pub ranges: AngleRanges,
    /// Probability of flipping each hip's label.
    pub noise_rate: f64,
    pub seed: u64,
    /// Pose jitter: maximum teardrop-line rotation in degrees.
    pub max_rotation_deg: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_studies: 100,
            distributions: AngleDistributions::default(),
            planted: ScoringParams::default(),
            ranges: AngleRanges::default(),
            noise_rate: 0.0,
            seed: 0,
            max_rotation_deg: 8.0,
        }
    }
}

/// Studies with a single synthetic reader and a fused ground truth whose
/// labels are the planted rule's verdicts on the measured geometry,
/// flipped independently with probability `noise_rate`.
pub fn synth_dataset(config: &SynthConfig) -> Result<Vec<Study>, DataError> {
    if !(0.0..0.5).contains(&config.noise_rate) {
        return Err(DataError::InvalidNoiseRate(config.noise_rate));
    }
    if config.n_studies == 0 {
        return Err(DataError::InvalidTarget("n_studies must be at least 1".into()));
    }
    config.planted.validate().map_err(|e| DataError::InvalidTarget(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = (config.n_studies.max(1) as f64).log10().floor() as usize + 1;
    let mut studies = Vec::with_capacity(config.n_studies);
    for i in 0..config.n_studies {
        let template = PelvisTemplate {
            right_teardrop: Point2D::new(320.0 + rng.random_range(-20.0..20.0), 420.0 + rng.random_range(-20.0..20.0)),
            rotation_deg: if config.max_rotation_deg > 0.0 {
                rng.random_range(-config.max_rotation_deg..config.max_rotation_deg)
            } else {
                0.0
            },
            ..PelvisTemplate::default()
        };
        let right = config.distributions.sample(&mut rng);
        let left = config.distributions.sample(&mut rng);
        let hip_seed: u64 = rng.random();
        let keypoints = synth_pelvis(&right, &left, &template, hip_seed)?;

        let mut diagnosis = PerSide::default();
        for side in HipSide::BOTH {
            let m = measure_hip(&keypoints, side)?;
            let planted = score_hip(&m, &config.planted, &config.ranges).ddh_present;
            let flip = rng.random_bool(config.noise_rate);
            *diagnosis.get_mut(side) = Some(if planted != flip { HipLabel::Ddh } else { HipLabel::Normal });
        }

        let bbox = BBox::around(&keypoints, 30.0);
        let reader = PelvisAnnotation::new("synth", keypoints, bbox);
        let mut ground_truth = PelvisAnnotation::new(FUSED_ANNOTATOR, keypoints, bbox);
        ground_truth.diagnosis = diagnosis;
        studies.push(Study {
            study_id: format!("S{:0width$}", i + 1, width = width.max(5)),
            image: None,
            annotations: vec![reader],
            ground_truth: Some(ground_truth),
        });
    }
    Ok(studies)
}
