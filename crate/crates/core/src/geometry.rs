//! Pelvic reference frame and the radiological measurements built on it.
//!
//! Coordinates are image pixels: origin top-left, `x` to the right, `y`
//! downward. "Superior" therefore means a smaller coordinate along the
//! frame's vertical axis, which is oriented toward decreasing image `y`.
//!
//! All angles are reported in degrees. Sign conventions:
//!
//! * CE angle is positive when the lateral sourcil lies lateral to the
//!   vertical line through the femoral-head center.
//! * Tönnis angle is positive when the lateral sourcil is superior to the
//!   medial sourcil.
//! * Sharp angle is unsigned.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum separation (px) for two points to be considered distinct.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("invalid Crowe ratio {0}: must be finite and non-negative")]
    InvalidRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, other: Point2D) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    pub fn offset(self, v: Vec2) -> Point2D {
        Point2D::new(self.x + v.x, self.y + v.y)
    }

    pub fn distance(self, other: Point2D) -> f64 {
        self.sub(other).norm()
    }

    pub fn midpoint(self, other: Point2D) -> Point2D {
        Point2D::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// Free vector in image space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Patient's anatomical side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HipSide {
    Right,
    Left,
}

impl HipSide {
    pub const BOTH: [HipSide; 2] = [HipSide::Right, HipSide::Left];

    pub fn name(self) -> &'static str {
        match self {
            HipSide::Right => "right",
            HipSide::Left => "left",
        }
    }

    pub fn opposite(self) -> HipSide {
        match self {
            HipSide::Right => HipSide::Left,
            HipSide::Left => HipSide::Right,
        }
    }

    pub fn index(self) -> usize {
        match self {
            HipSide::Right => 0,
            HipSide::Left => 1,
        }
    }
}

impl fmt::Display for HipSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The seven per-hip landmarks, A through G.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Landmark {
    /// (A) inferior boundary of the teardrop
    Teardrop,
    /// (B) center of the femoral head
    FemoralHeadCenter,
    /// (C) lateral edge of the acetabulum
    LateralSourcil,
    /// (D) medial aspect of the acetabulum
    MedialSourcil,
    /// (E) caudal femoral head-neck junction
    HeadNeckJunction,
    /// (F) inferior ischial tuberosity
    InferiorIschium,
    /// (G) superior edge of the iliac crest
    SuperiorIlium,
}

impl Landmark {
    pub const ALL: [Landmark; 7] = [
        Landmark::Teardrop,
        Landmark::FemoralHeadCenter,
        Landmark::LateralSourcil,
        Landmark::MedialSourcil,
        Landmark::HeadNeckJunction,
        Landmark::InferiorIschium,
        Landmark::SuperiorIlium,
    ];

    /// Key used in annotation documents and k-constant tables.
    pub fn key(self) -> &'static str {
        match self {
            Landmark::Teardrop => "teardrop",
            Landmark::FemoralHeadCenter => "fh_center",
            Landmark::LateralSourcil => "lat_sourcil",
            Landmark::MedialSourcil => "med_sourcil",
            Landmark::HeadNeckJunction => "fhn_junction",
            Landmark::InferiorIschium => "inf_ischium",
            Landmark::SuperiorIlium => "sup_ilium",
        }
    }

    pub fn from_key(key: &str) -> Option<Landmark> {
        Landmark::ALL.into_iter().find(|l| l.key() == key)
    }

    pub fn letter(self) -> char {
        (b'A' + self.index() as u8) as char
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Landmarks A–G of one hip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HipKeypoints {
    pub teardrop: Point2D,
    pub fh_center: Point2D,
    pub lat_sourcil: Point2D,
    pub med_sourcil: Point2D,
    pub fhn_junction: Point2D,
    pub inf_ischium: Point2D,
    pub sup_ilium: Point2D,
}

impl HipKeypoints {
    pub fn get(&self, landmark: Landmark) -> Point2D {
        match landmark {
            Landmark::Teardrop => self.teardrop,
            Landmark::FemoralHeadCenter => self.fh_center,
            Landmark::LateralSourcil => self.lat_sourcil,
            Landmark::MedialSourcil => self.med_sourcil,
            Landmark::HeadNeckJunction => self.fhn_junction,
            Landmark::InferiorIschium => self.inf_ischium,
            Landmark::SuperiorIlium => self.sup_ilium,
        }
    }

    pub fn get_mut(&mut self, landmark: Landmark) -> &mut Point2D {
        match landmark {
            Landmark::Teardrop => &mut self.teardrop,
            Landmark::FemoralHeadCenter => &mut self.fh_center,
            Landmark::LateralSourcil => &mut self.lat_sourcil,
            Landmark::MedialSourcil => &mut self.med_sourcil,
            Landmark::HeadNeckJunction => &mut self.fhn_junction,
            Landmark::InferiorIschium => &mut self.inf_ischium,
            Landmark::SuperiorIlium => &mut self.sup_ilium,
        }
    }

    pub fn points(&self) -> [Point2D; 7] {
        Landmark::ALL.map(|l| self.get(l))
    }

    pub fn map(&self, mut f: impl FnMut(Point2D) -> Point2D) -> HipKeypoints {
        let mut out = *self;
        for l in Landmark::ALL {
            *out.get_mut(l) = f(self.get(l));
        }
        out
    }
}

/// Both hips' landmarks: the 14 keypoints of one radiograph.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PelvisKeypoints {
    pub right: HipKeypoints,
    pub left: HipKeypoints,
}

impl PelvisKeypoints {
    pub fn hip(&self, side: HipSide) -> &HipKeypoints {
        match side {
            HipSide::Right => &self.right,
            HipSide::Left => &self.left,
        }
    }

    pub fn hip_mut(&mut self, side: HipSide) -> &mut HipKeypoints {
        match side {
            HipSide::Right => &mut self.right,
            HipSide::Left => &mut self.left,
        }
    }

    pub fn get(&self, side: HipSide, landmark: Landmark) -> Point2D {
        self.hip(side).get(landmark)
    }

    /// Iterates over `(side, landmark, point)` in right-then-left, A-to-G order.
    pub fn iter(&self) -> impl Iterator<Item = (HipSide, Landmark, Point2D)> + '_ {
        HipSide::BOTH
            .into_iter()
            .flat_map(move |s| Landmark::ALL.into_iter().map(move |l| (s, l, self.get(s, l))))
    }

    pub fn map(&self, mut f: impl FnMut(Point2D) -> Point2D) -> PelvisKeypoints {
        PelvisKeypoints {
            right: self.right.map(&mut f),
            left: self.left.map(&mut f),
        }
    }

    /// Name of the first non-finite landmark, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.iter()
            .find(|(_, _, p)| !p.is_finite())
            .map(|(s, l, _)| format!("{}.{}", s.name(), l.key()))
    }
}

/// Inter-teardrop coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFrame {
    /// Right teardrop.
    pub origin: Point2D,
    /// Unit vector from the right teardrop toward the left teardrop.
    pub u_horizontal: Vec2,
    /// Unit vector perpendicular to `u_horizontal`, pointing superiorly.
    pub u_vertical: Vec2,
}

impl ReferenceFrame {
    /// Horizontal direction pointing laterally for the given hip, i.e. from
    /// the contralateral teardrop toward the ipsilateral one.
    pub fn lateral(&self, side: HipSide) -> Vec2 {
        match side {
            HipSide::Right => self.u_horizontal.neg(),
            HipSide::Left => self.u_horizontal,
        }
    }

    /// Frame coordinates `(horizontal, vertical)` of a vector.
    pub fn project(&self, v: Vec2) -> (f64, f64) {
        (v.dot(self.u_horizontal), v.dot(self.u_vertical))
    }

    /// Signed height of a point above the horizontal reference line.
    pub fn height_of(&self, p: Point2D) -> f64 {
        p.sub(self.origin).dot(self.u_vertical)
    }
}

/// Builds the frame from the two teardrop landmarks.
pub fn build_reference_frame(
    right_teardrop: Point2D,
    left_teardrop: Point2D,
) -> Result<ReferenceFrame, GeometryError> {
    let d = left_teardrop.sub(right_teardrop);
    let len = d.norm();
    if !(len > DEGENERACY_TOL) {
        return Err(GeometryError::Degenerate(
            "right.teardrop and left.teardrop coincide".into(),
        ));
    }
    let u_h = d.scale(1.0 / len);
    // Of the two perpendiculars pick the one heading toward smaller image y.
    let cw = Vec2::new(u_h.y, -u_h.x);
    let u_v = if cw.y > 0.0 { cw.neg() } else { cw };
    Ok(ReferenceFrame {
        origin: right_teardrop,
        u_horizontal: u_h,
        u_vertical: u_v,
    })
}

fn checked_vector(from: Point2D, to: Point2D, what: &str) -> Result<Vec2, GeometryError> {
    let v = to.sub(from);
    if !(v.norm() > DEGENERACY_TOL) {
        return Err(GeometryError::Degenerate(what.to_string()));
    }
    Ok(v)
}

fn signed(magnitude: f64, sign_component: f64) -> f64 {
    if sign_component < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Center-edge angle between line B→C and the vertical reference line.
pub fn ce_angle(
    frame: &ReferenceFrame,
    side: HipSide,
    fh_center: Point2D,
    lat_sourcil: Point2D,
) -> Result<f64, GeometryError> {
    let v = checked_vector(
        fh_center,
        lat_sourcil,
        &format!("{side}.fh_center and {side}.lat_sourcil coincide"),
    )?;
    let lateral = v.dot(frame.lateral(side));
    let vertical = v.dot(frame.u_vertical);
    let magnitude = lateral.abs().atan2(vertical.abs()).to_degrees();
    Ok(signed(magnitude, lateral))
}

/// Tönnis angle between line D→C and the horizontal through D.
pub fn tonnis_angle(
    frame: &ReferenceFrame,
    side: HipSide,
    lat_sourcil: Point2D,
    med_sourcil: Point2D,
) -> Result<f64, GeometryError> {
    let v = checked_vector(
        med_sourcil,
        lat_sourcil,
        &format!("{side}.lat_sourcil and {side}.med_sourcil coincide"),
    )?;
    let (horizontal, vertical) = frame.project(v);
    let magnitude = vertical.abs().atan2(horizontal.abs()).to_degrees();
    Ok(signed(magnitude, vertical))
}

/// Sharp angle between line A→C and the horizontal reference line, in `[0, 90)`.
///
/// A lateral sourcil exactly above or below the teardrop (to within
/// [`DEGENERACY_TOL`]) has no acute inclination and is rejected.
pub fn sharp_angle(
    frame: &ReferenceFrame,
    teardrop: Point2D,
    lat_sourcil: Point2D,
) -> Result<f64, GeometryError> {
    sharp_angle_named(frame, teardrop, lat_sourcil, "teardrop", "lat_sourcil")
}

fn sharp_angle_named(
    frame: &ReferenceFrame,
    teardrop: Point2D,
    lat_sourcil: Point2D,
    teardrop_name: &str,
    sourcil_name: &str,
) -> Result<f64, GeometryError> {
    let v = checked_vector(
        teardrop,
        lat_sourcil,
        &format!("{teardrop_name} and {sourcil_name} coincide"),
    )?;
    let (horizontal, vertical) = frame.project(v);
    if !(horizontal.abs() > DEGENERACY_TOL) {
        return Err(GeometryError::Degenerate(format!(
            "{sourcil_name} lies on the vertical through {teardrop_name}"
        )));
    }
    Ok(vertical.abs().atan2(horizontal.abs()).to_degrees())
}

/// Signed distance of E from the horizontal reference line, positive superior.
pub fn proximal_displacement(frame: &ReferenceFrame, fhn_junction: Point2D) -> f64 {
    frame.height_of(fhn_junction)
}

/// Vertical distance between the ilium midpoint and the ischium midpoint.
pub fn pelvic_height(
    frame: &ReferenceFrame,
    inf_ischium_right: Point2D,
    inf_ischium_left: Point2D,
    sup_ilium_right: Point2D,
    sup_ilium_left: Point2D,
) -> Result<f64, GeometryError> {
    let ischium = inf_ischium_right.midpoint(inf_ischium_left);
    let ilium = sup_ilium_right.midpoint(sup_ilium_left);
    let height = (frame.height_of(ilium) - frame.height_of(ischium)).abs();
    if !(height > DEGENERACY_TOL) {
        return Err(GeometryError::Degenerate(
            "sup_ilium and inf_ischium midpoints have zero pelvic height".into(),
        ));
    }
    Ok(height)
}

/// Crowe severity grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CroweGrade {
    I,
    II,
    III,
    IV,
}

impl CroweGrade {
    pub const ALL: [CroweGrade; 4] = [CroweGrade::I, CroweGrade::II, CroweGrade::III, CroweGrade::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            CroweGrade::I => "I",
            CroweGrade::II => "II",
            CroweGrade::III => "III",
            CroweGrade::IV => "IV",
        }
    }

    pub fn parse(s: &str) -> Option<CroweGrade> {
        CroweGrade::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

impl fmt::Display for CroweGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grades the displacement ratio: `I` below 0.1, `II` on `[0.1, 0.15]`,
/// `III` on `(0.15, 0.2]`, `IV` above 0.2.
pub fn crowe_grade(r: f64) -> Result<CroweGrade, GeometryError> {
    if !r.is_finite() || r < 0.0 {
        return Err(GeometryError::InvalidRatio(r));
    }
    Ok(if r < 0.1 {
        CroweGrade::I
    } else if r <= 0.15 {
        CroweGrade::II
    } else if r <= 0.20 {
        CroweGrade::III
    } else {
        CroweGrade::IV
    })
}

/// All measurements of one hip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleMeasurements {
    pub side: HipSide,
    pub ce_deg: f64,
    pub tonnis_deg: f64,
    pub sharp_deg: f64,
    pub proximal_displacement_px: f64,
    pub pelvic_height_px: f64,
    pub crowe_ratio_r: f64,
}

impl AngleMeasurements {
    pub fn crowe_grade(&self) -> CroweGrade {
        // r is clamped non-negative and finite at construction.
        crowe_grade(self.crowe_ratio_r).unwrap_or(CroweGrade::I)
    }
}

/// Measures one hip from the full set of 14 keypoints.
pub fn measure_hip(
    keypoints: &PelvisKeypoints,
    side: HipSide,
) -> Result<AngleMeasurements, GeometryError> {
    if let Some(name) = keypoints.first_non_finite() {
        return Err(GeometryError::Degenerate(format!("{name} is not finite")));
    }
    let frame = build_reference_frame(keypoints.right.teardrop, keypoints.left.teardrop)?;
    let hip = keypoints.hip(side);
    let ce_deg = ce_angle(&frame, side, hip.fh_center, hip.lat_sourcil)?;
    let tonnis_deg = tonnis_angle(&frame, side, hip.lat_sourcil, hip.med_sourcil)?;
    let sharp_deg = sharp_angle_named(
        &frame,
        hip.teardrop,
        hip.lat_sourcil,
        &format!("{side}.teardrop"),
        &format!("{side}.lat_sourcil"),
    )?;
    let proximal_displacement_px = proximal_displacement(&frame, hip.fhn_junction);
    let pelvic_height_px = pelvic_height(
        &frame,
        keypoints.right.inf_ischium,
        keypoints.left.inf_ischium,
        keypoints.right.sup_ilium,
        keypoints.left.sup_ilium,
    )?;
    let crowe_ratio_r = proximal_displacement_px.max(0.0) / pelvic_height_px;
    Ok(AngleMeasurements {
        side,
        ce_deg,
        tonnis_deg,
        sharp_deg,
        proximal_displacement_px,
        pelvic_height_px,
        crowe_ratio_r,
    })
}

/// Measures both hips, right first.
pub fn measure_pelvis(keypoints: &PelvisKeypoints) -> Result<[AngleMeasurements; 2], GeometryError> {
    Ok([
        measure_hip(keypoints, HipSide::Right)?,
        measure_hip(keypoints, HipSide::Left)?,
    ])
}
