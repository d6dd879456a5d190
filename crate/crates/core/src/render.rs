//! SVG overlay of landmarks, construction lines and measured values.

use std::fmt::Write as _;

use crate::data::{BBox, ImageRef};
use crate::geometry::{
    build_reference_frame, measure_hip, GeometryError, HipSide, Landmark, PelvisKeypoints, Point2D,
    ReferenceFrame, Vec2,
};
use crate::scoring::{score_hip, AngleClass, AngleRanges, ScoringParams};

/// Fill used for values in the DDH range.
pub const DDH_COLOR: &str = "#d62728";
const LINE_COLOR: &str = "#1f77b4";
const AUX_COLOR: &str = "#7f7f7f";
const TEXT_COLOR: &str = "#222222";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canvas {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Canvas {
    /// The full image when its size is known, else the pelvic box with
    /// room for the text panel.
    pub fn for_study(image: Option<&ImageRef>, bbox: &BBox) -> Canvas {
        match image {
            Some(img) => Canvas { x: 0.0, y: 0.0, width: img.width as f64, height: img.height as f64 },
            None => Canvas { x: bbox.x - 20.0, y: bbox.y - 20.0, width: bbox.w + 40.0, height: bbox.h + 160.0 },
        }
    }
}

pub struct OverlayInput<'a> {
    pub study_id: &'a str,
    pub keypoints: &'a PelvisKeypoints,
    pub canvas: Canvas,
    /// Radiograph drawn underneath, referenced by path.
    pub image_href: Option<&'a str>,
    pub params: &'a ScoringParams,
    pub ranges: &'a AngleRanges,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn line(out: &mut String, class: &str, a: Point2D, b: Point2D, color: &str, dashed: bool) {
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(
        out,
        r#"<line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
        a.x, a.y, b.x, b.y
    );
}

fn unit(v: Vec2) -> Vec2 {
    let n = v.norm();
    if n > 0.0 {
        v.scale(1.0 / n)
    } else {
        v
    }
}

/// Arc of radius `r` around `center` from direction `from` to direction `to`
/// through the smaller angle.
fn arc(out: &mut String, class: &str, center: Point2D, from: Vec2, to: Vec2, r: f64) {
    let (a, b) = (unit(from), unit(to));
    let cross = a.x * b.y - a.y * b.x;
    if cross.abs() < 1e-9 && a.dot(b) > 0.0 {
        return;
    }
    let start = center.offset(a.scale(r));
    let end = center.offset(b.scale(r));
    let sweep = u8::from(cross > 0.0);
    let _ = writeln!(
        out,
        r#"<path class="{class}" d="M {:.2} {:.2} A {r:.2} {r:.2} 0 0 {sweep} {:.2} {:.2}" fill="none" stroke="{AUX_COLOR}" stroke-width="1.5"/>"#,
        start.x, start.y, end.x, end.y
    );
}

fn hip_lines(out: &mut String, frame: &ReferenceFrame, kp: &PelvisKeypoints, side: HipSide) {
    let hip = kp.hip(side);
    let up = frame.u_vertical;
    let lat = frame.lateral(side);
    let s = side.name();
    let bc = hip.lat_sourcil.sub(hip.fh_center).norm().max(20.0);

    let vertical_top = hip.fh_center.offset(up.scale(bc * 1.3));
    line(out, &format!("vertical {s}"), hip.fh_center, vertical_top, AUX_COLOR, true);
    line(out, &format!("ce-line {s}"), hip.fh_center, hip.lat_sourcil, LINE_COLOR, false);
    arc(out, &format!("ce-arc {s}"), hip.fh_center, up, hip.lat_sourcil.sub(hip.fh_center), bc * 0.5);

    let dc = hip.lat_sourcil.sub(hip.med_sourcil).norm().max(10.0);
    line(out, &format!("tonnis-line {s}"), hip.med_sourcil, hip.lat_sourcil, LINE_COLOR, false);
    line(out, &format!("horizontal {s}"), hip.med_sourcil, hip.med_sourcil.offset(lat.scale(dc * 1.3)), AUX_COLOR, true);
    arc(out, &format!("tonnis-arc {s}"), hip.med_sourcil, lat, hip.lat_sourcil.sub(hip.med_sourcil), dc * 0.6);

    let ac = hip.lat_sourcil.sub(hip.teardrop).norm().max(20.0);
    line(out, &format!("sharp-line {s}"), hip.teardrop, hip.lat_sourcil, LINE_COLOR, false);
    arc(out, &format!("sharp-arc {s}"), hip.teardrop, lat, hip.lat_sourcil.sub(hip.teardrop), ac * 0.35);
}

fn value_span(out: &mut String, label: &str, value: f64, class: AngleClass) {
    if class == AngleClass::Ddh {
        let _ = write!(out, r#"<tspan class="ddh" fill="{DDH_COLOR}">{label} {value:.1}°</tspan> "#);
    } else {
        let _ = write!(out, r#"<tspan class="{}">{label} {value:.1}°</tspan> "#, class.as_str());
    }
}

/// Renders the overlay. Fails only when the keypoints cannot be measured.
pub fn render_overlay(input: &OverlayInput<'_>) -> Result<String, GeometryError> {
    let kp = input.keypoints;
    let frame = build_reference_frame(kp.right.teardrop, kp.left.teardrop)?;
    let c = input.canvas;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" viewBox="{:.2} {:.2} {:.2} {:.2}" width="{:.0}" height="{:.0}">"#,
        c.x, c.y, c.width, c.height, c.width, c.height
    );
    let _ = writeln!(out, "<title>{}</title>", escape(input.study_id));
    if let Some(href) = input.image_href {
        let _ = writeln!(
            out,
            r#"<image href="{0}" xlink:href="{0}" x="0" y="0" width="{1:.0}" height="{2:.0}"/>"#,
            escape(href),
            c.width,
            c.height
        );
    }

    let span = kp.left.teardrop.sub(kp.right.teardrop);
    line(
        &mut out,
        "teardrop-line",
        kp.right.teardrop.offset(span.scale(-0.6)),
        kp.left.teardrop.offset(span.scale(0.6)),
        AUX_COLOR,
        true,
    );
    for side in HipSide::BOTH {
        hip_lines(&mut out, &frame, kp, side);
    }
    for (side, landmark, p) in kp.iter() {
        let _ = writeln!(
            out,
            r##"<circle class="keypoint" data-side="{}" data-landmark="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{LINE_COLOR}" stroke="#ffffff" stroke-width="1"/>"##,
            side.name(),
            landmark.key(),
            p.x,
            p.y
        );
        if landmark == Landmark::Teardrop || landmark == Landmark::LateralSourcil {
            let _ = writeln!(
                out,
                r#"<text class="label" x="{:.2}" y="{:.2}" font-size="11" fill="{TEXT_COLOR}">{}</text>"#,
                p.x + 6.0,
                p.y - 6.0,
                landmark.letter()
            );
        }
    }

    let panel_x = c.x + 10.0;
    let mut panel_y = c.y + c.height - 60.0;
    let _ = writeln!(out, r#"<g class="panel" font-family="sans-serif" font-size="13" fill="{TEXT_COLOR}">"#);
    for side in HipSide::BOTH {
        let m = measure_hip(kp, side)?;
        let d = score_hip(&m, input.params, input.ranges);
        let _ = write!(out, r#"<text x="{panel_x:.2}" y="{panel_y:.2}"><tspan>{}:</tspan> "#, side.name());
        value_span(&mut out, "CE", m.ce_deg, d.classes[0]);
        value_span(&mut out, "Tönnis", m.tonnis_deg, d.classes[1]);
        value_span(&mut out, "Sharp", m.sharp_deg, d.classes[2]);
        let verdict = if d.ddh_present {
            format!(r#"<tspan class="ddh" fill="{DDH_COLOR}">score {} DDH, Crowe {}</tspan>"#, d.total_score, m.crowe_grade())
        } else {
            format!("<tspan>score {} no DDH</tspan>", d.total_score)
        };
        let _ = writeln!(out, "{verdict}</text>");
        panel_y += 20.0;
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synth_pelvis, HipTargets, PelvisTemplate};

    fn render(right: HipTargets, left: HipTargets) -> String {
        let kp = synth_pelvis(&right, &left, &PelvisTemplate::default(), 2).unwrap();
        let bbox = BBox::around(&kp, 30.0);
        render_overlay(&OverlayInput {
            study_id: "S<1>",
            keypoints: &kp,
            canvas: Canvas::for_study(None, &bbox),
            image_href: None,
            params: &ScoringParams::default(),
            ranges: &AngleRanges::default(),
        })
        .unwrap()
    }

    #[test]
    fn normal_hips_have_no_red() {
        let t = HipTargets::new(32.0, 5.0, 38.0, 0.0);
        let svg = render(t, t);
        assert_eq!(svg.matches(r#"class="keypoint""#).count(), 14);
        assert!(!svg.contains(DDH_COLOR));
        assert!(svg.contains("S&lt;1&gt;"));
        assert!(svg.contains("CE 32.0°"));
    }

    #[test]
    fn ddh_values_highlighted() {
        let sick = HipTargets::new(12.0, 16.0, 44.0, 0.3);
        let fine = HipTargets::new(32.0, 5.0, 38.0, 0.0);
        let svg = render(sick, fine);
        assert_eq!(svg.matches(r#"class="ddh""#).count(), 3);
        assert!(svg.contains("CE 12.0°"));
        assert!(svg.contains("Crowe IV"));
    }
}
