//! CSV tables of per-hip measurements and diagnoses.

use crate::geometry::{measure_pelvis, AngleMeasurements, GeometryError, HipSide, PelvisKeypoints};
use crate::metrics::fmt_f64;
use crate::scoring::{score_hip, AngleRanges, Diagnosis, ScoringParams};

/// Measurements and diagnosis of one hip of one study.
#[derive(Debug, Clone, PartialEq)]
pub struct HipRow {
    pub study_id: String,
    pub measurements: AngleMeasurements,
    pub diagnosis: Diagnosis,
}

impl HipRow {
    /// Rows for both hips, right first.
    pub fn for_pelvis(
        study_id: &str,
        keypoints: &PelvisKeypoints,
        params: &ScoringParams,
        ranges: &AngleRanges,
    ) -> Result<[HipRow; 2], GeometryError> {
        Ok(measure_pelvis(keypoints)?.map(|m| HipRow {
            study_id: study_id.to_string(),
            diagnosis: score_hip(&m, params, ranges),
            measurements: m,
        }))
    }

    pub fn side(&self) -> HipSide {
        self.measurements.side
    }
}

fn sorted(rows: &[HipRow]) -> Vec<&HipRow> {
    let mut out: Vec<&HipRow> = rows.iter().collect();
    out.sort_by(|a, b| a.study_id.cmp(&b.study_id).then(a.side().index().cmp(&b.side().index())));
    out
}

fn write_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in records {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing memory writer")).expect("csv output is utf-8")
}

pub const MEASUREMENT_COLUMNS: [&str; 14] = [
    "study_id",
    "side",
    "ce_deg",
    "tonnis_deg",
    "sharp_deg",
    "displacement_px",
    "pelvic_height_px",
    "crowe_r",
    "crowe_grade",
    "ce_class",
    "tonnis_class",
    "sharp_class",
    "total_score",
    "verdict",
];

pub const DIAGNOSIS_COLUMNS: [&str; 15] = [
    "study_id",
    "side",
    "ce_deg",
    "ce_class",
    "ce_score",
    "tonnis_deg",
    "tonnis_class",
    "tonnis_score",
    "sharp_deg",
    "sharp_class",
    "sharp_score",
    "total_score",
    "threshold",
    "verdict",
    "crowe_stage",
];

/// One line per hip, sorted by study id with the right hip first.
pub fn measurement_table(rows: &[HipRow]) -> String {
    write_csv(
        &MEASUREMENT_COLUMNS,
        sorted(rows).into_iter().map(|r| {
            let m = &r.measurements;
            let d = &r.diagnosis;
            vec![
                r.study_id.clone(),
                m.side.name().to_string(),
                fmt_f64(m.ce_deg),
                fmt_f64(m.tonnis_deg),
                fmt_f64(m.sharp_deg),
                fmt_f64(m.proximal_displacement_px),
                fmt_f64(m.pelvic_height_px),
                fmt_f64(m.crowe_ratio_r),
                m.crowe_grade().as_str().to_string(),
                d.classes[0].as_str().to_string(),
                d.classes[1].as_str().to_string(),
                d.classes[2].as_str().to_string(),
                d.total_score.to_string(),
                d.verdict_str().to_string(),
            ]
        }),
    )
}

/// Per-angle classes and scores with the verdict; the Crowe stage is `-`
/// for hips without DDH.
pub fn diagnosis_table(rows: &[HipRow]) -> String {
    write_csv(
        &DIAGNOSIS_COLUMNS,
        sorted(rows).into_iter().map(|r| {
            let m = &r.measurements;
            let d = &r.diagnosis;
            let mut rec = vec![r.study_id.clone(), m.side.name().to_string()];
            for (i, value) in [m.ce_deg, m.tonnis_deg, m.sharp_deg].into_iter().enumerate() {
                rec.push(fmt_f64(value));
                rec.push(d.classes[i].as_str().to_string());
                rec.push(d.scores[i].to_string());
            }
            rec.push(d.total_score.to_string());
            rec.push(d.threshold.to_string());
            rec.push(d.verdict_str().to_string());
            rec.push(d.crowe.map_or("-".to_string(), |g| g.as_str().to_string()));
            rec
        }),
    )
}
