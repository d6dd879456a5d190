use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hipmetrics_core::data::{
    diagnosis_table, measurement_table, parse_dataset, serialize_dataset, synth_dataset, HipLabel, HipRow,
    PelvisAnnotation, Study, SynthConfig,
};
use hipmetrics_core::geometry::{measure_pelvis, AngleMeasurements, CroweGrade, HipSide, Landmark, PelvisKeypoints};
use hipmetrics_core::metrics::{
    bland_altman, confusion_f1, default_oks_thresholds, estimate_k_constants, fmt_f64, icc_absolute_agreement,
    map_mar, GroundTruthInstance, KConstants, KvReport, RepeatedAnnotations, ScoredDetection,
};
use hipmetrics_core::render::{render_overlay, Canvas, OverlayInput};
use hipmetrics_core::scoring::{
    fit_scoring_params, score_hip, AngleRanges, ScoringParams, SearchSpace,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::{Cli, Command, Format, GlobalArgs};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Measure => cmd_measure(g),
        Command::Diagnose { render } => cmd_diagnose(g, render.as_deref()),
        Command::Fit { save } => cmd_fit(g, save.as_deref()),
        Command::EvalKeypoints { detections } => cmd_eval_keypoints(g, detections),
        Command::EvalAngles { compare } => cmd_eval_angles(g, compare.as_deref()),
        Command::EvalDiagnosis { compare } => cmd_eval_diagnosis(g, compare.as_deref()),
        Command::Kconst { save } => cmd_kconst(g, save.as_deref()),
        Command::Synth { n, noise } => cmd_synth(g, *n, *noise),
        Command::Render => cmd_render(g),
        Command::Serve { addr } => cmd_serve(g, *addr),
    }
}

fn input_path(g: &GlobalArgs) -> Result<&Path, CliError> {
    let path = g.input.as_deref().ok_or_else(|| CliError::Other("--input is required".into()))?;
    if !path.exists() {
        return Err(CliError::Other(format!("input {} does not exist", path.display())));
    }
    Ok(path)
}

fn load(path: &Path) -> Result<Vec<Study>, CliError> {
    let mut studies = parse_dataset(path)?;
    studies.sort_by(|a, b| a.study_id.cmp(&b.study_id));
    Ok(studies)
}

fn load_params(g: &GlobalArgs) -> Result<ScoringParams, CliError> {
    match &g.params {
        Some(p) => Ok(ScoringParams::load(p)?),
        None => Ok(ScoringParams::default()),
    }
}

fn load_kconst(g: &GlobalArgs) -> Result<KConstants, CliError> {
    match &g.kconst {
        Some(p) => Ok(KConstants::load(p)?),
        None => Ok(KConstants::bundled()),
    }
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_thresholds(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Other(format!("invalid --thresholds '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if text.contains(':') {
        let parts: Vec<f64> = text.split(':').map(num).collect::<Result<_, _>>()?;
        let [start, step, stop] = parts[..] else { return Err(bad()) };
        if !(step > 0.0 && stop >= start) {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Rounded so that 0.5 + 3 * 0.05 prints as 0.65.
        (0..count).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(bad());
    }
    Ok(values)
}

fn thresholds(g: &GlobalArgs) -> Result<Vec<f64>, CliError> {
    g.thresholds.as_deref().map_or_else(|| Ok(default_oks_thresholds()), parse_thresholds)
}

fn emit(g: &GlobalArgs, text: &str) -> Result<(), CliError> {
    match &g.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Applies `--lenient` to a per-study geometry failure.
fn skip_or_fail<T>(g: &GlobalArgs, study_id: &str, result: Result<T, CliError>) -> Result<Option<T>, CliError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(CliError::Geometry(msg)) if g.lenient => {
            log::warn!("skipping study '{study_id}': {msg}");
            Ok(None)
        }
        Err(CliError::Geometry(msg)) => Err(CliError::Geometry(format!("study '{study_id}': {msg}"))),
        Err(e) => Err(e),
    }
}

fn reference(study: &Study) -> Result<PelvisAnnotation, CliError> {
    Ok(study.reference_annotation()?.into_owned())
}

/// Both hip rows of every measurable study, in study order.
fn hip_rows(
    g: &GlobalArgs,
    studies: &[Study],
    params: &ScoringParams,
    ranges: &AngleRanges,
) -> Result<Vec<(usize, [HipRow; 2])>, CliError> {
    let results: Vec<Result<[HipRow; 2], CliError>> = studies
        .par_iter()
        .map(|s| {
            let gt = reference(s)?;
            Ok(HipRow::for_pelvis(&s.study_id, &gt.keypoints, params, ranges)?)
        })
        .collect();
    let mut out = Vec::with_capacity(studies.len());
    for (i, (study, r)) in studies.iter().zip(results).enumerate() {
        if let Some(rows) = skip_or_fail(g, &study.study_id, r)? {
            out.push((i, rows));
        }
    }
    Ok(out)
}

fn flatten(rows: &[(usize, [HipRow; 2])]) -> Vec<HipRow> {
    rows.iter().flat_map(|(_, r)| r.iter().cloned()).collect()
}

fn cmd_measure(g: &GlobalArgs) -> Result<(), CliError> {
    let studies = load(input_path(g)?)?;
    let rows = hip_rows(g, &studies, &load_params(g)?, &AngleRanges::default())?;
    let hips = flatten(&rows);
    let text = match g.format {
        Format::Table => measurement_table(&hips),
        Format::Report => {
            let mut r = KvReport::new();
            r.int("studies", studies.len() as i64)
                .int("measured_studies", rows.len() as i64)
                .int("skipped_studies", (studies.len() - rows.len()) as i64)
                .int("hips", hips.len() as i64);
            for side in HipSide::BOTH {
                let ms: Vec<&AngleMeasurements> =
                    hips.iter().filter(|h| h.side() == side).map(|h| &h.measurements).collect();
                if ms.is_empty() {
                    continue;
                }
                let mean = |f: fn(&AngleMeasurements) -> f64| ms.iter().map(|m| f(m)).sum::<f64>() / ms.len() as f64;
                r.num(format!("{side}.ce_deg.mean"), mean(|m| m.ce_deg))
                    .num(format!("{side}.tonnis_deg.mean"), mean(|m| m.tonnis_deg))
                    .num(format!("{side}.sharp_deg.mean"), mean(|m| m.sharp_deg))
                    .num(format!("{side}.crowe_r.mean"), mean(|m| m.crowe_ratio_r));
                for grade in CroweGrade::ALL {
                    let n = ms.iter().filter(|m| m.crowe_grade() == grade).count();
                    r.int(format!("{side}.crowe_{grade}"), n as i64);
                }
            }
            r.render()
        }
    };
    emit(g, &text)
}

fn diagnosis_report(hips: &[HipRow]) -> String {
    let mut r = KvReport::new();
    let present = hips.iter().filter(|h| h.diagnosis.ddh_present).count();
    r.int("hips", hips.len() as i64)
        .int("ddh_present", present as i64)
        .int("ddh_absent", (hips.len() - present) as i64);
    for h in hips {
        let d = &h.diagnosis;
        let summary = match d.crowe {
            Some(grade) => format!("DDH present, Crowe {grade} (score {}/{})", d.total_score, d.threshold),
            None => format!("DDH absent (score {}/{})", d.total_score, d.threshold),
        };
        r.text(format!("{}.{}", h.study_id, h.side()), summary);
    }
    r.render()
}

fn image_root(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.to_path_buf()
    } else {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn write_overlays(
    dir: &Path,
    input: &Path,
    studies: &[Study],
    rows: &[(usize, [HipRow; 2])],
    params: &ScoringParams,
    ranges: &AngleRanges,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    let root = image_root(input);
    let results: Vec<Result<(), CliError>> = rows
        .par_iter()
        .map(|(i, _)| {
            let study = &studies[*i];
            let gt = reference(study)?;
            let href = study.image.as_ref().map(|img| root.join(&img.path).display().to_string());
            let svg = render_overlay(&OverlayInput {
                study_id: &study.study_id,
                keypoints: &gt.keypoints,
                canvas: Canvas::for_study(study.image.as_ref(), &gt.bbox),
                image_href: href.as_deref(),
                params,
                ranges,
            })?;
            let path = dir.join(format!("{}.svg", study.study_id));
            fs::write(&path, svg).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
        })
        .collect();
    results.into_iter().collect()
}

fn cmd_diagnose(g: &GlobalArgs, render: Option<&Path>) -> Result<(), CliError> {
    let input = input_path(g)?;
    let studies = load(input)?;
    let params = load_params(g)?;
    let ranges = AngleRanges::default();
    let rows = hip_rows(g, &studies, &params, &ranges)?;
    if let Some(dir) = render {
        write_overlays(dir, input, &studies, &rows, &params, &ranges)?;
    }
    let hips = flatten(&rows);
    let text = match g.format {
        Format::Table => diagnosis_table(&hips),
        Format::Report => diagnosis_report(&hips),
    };
    emit(g, &text)
}

fn cmd_render(g: &GlobalArgs) -> Result<(), CliError> {
    let input = input_path(g)?;
    let dir = g.output.as_deref().ok_or_else(|| CliError::Other("render needs --output <dir>".into()))?;
    let studies = load(input)?;
    let params = load_params(g)?;
    let ranges = AngleRanges::default();
    let rows = hip_rows(g, &studies, &params, &ranges)?;
    write_overlays(dir, input, &studies, &rows, &params, &ranges)
}

/// Hips with a normal or DDH label; other and unlabelled hips are left out.
fn labelled_hips(g: &GlobalArgs, studies: &[Study]) -> Result<Vec<(AngleMeasurements, bool)>, CliError> {
    let per_study: Vec<Result<Vec<(AngleMeasurements, bool)>, CliError>> = studies
        .par_iter()
        .map(|s| {
            let gt = reference(s)?;
            let ms = measure_pelvis(&gt.keypoints)?;
            Ok(HipSide::BOTH
                .iter()
                .filter_map(|&side| match gt.diagnosis.get(side) {
                    Some(HipLabel::Ddh) => Some((ms[side.index()], true)),
                    Some(HipLabel::Normal) => Some((ms[side.index()], false)),
                    _ => None,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for (s, r) in studies.iter().zip(per_study) {
        if let Some(hips) = skip_or_fail(g, &s.study_id, r)? {
            out.extend(hips);
        }
    }
    Ok(out)
}

fn cmd_fit(g: &GlobalArgs, save: Option<&Path>) -> Result<(), CliError> {
    let studies = load(input_path(g)?)?;
    let data = labelled_hips(g, &studies)?;
    let fit = fit_scoring_params(&data, &SearchSpace::default(), &AngleRanges::default())?;
    if let Some(path) = save {
        fs::write(path, fit.params.to_toml()).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    }
    let text = match g.format {
        Format::Table => {
            let mut out = String::from(
                "threshold,kappa,ce_borderline,ce_ddh,tonnis_borderline,tonnis_ddh,sharp_borderline,sharp_ddh\n",
            );
            for c in &fit.threshold_curve {
                let p = &c.params;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    p.threshold,
                    fmt_f64(c.kappa),
                    p.ce.borderline,
                    p.ce.ddh,
                    p.tonnis.borderline,
                    p.tonnis.ddh,
                    p.sharp.borderline,
                    p.sharp.ddh
                ));
            }
            out
        }
        Format::Report => {
            let p = &fit.params;
            let mut r = KvReport::new();
            r.int("hips", data.len() as i64)
                .int("ddh_hips", data.iter().filter(|(_, l)| *l).count() as i64)
                .int("candidates", fit.candidates_evaluated as i64)
                .num("kappa", fit.kappa)
                .int("threshold", p.threshold)
                .int("ce.borderline", p.ce.borderline)
                .int("ce.ddh", p.ce.ddh)
                .int("tonnis.borderline", p.tonnis.borderline)
                .int("tonnis.ddh", p.tonnis.ddh)
                .int("sharp.borderline", p.sharp.borderline)
                .int("sharp.ddh", p.sharp.ddh);
            for c in &fit.threshold_curve {
                r.num(format!("kappa_at_threshold.{}", c.params.threshold), c.kappa);
            }
            r.render()
        }
    };
    emit(g, &text)
}

fn cmd_eval_keypoints(g: &GlobalArgs, detections_path: &Path) -> Result<(), CliError> {
    let studies = load(input_path(g)?)?;
    let detected = load(detections_path)?;
    let k = load_kconst(g)?;
    let thresholds = thresholds(g)?;

    let mut ground_truth = Vec::with_capacity(studies.len());
    let mut index = BTreeMap::new();
    for (i, s) in studies.iter().enumerate() {
        let gt = reference(s)?;
        ground_truth.push(GroundTruthInstance { keypoints: gt.keypoints, scale: gt.bbox.scale() });
        index.insert(s.study_id.as_str(), i);
    }
    let mut detections = Vec::new();
    for s in &detected {
        let &gt_index = index.get(s.study_id.as_str()).ok_or_else(|| {
            CliError::Schema(format!("detections reference unknown study '{}'", s.study_id))
        })?;
        for a in &s.annotations {
            detections.push(ScoredDetection { gt_index, keypoints: a.keypoints, score: a.score });
        }
    }
    let report = map_mar(&detections, &ground_truth, &k, &thresholds)?;
    let text = match g.format {
        Format::Table => {
            let mut out = String::from("threshold,ap,ar\n");
            for row in &report.per_threshold {
                out.push_str(&format!("{},{},{}\n", fmt_f64(row.threshold), fmt_f64(row.ap), fmt_f64(row.ar)));
            }
            out.push_str(&format!("mean,{},{}\n", fmt_f64(report.map), fmt_f64(report.mar)));
            out
        }
        Format::Report => {
            let mut r = KvReport::new();
            r.int("studies", studies.len() as i64)
                .int("detections", detections.len() as i64)
                .num("map", report.map)
                .num("mar", report.mar);
            for (side, l, ap, ar) in &report.per_keypoint {
                r.num(format!("{side}.{}.ap", l.key()), *ap).num(format!("{side}.{}.ar", l.key()), *ar);
            }
            r.render()
        }
    };
    emit(g, &text)
}

type Extract = fn(&AngleMeasurements) -> f64;

const ANGLES: [(&str, Extract); 4] = [
    ("ce_deg", |m| m.ce_deg),
    ("tonnis_deg", |m| m.tonnis_deg),
    ("sharp_deg", |m| m.sharp_deg),
    ("crowe_r", |m| m.crowe_ratio_r),
];

/// Keypoint sets per study, one per rater.
fn rater_keypoints(studies: &[Study], compare: Option<&[Study]>) -> Result<Vec<(String, Vec<PelvisKeypoints>)>, CliError> {
    match compare {
        Some(other) => {
            let by_id: BTreeMap<&str, &Study> = other.iter().map(|s| (s.study_id.as_str(), s)).collect();
            studies
                .iter()
                .map(|s| {
                    let o = by_id
                        .get(s.study_id.as_str())
                        .ok_or_else(|| CliError::Schema(format!("study '{}' missing from --compare", s.study_id)))?;
                    Ok((s.study_id.clone(), vec![reference(s)?.keypoints, reference(o)?.keypoints]))
                })
                .collect()
        }
        None => {
            let raters = studies.first().map_or(0, |s| s.annotations.len());
            if raters < 2 {
                return Err(CliError::Schema("need --compare or at least two annotations per study".into()));
            }
            studies
                .iter()
                .map(|s| {
                    if s.annotations.len() != raters {
                        return Err(CliError::Schema(format!(
                            "study '{}' has {} annotations, expected {raters}",
                            s.study_id,
                            s.annotations.len()
                        )));
                    }
                    Ok((s.study_id.clone(), s.annotations.iter().map(|a| a.keypoints).collect()))
                })
                .collect()
        }
    }
}

fn cmd_eval_angles(g: &GlobalArgs, compare: Option<&Path>) -> Result<(), CliError> {
    let studies = load(input_path(g)?)?;
    let other = compare.map(load).transpose()?;
    let sets = rater_keypoints(&studies, other.as_deref())?;

    // One subject per hip; each rater contributes one measurement.
    let measured: Vec<Result<Vec<[AngleMeasurements; 2]>, CliError>> = sets
        .par_iter()
        .map(|(_, kps)| kps.iter().map(|kp| Ok(measure_pelvis(kp)?)).collect())
        .collect();
    let mut subjects: Vec<Vec<AngleMeasurements>> = Vec::new();
    for ((id, _), r) in sets.iter().zip(measured) {
        if let Some(per_rater) = skip_or_fail(g, id, r)? {
            for side in HipSide::BOTH {
                subjects.push(per_rater.iter().map(|m| m[side.index()]).collect());
            }
        }
    }

    let mut table = String::from("angle,subjects,raters,icc,ci_low,ci_high,bias,sd,loa_low,loa_high\n");
    let mut report = KvReport::new();
    report.int("subjects", subjects.len() as i64);
    for (name, f) in ANGLES {
        let ratings: Vec<Vec<f64>> = subjects.iter().map(|s| s.iter().map(f).collect()).collect();
        let icc = icc_absolute_agreement(&ratings)?;
        let pairs: Vec<(f64, f64)> = ratings.iter().map(|r| (r[1], r[0])).collect();
        let ba = bland_altman(&pairs)?;
        let raters = ratings.first().map_or(0, Vec::len);
        table.push_str(&format!(
            "{name},{},{raters},{},{},{},{},{},{},{}\n",
            ratings.len(),
            fmt_f64(icc.icc),
            fmt_f64(icc.ci_low),
            fmt_f64(icc.ci_high),
            fmt_f64(ba.mean_diff),
            fmt_f64(ba.sd_diff),
            fmt_f64(ba.loa_low),
            fmt_f64(ba.loa_high)
        ));
        report
            .num(format!("{name}.icc"), icc.icc)
            .num(format!("{name}.icc_ci_low"), icc.ci_low)
            .num(format!("{name}.icc_ci_high"), icc.ci_high)
            .num(format!("{name}.bias"), ba.mean_diff)
            .num(format!("{name}.loa_low"), ba.loa_low)
            .num(format!("{name}.loa_high"), ba.loa_high);
    }
    emit(g, &match g.format {
        Format::Table => table,
        Format::Report => report.render(),
    })
}

fn cmd_eval_diagnosis(g: &GlobalArgs, compare: Option<&Path>) -> Result<(), CliError> {
    let studies = load(input_path(g)?)?;
    let params = load_params(g)?;
    let ranges = AngleRanges::default();
    let other = compare.map(load).transpose()?;
    let by_id: BTreeMap<&str, &Study> =
        other.iter().flatten().map(|s| (s.study_id.as_str(), s)).collect();

    let per_study: Vec<Result<Vec<(HipLabel, HipLabel)>, CliError>> = studies
        .par_iter()
        .map(|s| {
            let truth = reference(s)?;
            let source = match &other {
                Some(_) => *by_id
                    .get(s.study_id.as_str())
                    .ok_or_else(|| CliError::Schema(format!("study '{}' missing from --compare", s.study_id)))?,
                None => s,
            };
            let kp = reference(source)?.keypoints;
            let ms = measure_pelvis(&kp)?;
            Ok(HipSide::BOTH
                .iter()
                .filter_map(|&side| {
                    let t = (*truth.diagnosis.get(side)).filter(|l| *l != HipLabel::Other)?;
                    let present = score_hip(&ms[side.index()], &params, &ranges).ddh_present;
                    Some((if present { HipLabel::Ddh } else { HipLabel::Normal }, t))
                })
                .collect())
        })
        .collect();
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (s, r) in studies.iter().zip(per_study) {
        if let Some(pairs) = skip_or_fail(g, &s.study_id, r)? {
            for (p, t) in pairs {
                predicted.push(p);
                truth.push(t);
            }
        }
    }
    if truth.is_empty() {
        return Err(CliError::Statistics("no hips carry a normal or ddh label".into()));
    }
    let classes = [HipLabel::Normal, HipLabel::Ddh];
    let report = confusion_f1(&predicted, &truth, &classes)?;
    let kappa = report
        .kappa
        .ok_or_else(|| CliError::Statistics("kappa is undefined: a single label on both sides".into()))?;
    let text = match g.format {
        Format::Table => {
            let mut out = String::from("truth,pred_normal,pred_ddh,f1,kappa\n");
            for (i, c) in classes.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.as_str(),
                    report.matrix[i][0],
                    report.matrix[i][1],
                    fmt_f64(report.f1[i]),
                    fmt_f64(kappa)
                ));
            }
            out
        }
        Format::Report => {
            let correct: u64 = (0..2).map(|i| report.matrix[i][i]).sum();
            let mut r = KvReport::new();
            r.int("hips", truth.len() as i64)
                .num("accuracy", correct as f64 / truth.len() as f64)
                .num("kappa", kappa)
                .num("f1.normal", report.f1[0])
                .num("f1.ddh", report.f1[1]);
            r.render()
        }
    };
    emit(g, &text)
}

fn cmd_kconst(g: &GlobalArgs, save: Option<&Path>) -> Result<(), CliError> {
    let studies = load(input_path(g)?)?;
    let repeated: Vec<RepeatedAnnotations> = studies
        .iter()
        .map(|s| {
            Ok(RepeatedAnnotations {
                repeats: s.annotations.iter().map(|a| a.keypoints).collect(),
                bbox_area: reference(s)?.bbox.area(),
            })
        })
        .collect::<Result<_, CliError>>()?;
    let k = estimate_k_constants(&repeated)?;
    if let Some(path) = save {
        fs::write(path, k.to_toml()).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    }
    let text = match g.format {
        Format::Table => {
            let mut out = String::from("side,landmark,k\n");
            for side in HipSide::BOTH {
                for l in Landmark::ALL {
                    out.push_str(&format!("{side},{},{}\n", l.key(), fmt_f64(k.get(side, l))));
                }
            }
            out
        }
        Format::Report => {
            let mut r = KvReport::new();
            r.int("studies_with_repeats", repeated.iter().filter(|s| s.repeats.len() >= 2).count() as i64);
            for side in HipSide::BOTH {
                for l in Landmark::ALL {
                    r.num(format!("{side}.{}", l.key()), k.get(side, l));
                }
            }
            r.render()
        }
    };
    emit(g, &text)
}

fn cmd_synth(g: &GlobalArgs, n: usize, noise: f64) -> Result<(), CliError> {
    let config = SynthConfig {
        n_studies: n,
        noise_rate: noise,
        seed: g.seed,
        planted: load_params(g)?,
        ..SynthConfig::default()
    };
    emit(g, &serialize_dataset(&synth_dataset(&config)?))
}

fn cmd_serve(g: &GlobalArgs, addr: std::net::SocketAddr) -> Result<(), CliError> {
    let root = input_path(g)?;
    if !root.is_dir() {
        return Err(CliError::Other("serve needs --input <directory of study documents>".into()));
    }
    let store = hipmetrics_service::StudyStore::open(root).map_err(|e| match e {
        hipmetrics_service::StoreError::Invalid(msg) => CliError::Schema(msg),
        e => CliError::Other(e.to_string()),
    })?;
    let state = hipmetrics_service::AppState::new(store, load_params(g)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(hipmetrics_service::serve(addr, state))?;
    Ok(())
}
