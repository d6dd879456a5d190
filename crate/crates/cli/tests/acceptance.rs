//! End-to-end acceptance checks. Prints one `[PASS]` or `[FAIL]` line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use hipmetrics_core::data::{
    serialize_study, synth_dataset, synth_hip, synth_pelvis, HipLabel, HipTargets, PelvisTemplate, SynthConfig,
};
use hipmetrics_core::detection::{
    binary_mask, cross_entropy_loss, focal_keypoint_loss, focal_loss_gradient, FocalLossInput,
};
use hipmetrics_core::geometry::{
    crowe_grade, measure_hip, measure_pelvis, AngleMeasurements, CroweGrade, HipSide, Landmark, PelvisKeypoints,
    Point2D,
};
use hipmetrics_core::metrics::{
    average_precision_recall, bland_altman, cohen_kappa, default_oks_thresholds, estimate_k_constants, fmt_f64,
    icc_absolute_agreement, map_mar, oks, GroundTruthInstance, KConstants, OksInput, OksRecord, RepeatedAnnotations,
    ScoredDetection,
};
use hipmetrics_core::scoring::{
    default_params, fit_scoring_params, score_hip, AngleClass, AngleRanges, ScoringParams, SearchSpace,
};
use hipmetrics_service::{router, AppState, StudyStore};
use http_body_util::BodyExt;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("geometry round trip and invariance", geometry),
        ("crowe thresholds", crowe),
        ("scoring rule", scoring_rule),
        ("grid-search recovery", grid_search),
        ("oks and map/mar", oks_map),
        ("k-constant estimator", kconst),
        ("statistics oracles", statistics),
        ("focal loss", focal_loss),
        ("cli/service determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn elapsed(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(took)
}

fn random_targets(rng: &mut ChaCha8Rng) -> HipTargets {
    HipTargets::new(
        rng.random_range(-60.0..75.0),
        rng.random_range(-40.0..45.0),
        rng.random_range(0.0..80.0),
        rng.random_range(0.0..0.6),
    )
}

fn same_measurements(a: &[AngleMeasurements; 2], b: &[AngleMeasurements; 2], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        x.side == y.side
            && (x.ce_deg - y.ce_deg).abs() < tol
            && (x.tonnis_deg - y.tonnis_deg).abs() < tol
            && (x.sharp_deg - y.sharp_deg).abs() < tol
            && (x.crowe_ratio_r - y.crowe_ratio_r).abs() < tol
    })
}

fn geometry() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let normal = HipTargets::new(30.0, 5.0, 40.0, 0.0);
    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let t = random_targets(&mut rng);
        let side = HipSide::BOTH[i as usize % 2];
        let template = PelvisTemplate {
            rotation_deg: rng.random_range(-30.0..30.0),
            teardrop_span: rng.random_range(100.0..250.0),
            pelvic_height: rng.random_range(120.0..300.0),
            ..PelvisTemplate::default()
        };
        let mut kp = synth_pelvis(&normal, &normal, &template, i).map_err(|e| e.to_string())?;
        *kp.hip_mut(side) = synth_hip(&t, side, &template, i).map_err(|e| e.to_string())?;
        let m = measure_hip(&kp, side).map_err(|e| format!("case {i}: {e}"))?;
        for err in [m.ce_deg - t.ce_deg, m.tonnis_deg - t.tonnis_deg, m.sharp_deg - t.sharp_deg, m.crowe_ratio_r - t.crowe_r]
        {
            worst = worst.max(err.abs());
        }
    }
    ensure!(worst < 1e-9, "worst round-trip error {worst:e}");

    for i in 0..500u64 {
        let r = random_targets(&mut rng);
        let l = random_targets(&mut rng);
        let kp = synth_pelvis(&r, &l, &PelvisTemplate::default(), i).map_err(|e| e.to_string())?;
        let base = measure_pelvis(&kp).map_err(|e| e.to_string())?;

        let (s, c) = rng.random_range(-80.0f64..80.0).to_radians().sin_cos();
        let (tx, ty) = (rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0));
        let moved = kp.map(|p| Point2D::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty));
        let moved = measure_pelvis(&moved).map_err(|e| e.to_string())?;
        ensure!(same_measurements(&base, &moved, 1e-7), "rigid motion changed case {i}");

        let axis = rng.random_range(-200.0..800.0);
        let flipped = kp.map(|p| Point2D::new(2.0 * axis - p.x, p.y));
        let mirrored = PelvisKeypoints { right: flipped.left, left: flipped.right };
        let mut mirrored = measure_pelvis(&mirrored).map_err(|e| e.to_string())?;
        mirrored.swap(0, 1);
        for m in &mut mirrored {
            m.side = m.side.opposite();
        }
        ensure!(same_measurements(&base, &mirrored, 1e-7), "mirror changed case {i}");
    }
    let took = elapsed(start, Duration::from_secs(5))?;
    Ok(format!("1000 round trips, worst error {worst:.1e}; 500 rigid and 500 mirror cases; {took:.2?}"))
}

fn crowe() -> Check {
    use CroweGrade::*;
    let cases = [(0.0999, I), (0.1, II), (0.15, II), (0.1501, III), (0.2, III), (0.2001, IV)];
    for (r, want) in cases {
        let got = crowe_grade(r).map_err(|e| e.to_string())?;
        ensure!(got == want, "r = {r}: got {got}, want {want}");
    }
    Ok("6 boundary values".into())
}

fn hip(ce: f64, tonnis: f64, sharp: f64) -> AngleMeasurements {
    AngleMeasurements {
        side: HipSide::Right,
        ce_deg: ce,
        tonnis_deg: tonnis,
        sharp_deg: sharp,
        proximal_displacement_px: 0.0,
        pelvic_height_px: 200.0,
        crowe_ratio_r: 0.0,
    }
}

fn scoring_rule() -> Check {
    let params = default_params();
    let ranges = AngleRanges::default();
    // Normal, Borderline, DDH representatives per angle.
    let ce = [30.0, 22.0, 15.0];
    let tonnis = [5.0, 11.0, 16.0];
    let sharp = [38.0, 44.0, 50.0];
    let mut present = 0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let d = score_hip(&hip(ce[i], tonnis[j], sharp[k]), &params, &ranges);
                let classes = [AngleClass::ALL[i], AngleClass::ALL[j], AngleClass::ALL[k]];
                let total = [0, 1, 3][i] + [0, 1, 2][j] + [0, 1, 2][k];
                ensure!(d.classes == classes, "classes {:?} vs {classes:?}", d.classes);
                ensure!(d.total_score == total, "{classes:?}: total {} vs {total}", d.total_score);
                ensure!(d.ddh_present == (total >= 5), "{classes:?}: verdict mismatch");
                present += usize::from(d.ddh_present);
            }
        }
    }
    let examples = [
        ((19.0, 11.0, 43.0), [3, 1, 1], true),
        ((30.0, 5.0, 40.0), [0, 0, 0], false),
        ((18.0, 8.0, 40.0), [3, 0, 0], false),
        ((15.0, 11.0, 44.0), [3, 1, 1], true),
        ((22.0, 16.0, 50.0), [1, 2, 2], true),
    ];
    for ((c, t, s), scores, verdict) in examples {
        let d = score_hip(&hip(c, t, s), &params, &ranges);
        ensure!(d.scores == scores && d.ddh_present == verdict, "({c}, {t}, {s}): {d:?}");
    }
    Ok(format!("27 combinations ({present} present), {} worked examples", examples.len()))
}

fn labelled(n_studies: usize, seed: u64, noise_rate: f64) -> Vec<(AngleMeasurements, bool)> {
    let studies = synth_dataset(&SynthConfig { n_studies, seed, noise_rate, ..SynthConfig::default() }).unwrap();
    let mut out = Vec::with_capacity(2 * n_studies);
    for s in studies {
        let gt = s.ground_truth.unwrap();
        let ms = measure_pelvis(&gt.keypoints).unwrap();
        for side in HipSide::BOTH {
            out.push((ms[side.index()], gt.diagnosis.get(side) == &Some(HipLabel::Ddh)));
        }
    }
    out
}

fn held_out_kappa(params: &ScoringParams, data: &[(AngleMeasurements, bool)]) -> f64 {
    let ranges = AngleRanges::default();
    let verdicts: Vec<bool> = data.iter().map(|(m, _)| score_hip(m, params, &ranges).ddh_present).collect();
    let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
    cohen_kappa(&verdicts, &labels).unwrap()
}

fn grid_search() -> Check {
    let start = Instant::now();
    let ranges = AngleRanges::default();
    let space = SearchSpace::default();
    let planted = default_params();

    let train = labelled(1000, 10, 0.05);
    let held = labelled(1000, 11, 0.05);
    let fit = fit_scoring_params(&train, &space, &ranges).map_err(|e| e.to_string())?;
    let recovered = held_out_kappa(&fit.params, &held);
    let reference = held_out_kappa(&planted, &held);
    ensure!((recovered - reference).abs() <= 0.02, "noisy: recovered {recovered:.4}, planted {reference:.4}");

    let clean = labelled(1000, 1, 0.0);
    let held_clean = labelled(500, 2, 0.0);
    let fit_clean = fit_scoring_params(&clean, &space, &ranges).map_err(|e| e.to_string())?;
    let agree = held_clean
        .iter()
        .filter(|(m, _)| {
            score_hip(m, &fit_clean.params, &ranges).ddh_present == score_hip(m, &planted, &ranges).ddh_present
        })
        .count();
    ensure!(agree == held_clean.len(), "noiseless: {agree}/{} verdicts match", held_clean.len());
    let took = elapsed(start, Duration::from_secs(60))?;
    Ok(format!(
        "5% noise: held-out kappa {recovered:.4} vs planted {reference:.4}; 0% noise: {agree}/{} verdicts match; {took:.2?}",
        held_clean.len()
    ))
}

/// Enumerates every score cutoff and integrates interpolated precision.
fn brute_force_ap(records: &[OksRecord], num_gt: usize, t: f64) -> (f64, f64) {
    if records.is_empty() {
        return (0.0, 0.0);
    }
    let scored = records.iter().all(|r| r.score.is_some());
    let cutoffs: Vec<f64> = if scored {
        let mut s: Vec<f64> = records.iter().map(|r| r.score.unwrap()).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.dedup();
        s
    } else {
        vec![f64::NEG_INFINITY]
    };
    let points: Vec<(f64, f64)> = cutoffs
        .iter()
        .map(|&c| {
            let admitted: Vec<&OksRecord> =
                records.iter().filter(|r| r.score.unwrap_or(f64::NEG_INFINITY) >= c).collect();
            let hits: BTreeSet<usize> = admitted.iter().filter(|r| r.oks > t).map(|r| r.gt_index).collect();
            (hits.len() as f64 / num_gt as f64, hits.len() as f64 / admitted.len() as f64)
        })
        .collect();
    let final_recall = points.last().unwrap().0;
    if !scored {
        return (points[0].1, final_recall);
    }
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
    recalls.sort_by(f64::total_cmp);
    recalls.dedup();
    let (mut ap, mut prev) = (0.0, 0.0);
    for r in recalls {
        ap += (r - prev) * points.iter().filter(|q| q.0 >= r).map(|q| q.1).fold(0.0, f64::max);
        prev = r;
    }
    (ap, final_recall)
}

fn oks_map() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (scale, k) = (rng.random_range(50.0..800.0), rng.random_range(0.001..0.1));
        let v = oks(&OksInput { distance: scale * k, scale, k }).map_err(|e| e.to_string())?;
        ensure!((v - (-0.5f64).exp()).abs() < 1e-12, "oks(s k) = {v}");
    }

    let thresholds = default_oks_thresholds();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for case in 0..50 {
        let num_gt = rng.random_range(1..8);
        let n_det = rng.random_range(0..15);
        let unscored = case % 10 == 9;
        let records: Vec<OksRecord> = (0..n_det)
            .map(|_| OksRecord {
                gt_index: rng.random_range(0..num_gt),
                score: (!unscored).then(|| rng.random_range(0..6) as f64 / 5.0),
                oks: rng.random_range(0.3..1.0),
            })
            .collect();
        let (mut map, mut mar, mut want_map, mut want_mar) = (0.0, 0.0, 0.0, 0.0);
        for &t in &thresholds {
            let (ap, ar) = average_precision_recall(&records, num_gt, t).map_err(|e| e.to_string())?;
            let (want_ap, want_ar) = brute_force_ap(&records, num_gt, t);
            ensure!((ap - want_ap).abs() < 1e-12 && (ar - want_ar).abs() < 1e-12, "case {case} t {t}");
            map += ap;
            mar += ar;
            want_map += want_ap;
            want_mar += want_ar;
        }
        ensure!((map - want_map).abs() < 1e-12 && (mar - want_mar).abs() < 1e-12, "case {case} mean");
    }

    let studies = synth_dataset(&SynthConfig { n_studies: 20, seed: 3, ..SynthConfig::default() }).unwrap();
    let gts: Vec<GroundTruthInstance> = studies
        .iter()
        .map(|s| {
            let gt = s.ground_truth.as_ref().unwrap();
            GroundTruthInstance { keypoints: gt.keypoints, scale: gt.bbox.scale() }
        })
        .collect();
    let dets: Vec<ScoredDetection> = gts
        .iter()
        .enumerate()
        .map(|(i, g)| ScoredDetection { gt_index: i, keypoints: g.keypoints, score: Some(0.9) })
        .collect();
    let report = map_mar(&dets, &gts, &KConstants::bundled(), &thresholds).map_err(|e| e.to_string())?;
    ensure!(report.map == 1.0 && report.mar == 1.0, "perfect detections: {} / {}", report.map, report.mar);
    Ok("oks(d = s k) exact; 50 enumeration cases over 10 thresholds; perfect detections 1/1".into())
}

fn kconst() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = PelvisKeypoints::default().map(|_| Point2D::new(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)));
    let a = base.map(|p| Point2D::new(p.x - 2.0, p.y));
    let b = base.map(|p| Point2D::new(p.x + 2.0, p.y));
    let k = estimate_k_constants(&[RepeatedAnnotations { repeats: vec![a, b], bbox_area: 400.0 * 400.0 }])
        .map_err(|e| e.to_string())?;
    for side in HipSide::BOTH {
        for l in Landmark::ALL {
            ensure!((k.get(side, l) - 0.01).abs() < 1e-12, "{side} {}: {}", l.key(), k.get(side, l));
        }
    }
    let table = [
        [0.0080, 0.0072, 0.0098, 0.0218, 0.0097, 0.0331, 0.0222],
        [0.0087, 0.0076, 0.0110, 0.0165, 0.0086, 0.0318, 0.0250],
    ];
    ensure!(KConstants::bundled().values() == &table, "bundled table differs");
    Ok("fixture k = 0.0100 for all 14 landmarks; bundled table matches".into())
}

fn icc_oracle(x: &[Vec<f64>]) -> f64 {
    let n = x.len() as f64;
    let k = x[0].len() as f64;
    let grand: f64 = x.iter().flatten().sum::<f64>() / (n * k);
    let row: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>() / k).collect();
    let col: Vec<f64> = (0..x[0].len()).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut sse = 0.0;
    for (i, r) in x.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            sse += (v - row[i] - col[j] + grand).powi(2);
        }
    }
    let msr = k * row.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1.0);
    let msc = n * col.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1.0);
    let mse = sse / ((n - 1.0) * (k - 1.0));
    (msr - mse) / (msr + (k - 1.0) * mse + k * (msc - mse) / n)
}

fn statistics() -> Check {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (x, y, n) in [(1, 1, 50), (1, 0, 10), (0, 1, 5), (0, 0, 35)] {
        a.extend(std::iter::repeat_n(x, n));
        b.extend(std::iter::repeat_n(y, n));
    }
    let kappa = cohen_kappa(&a, &b).map_err(|e| e.to_string())?;
    ensure!((kappa - 0.693877551020408).abs() < 1e-9, "kappa {kappa}");

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let n = rng.random_range(2..=6);
        let k = rng.random_range(2..=6);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let subject = rng.random_range(0.0..40.0);
                (0..k).map(|_| subject + rng.random_range(-4.0..4.0)).collect()
            })
            .collect();
        let got = icc_absolute_agreement(&x).map_err(|e| e.to_string())?.icc;
        let err = (got - icc_oracle(&x)).abs();
        ensure!(err < 1e-12, "icc case {case}: error {err:e}");
        worst = worst.max(err);
    }

    let pairs: Vec<(f64, f64)> = (0..40).map(|_| (rng.random_range(0.0..50.0), rng.random_range(0.0..50.0))).collect();
    let ba = bland_altman(&pairs).map_err(|e| e.to_string())?;
    ensure!(
        ba.loa_low == ba.mean_diff - 1.96 * ba.sd_diff && ba.loa_high == ba.mean_diff + 1.96 * ba.sd_diff,
        "limits {ba:?}"
    );
    Ok(format!("kappa {kappa:.9}; 20 ICC cases, worst error {worst:.1e}; Bland-Altman exact"))
}

fn random_focal_input(rng: &mut ChaCha8Rng, gamma: f64) -> FocalLossInput {
    let k = rng.random_range(1..4);
    let h = rng.random_range(2..6);
    let w = rng.random_range(2..6);
    let probs = Array3::from_shape_fn((k, h, w), |_| rng.random_range(0.02..0.98));
    let masks: Vec<_> = (0..k)
        .map(|_| {
            let p = Point2D::new(rng.random_range(0.0..(w - 1) as f64), rng.random_range(0.0..(h - 1) as f64));
            binary_mask(p, w, h).unwrap()
        })
        .collect();
    let targets = FocalLossInput::targets_from_masks(&masks).unwrap();
    FocalLossInput { probs, targets, gamma, normalizer: None }
}

fn focal_loss() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    for _ in 0..20 {
        let input = random_focal_input(&mut rng, 0.0);
        let focal = focal_keypoint_loss(&input).map_err(|e| e.to_string())?;
        let ce = cross_entropy_loss(&input).map_err(|e| e.to_string())?;
        ensure!((focal - ce).abs() < 1e-12, "gamma 0: {focal} vs {ce}");
    }

    let single = FocalLossInput {
        probs: Array3::from_elem((1, 1, 1), 0.9),
        targets: Array3::from_elem((1, 1, 1), true),
        gamma: 2.0,
        normalizer: None,
    };
    let v = focal_keypoint_loss(&single).map_err(|e| e.to_string())?;
    ensure!((v - 1.0536e-3).abs() < 1e-7, "single positive: {v}");

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let input = random_focal_input(&mut rng, [0.0, 0.5, 1.0, 2.0, 3.5][case % 5]);
        let grad = focal_loss_gradient(&input).map_err(|e| e.to_string())?;
        for (idx, &analytic) in grad.indexed_iter() {
            let mut plus = input.clone();
            plus.probs[idx] += step;
            let mut minus = input.clone();
            minus.probs[idx] -= step;
            let numeric = (focal_keypoint_loss(&plus).unwrap() - focal_keypoint_loss(&minus).unwrap()) / (2.0 * step);
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3));
        }
    }
    ensure!(worst < 1e-6, "gradient relative error {worst:e}");
    Ok(format!("gamma 0 = cross-entropy; single positive {v:.7}; gradient worst relative error {worst:.1e}"))
}

fn hipmetrics(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hipmetrics")).args(args).output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "hipmetrics {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    Ok(out.stdout)
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Fetches every study from the API and renders the fields the CLI tables
/// carry, keyed by `(study_id, side)`.
fn api_rows(dir: &Path, ids: &[String]) -> Result<Vec<Vec<(String, String)>>, String> {
    let store = StudyStore::open(dir).map_err(|e| e.to_string())?;
    let app = router(AppState::new(store, default_params()));
    let runtime = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let mut rows = Vec::new();
        for id in ids {
            let req = Request::get(format!("/api/studies/{id}")).body(Body::empty()).unwrap();
            let resp = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
            ensure!(resp.status() == StatusCode::OK, "GET {id}: {}", resp.status());
            let bytes = resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
            let body: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            for side in ["right", "left"] {
                let m = &body["hips"][side]["measurements"];
                let d = &body["hips"][side]["diagnosis"];
                let num = |v: &Value| v.as_f64().map(fmt_f64).unwrap_or_default();
                let text = |v: &Value| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => "-".into(),
                    other => other.to_string(),
                };
                rows.push(vec![
                    ("study_id".into(), id.clone()),
                    ("side".into(), side.into()),
                    ("ce_deg".into(), num(&m["ce_deg"])),
                    ("tonnis_deg".into(), num(&m["tonnis_deg"])),
                    ("sharp_deg".into(), num(&m["sharp_deg"])),
                    ("displacement_px".into(), num(&m["displacement_px"])),
                    ("pelvic_height_px".into(), num(&m["pelvic_height_px"])),
                    ("crowe_r".into(), num(&m["crowe_r"])),
                    ("crowe_grade".into(), text(&m["crowe_grade"])),
                    ("ce_class".into(), text(&d["ce_class"])),
                    ("tonnis_class".into(), text(&d["tonnis_class"])),
                    ("sharp_class".into(), text(&d["sharp_class"])),
                    ("ce_score".into(), text(&d["ce_score"])),
                    ("tonnis_score".into(), text(&d["tonnis_score"])),
                    ("sharp_score".into(), text(&d["sharp_score"])),
                    ("total_score".into(), text(&d["total_score"])),
                    ("verdict".into(), text(&d["verdict"])),
                    ("crowe_stage".into(), text(&d["crowe_stage"])),
                ]);
            }
        }
        Ok(rows)
    })
}

/// Counts API fields that disagree with the same column of a CLI table.
fn discrepancies(table: &str, api: &[Vec<(String, String)>]) -> Result<usize, String> {
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().ok_or("empty table")?.split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    ensure!(rows.len() == api.len(), "{} table rows vs {} api rows", rows.len(), api.len());
    let mut bad = 0;
    let mut compared = 0;
    for (row, fields) in rows.iter().zip(api) {
        for (name, value) in fields {
            if let Some(i) = header.iter().position(|h| h == name) {
                compared += 1;
                if row[i] != value {
                    bad += 1;
                    eprintln!("mismatch {}/{} {name}: cli {} api {value}", fields[0].1, fields[1].1, row[i]);
                }
            }
        }
    }
    ensure!(compared >= api.len() * 10, "only {compared} fields compared");
    Ok(bad)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.json");
    let again = dir.path().join("again.json");
    let synth = ["synth", "--n", "100", "--noise", "0.05", "--seed", "17", "--output"];
    hipmetrics(&[&synth[..], &[path_arg(&data)]].concat())?;
    hipmetrics(&[&synth[..], &[path_arg(&again)]].concat())?;
    ensure!(fs::read(&data).ok() == fs::read(&again).ok(), "synth output differs between runs");

    let mut compared_outputs = 0;
    for cmd in ["measure", "diagnose", "fit", "eval-diagnosis"] {
        for format in ["table", "report"] {
            let args = [cmd, "--input", path_arg(&data), "--format", format, "--seed", "17"];
            ensure!(hipmetrics(&args)? == hipmetrics(&args)?, "{cmd} --format {format} differs between runs");
            compared_outputs += 1;
        }
    }

    let store_dir = dir.path().join("store");
    fs::create_dir(&store_dir).map_err(|e| e.to_string())?;
    let studies = synth_dataset(&SynthConfig { n_studies: 100, seed: 17, noise_rate: 0.05, ..SynthConfig::default() })
        .map_err(|e| e.to_string())?;
    for s in &studies {
        fs::write(store_dir.join(format!("{}.json", s.study_id)), serialize_study(s)).map_err(|e| e.to_string())?;
    }
    let ids: Vec<String> = studies.iter().map(|s| s.study_id.clone()).collect();
    let api = api_rows(&store_dir, &ids)?;
    let measure = String::from_utf8(hipmetrics(&["measure", "--input", path_arg(&store_dir)])?).unwrap();
    let diagnose = String::from_utf8(hipmetrics(&["diagnose", "--input", path_arg(&store_dir)])?).unwrap();
    let bad = discrepancies(&measure, &api)? + discrepancies(&diagnose, &api)?;
    ensure!(bad == 0, "{bad} CLI/API discrepancies");
    Ok(format!("{compared_outputs} outputs byte-identical across runs; 100 studies, 0 CLI/API discrepancies"))
}
