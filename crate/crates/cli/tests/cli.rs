use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hipmetrics_core::data::{
    serialize_dataset, synth_dataset, synth_pelvis, BBox, HipLabel, HipTargets, PelvisAnnotation, PelvisTemplate,
    Study, SynthConfig,
};
use hipmetrics_core::geometry::Point2D;
use tempfile::TempDir;

fn hipmetrics(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hipmetrics")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_dataset(dir: &TempDir, name: &str, studies: &[Study]) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serialize_dataset(studies)).unwrap();
    path
}

fn synth(n: usize, seed: u64) -> Vec<Study> {
    synth_dataset(&SynthConfig { n_studies: n, seed, ..SynthConfig::default() }).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn single_study(right: HipTargets, left: HipTargets) -> Study {
    let kp = synth_pelvis(&right, &left, &PelvisTemplate::default(), 7).unwrap();
    Study {
        study_id: "case".into(),
        image: None,
        annotations: vec![PelvisAnnotation::new("reader-1", kp, BBox::around(&kp, 30.0))],
        ground_truth: None,
    }
}

fn with_coincident_teardrops(mut studies: Vec<Study>, index: usize) -> Vec<Study> {
    let gt = studies[index].ground_truth.as_mut().unwrap();
    gt.keypoints.left.teardrop = gt.keypoints.right.teardrop;
    studies
}

#[test]
fn degenerate_geometry_exits_3_unless_lenient() {
    let dir = TempDir::new().unwrap();
    let input = write_dataset(&dir, "d.json", &with_coincident_teardrops(synth(10, 3), 4));

    let strict = hipmetrics(&["measure", "--input", arg(&input)]);
    assert_eq!(strict.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("S00005"));

    let lenient = hipmetrics(&["measure", "--lenient", "--input", arg(&input)]);
    let table = stdout(&lenient);
    assert_eq!(table.lines().count(), 1 + 18);
    assert!(!table.contains("S00005"));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("S00005"));
}

#[test]
fn schema_violations_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.json");
    fs::write(&input, r#"{"schema": "hipmetrics/1", "study_id": "x", "annotations": [], "extra": 1}"#).unwrap();
    assert_eq!(hipmetrics(&["measure", "--input", arg(&input)]).status.code(), Some(2));
    fs::write(&input, "{ not json").unwrap();
    assert_eq!(hipmetrics(&["diagnose", "--input", arg(&input)]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_1() {
    assert_eq!(hipmetrics(&["measure", "--input", "/nonexistent/data.json"]).status.code(), Some(1));
}

#[test]
fn single_label_fit_exits_4() {
    let dir = TempDir::new().unwrap();
    let mut studies = synth(20, 5);
    for s in &mut studies {
        let gt = s.ground_truth.as_mut().unwrap();
        gt.diagnosis.right = Some(HipLabel::Normal);
        gt.diagnosis.left = Some(HipLabel::Normal);
    }
    let input = write_dataset(&dir, "d.json", &studies);
    assert_eq!(hipmetrics(&["fit", "--input", arg(&input)]).status.code(), Some(4));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        stdout(&hipmetrics(&["synth", "--n", "30", "--noise", "0.1", "--seed", "9", "--output", arg(path)]));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    for cmd in ["measure", "diagnose", "fit"] {
        for format in ["table", "report"] {
            let first = stdout(&hipmetrics(&[cmd, "--input", arg(&a), "--format", format]));
            let second = stdout(&hipmetrics(&[cmd, "--input", arg(&a), "--format", format]));
            assert_eq!(first, second, "{cmd} {format}");
        }
    }
}

#[test]
fn synth_then_measure_gives_two_rows_per_study() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.json");
    stdout(&hipmetrics(&["synth", "--n", "10", "--output", arg(&data)]));
    let table = stdout(&hipmetrics(&["measure", "--input", arg(&data)]));
    assert_eq!(table.lines().count(), 1 + 20);
    assert!(table.starts_with("study_id,side,ce_deg,"));
}

#[test]
fn borderline_case_is_present_with_crowe_one() {
    let dir = TempDir::new().unwrap();
    let study = single_study(HipTargets::new(19.5, 12.0, 45.0, 0.05), HipTargets::new(32.0, 6.0, 38.0, 0.0));
    let input = write_dataset(&dir, "d.json", &[study]);
    let table = stdout(&hipmetrics(&["diagnose", "--input", arg(&input)]));
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    let header = &rows[0];
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let right = &rows[1];
    let left = &rows[2];
    assert_eq!(right[col("side")], "right");
    assert_eq!(right[col("ce_class")], "ddh");
    assert_eq!(right[col("tonnis_class")], "borderline");
    assert_eq!(right[col("sharp_class")], "borderline");
    assert_eq!(right[col("total_score")], "5");
    assert_eq!(right[col("verdict")], "present");
    assert_eq!(right[col("crowe_stage")], "I");
    assert_eq!(left[col("verdict")], "absent");
    assert_eq!(left[col("crowe_stage")], "-");
}

#[test]
fn render_marks_all_keypoints_without_red_for_normal_hips() {
    let dir = TempDir::new().unwrap();
    let normal = HipTargets::new(32.0, 6.0, 38.0, 0.0);
    let input = write_dataset(&dir, "d.json", &[single_study(normal, normal)]);
    let out = dir.path().join("svg");
    stdout(&hipmetrics(&["render", "--input", arg(&input), "--output", arg(&out)]));
    let svg = fs::read_to_string(out.join("case.svg")).unwrap();
    assert_eq!(svg.matches("class=\"keypoint\"").count(), 14);
    assert!(!svg.contains("#d62728"));

    let ddh = HipTargets::new(10.0, 20.0, 52.0, 0.3);
    let input = write_dataset(&dir, "e.json", &[single_study(ddh, normal)]);
    stdout(&hipmetrics(&["diagnose", "--input", arg(&input), "--render", arg(&out)]));
    let svg = fs::read_to_string(out.join("case.svg")).unwrap();
    assert!(svg.contains("#d62728"));
}

#[test]
fn perfect_detections_score_one() {
    let dir = TempDir::new().unwrap();
    let input = write_dataset(&dir, "d.json", &synth(15, 4));
    let table = stdout(&hipmetrics(&["eval-keypoints", "--input", arg(&input), "--detections", arg(&input)]));
    assert_eq!(table.lines().count(), 1 + 10 + 1);
    assert_eq!(table.lines().last().unwrap(), "mean,1.000000,1.000000");

    let coarse = stdout(&hipmetrics(&[
        "eval-keypoints",
        "--input",
        arg(&input),
        "--detections",
        arg(&input),
        "--thresholds",
        "0.5:0.1:0.9",
    ]));
    let firsts: Vec<&str> = coarse.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(firsts, ["0.500000", "0.600000", "0.700000", "0.800000", "0.900000", "mean"]);
}

#[test]
fn kconst_from_two_shifted_repeats() {
    let dir = TempDir::new().unwrap();
    let normal = HipTargets::new(32.0, 6.0, 38.0, 0.0);
    let mut study = single_study(normal, normal);
    let base = study.annotations[0].keypoints;
    let bbox = BBox { x: 100.0, y: 100.0, w: 400.0, h: 400.0 };
    study.annotations = [-2.0, 2.0]
        .iter()
        .map(|dx| PelvisAnnotation::new("r", base.map(|p| Point2D::new(p.x + dx, p.y)), bbox))
        .collect();
    let input = write_dataset(&dir, "d.json", &[study]);
    let saved = dir.path().join("k.toml");
    let table = stdout(&hipmetrics(&["kconst", "--input", arg(&input), "--save", arg(&saved)]));
    assert_eq!(table.lines().count(), 1 + 14);
    assert!(table.lines().skip(1).all(|l| l.ends_with(",0.010000")), "{table}");
    assert!(saved.exists());
}

#[test]
fn annotator_agreement_and_diagnosis_eval() {
    let dir = TempDir::new().unwrap();
    let studies = synth(40, 12);
    let input = write_dataset(&dir, "d.json", &studies);
    let shifted: Vec<Study> = studies
        .iter()
        .cloned()
        .map(|mut s| {
            let gt = s.ground_truth.as_mut().unwrap();
            gt.keypoints = gt.keypoints.map(|p| Point2D::new(p.x + 5.0, p.y - 3.0));
            s
        })
        .collect();
    let compare = write_dataset(&dir, "c.json", &shifted);
    let report = stdout(&hipmetrics(&["eval-angles", "--input", arg(&input), "--compare", arg(&compare), "--format", "report"]));
    // A pure translation changes no angle.
    assert!(report.contains("ce_deg.icc = 1.000000"), "{report}");
    assert!(report.contains("subjects = 80"));

    let table = stdout(&hipmetrics(&["eval-diagnosis", "--input", arg(&input)]));
    assert!(table.lines().skip(1).all(|l| l.ends_with(",1.000000")), "{table}");
}
