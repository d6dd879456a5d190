//! Additive three-angle scoring rule for DDH diagnosis and its grid-search fit.
//!
//! Each of the CE, Tönnis and Sharp angles is classified as normal,
//! borderline or DDH. Normal scores 0, the other two classes carry
//! per-angle scores, and a hip is "DDH present" when the total reaches the
//! threshold. The default rule scores borderline 1 for every angle, DDH 3
//! for CE and 2 for the others, with threshold 5.

use std::cmp::Ordering;
use std::fmt;
use std::ops::RangeInclusive;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AngleMeasurements, CroweGrade, HipSide};
use crate::metrics::agreement::binary_kappa;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("dataset is degenerate: {0}")]
    DegenerateDataset(String),
    #[error("invalid scoring parameters: {0}")]
    InvalidParams(String),
    #[error("invalid angle ranges: {0}")]
    InvalidRanges(String),
    #[error("cannot read scoring parameters: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scoring parameters document: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AngleKind {
    Ce,
    Tonnis,
    Sharp,
}

impl AngleKind {
    pub const ALL: [AngleKind; 3] = [AngleKind::Ce, AngleKind::Tonnis, AngleKind::Sharp];

    pub fn key(self) -> &'static str {
        match self {
            AngleKind::Ce => "ce",
            AngleKind::Tonnis => "tonnis",
            AngleKind::Sharp => "sharp",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn value_of(self, m: &AngleMeasurements) -> f64 {
        match self {
            AngleKind::Ce => m.ce_deg,
            AngleKind::Tonnis => m.tonnis_deg,
            AngleKind::Sharp => m.sharp_deg,
        }
    }
}

impl fmt::Display for AngleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleClass {
    Normal,
    Borderline,
    Ddh,
}

impl AngleClass {
    pub const ALL: [AngleClass; 3] = [AngleClass::Normal, AngleClass::Borderline, AngleClass::Ddh];

    pub fn as_str(self) -> &'static str {
        match self {
            AngleClass::Normal => "normal",
            AngleClass::Borderline => "borderline",
            AngleClass::Ddh => "ddh",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AngleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Borderline band of one angle. Both endpoints belong to the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub borderline_lo: f64,
    pub borderline_hi: f64,
    /// `true` when values below the band indicate DDH (CE), `false` when
    /// values above it do (Tönnis, Sharp).
    pub ddh_below: bool,
}

impl AngleRange {
    pub fn classify(&self, value: f64) -> AngleClass {
        let (ddh, normal) = if self.ddh_below {
            (value < self.borderline_lo, value > self.borderline_hi)
        } else {
            (value > self.borderline_hi, value < self.borderline_lo)
        };
        if ddh {
            AngleClass::Ddh
        } else if normal {
            AngleClass::Normal
        } else {
            AngleClass::Borderline
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRanges {
    pub ce: AngleRange,
    pub tonnis: AngleRange,
    pub sharp: AngleRange,
}

impl Default for AngleRanges {
    fn default() -> Self {
        Self {
            ce: AngleRange { borderline_lo: 20.0, borderline_hi: 25.0, ddh_below: true },
            tonnis: AngleRange { borderline_lo: 10.0, borderline_hi: 13.0, ddh_below: false },
            sharp: AngleRange { borderline_lo: 42.0, borderline_hi: 47.0, ddh_below: false },
        }
    }
}

impl AngleRanges {
    pub fn get(&self, kind: AngleKind) -> &AngleRange {
        match kind {
            AngleKind::Ce => &self.ce,
            AngleKind::Tonnis => &self.tonnis,
            AngleKind::Sharp => &self.sharp,
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        for kind in AngleKind::ALL {
            let r = self.get(kind);
            if !(r.borderline_lo < r.borderline_hi) {
                return Err(ScoringError::InvalidRanges(format!(
                    "{kind}: borderline_lo {} must be below borderline_hi {}",
                    r.borderline_lo, r.borderline_hi
                )));
            }
        }
        Ok(())
    }
}

pub fn classify_angle(kind: AngleKind, value: f64, ranges: &AngleRanges) -> AngleClass {
    ranges.get(kind).classify(value)
}

/// Scores awarded to the non-normal classes of one angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngleScores {
    pub borderline: u32,
    pub ddh: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoringParams {
    pub threshold: u32,
    pub ce: AngleScores,
    pub tonnis: AngleScores,
    pub sharp: AngleScores,
}

impl Default for ScoringParams {
    fn default() -> Self {
        default_params()
    }
}

pub fn default_params() -> ScoringParams {
    ScoringParams {
        threshold: 5,
        ce: AngleScores { borderline: 1, ddh: 3 },
        tonnis: AngleScores { borderline: 1, ddh: 2 },
        sharp: AngleScores { borderline: 1, ddh: 2 },
    }
}

impl ScoringParams {
    pub fn scores(&self, kind: AngleKind) -> &AngleScores {
        match kind {
            AngleKind::Ce => &self.ce,
            AngleKind::Tonnis => &self.tonnis,
            AngleKind::Sharp => &self.sharp,
        }
    }

    pub fn score(&self, kind: AngleKind, class: AngleClass) -> u32 {
        let s = self.scores(kind);
        match class {
            AngleClass::Normal => 0,
            AngleClass::Borderline => s.borderline,
            AngleClass::Ddh => s.ddh,
        }
    }

    pub fn max_total(&self) -> u32 {
        AngleKind::ALL.iter().map(|&k| self.scores(k).ddh).sum()
    }

    /// Verdict for a combination of per-angle classes.
    pub fn verdict(&self, classes: [AngleClass; 3]) -> bool {
        let total: u32 = AngleKind::ALL
            .iter()
            .zip(classes)
            .map(|(&k, c)| self.score(k, c))
            .sum();
        total >= self.threshold
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        for kind in AngleKind::ALL {
            let s = self.scores(kind);
            if s.ddh < 1 || s.ddh <= s.borderline {
                return Err(ScoringError::InvalidParams(format!(
                    "{kind}: ddh score {} must be at least 1 and exceed borderline score {}",
                    s.ddh, s.borderline
                )));
            }
        }
        if self.threshold < 1 || self.threshold > self.max_total() {
            return Err(ScoringError::InvalidParams(format!(
                "threshold {} outside 1..={}",
                self.threshold,
                self.max_total()
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scoring params always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, ScoringError> {
        let params: ScoringParams = toml::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self, ScoringError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Tie-break key: smaller is preferred among equally good rules.
    fn canonical_key(&self) -> [u32; 7] {
        [
            self.threshold,
            self.ce.ddh,
            self.tonnis.ddh,
            self.sharp.ddh,
            self.ce.borderline,
            self.tonnis.borderline,
            self.sharp.borderline,
        ]
    }
}

/// Scored diagnosis of one hip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub side: HipSide,
    /// Per-angle classes in CE, Tönnis, Sharp order.
    pub classes: [AngleClass; 3],
    pub scores: [u32; 3],
    pub total_score: u32,
    pub threshold: u32,
    pub ddh_present: bool,
    /// Crowe staging, reported only for hips diagnosed DDH present.
    pub crowe: Option<CroweGrade>,
}

impl Diagnosis {
    pub fn verdict_str(&self) -> &'static str {
        if self.ddh_present {
            "present"
        } else {
            "absent"
        }
    }
}

pub fn score_hip(m: &AngleMeasurements, params: &ScoringParams, ranges: &AngleRanges) -> Diagnosis {
    let classes = AngleKind::ALL.map(|k| classify_angle(k, k.value_of(m), ranges));
    let scores = [0, 1, 2].map(|i| params.score(AngleKind::ALL[i], classes[i]));
    let total_score = scores.iter().sum();
    let ddh_present = total_score >= params.threshold;
    Diagnosis {
        side: m.side,
        classes,
        scores,
        total_score,
        threshold: params.threshold,
        ddh_present,
        crowe: ddh_present.then(|| m.crowe_grade()),
    }
}

/// Candidate grid for [`fit_scoring_params`]. Normal always scores 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    pub borderline: RangeInclusive<u32>,
    pub ddh: RangeInclusive<u32>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { borderline: 0..=2, ddh: 1..=4 }
    }
}

impl SearchSpace {
    fn per_angle(&self) -> Vec<AngleScores> {
        let mut out = Vec::new();
        for ddh in self.ddh.clone() {
            for borderline in self.borderline.clone() {
                if ddh >= 1 && ddh > borderline {
                    out.push(AngleScores { borderline, ddh });
                }
            }
        }
        out
    }

    /// Every valid parameter vector in the grid, thresholds `1..=Σ ddh`.
    pub fn candidates(&self) -> Vec<ScoringParams> {
        let per = self.per_angle();
        let mut out = Vec::new();
        for &ce in &per {
            for &tonnis in &per {
                for &sharp in &per {
                    let max = ce.ddh + tonnis.ddh + sharp.ddh;
                    for threshold in 1..=max {
                        out.push(ScoringParams { threshold, ce, tonnis, sharp });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub params: ScoringParams,
    pub kappa: f64,
}

impl ScoredCandidate {
    /// `Greater` when `self` wins: higher kappa, then the smaller canonical key.
    fn rank(&self, other: &Self) -> Ordering {
        self.kappa
            .total_cmp(&other.kappa)
            .then_with(|| other.params.canonical_key().cmp(&self.params.canonical_key()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ScoringParams,
    pub kappa: f64,
    /// Best candidate for each threshold value, ascending.
    pub threshold_curve: Vec<ScoredCandidate>,
    pub candidates_evaluated: usize,
}

/// Class-combination histogram: `[positives, negatives]` per 27 combinations.
type ComboCounts = [[u64; 2]; 27];

fn combo_index(classes: [AngleClass; 3]) -> usize {
    classes[0].index() * 9 + classes[1].index() * 3 + classes[2].index()
}

fn combo_classes(idx: usize) -> [AngleClass; 3] {
    [
        AngleClass::ALL[idx / 9],
        AngleClass::ALL[(idx / 3) % 3],
        AngleClass::ALL[idx % 3],
    ]
}

fn candidate_kappa(params: &ScoringParams, counts: &ComboCounts) -> f64 {
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (idx, &[pos, neg]) in counts.iter().enumerate() {
        if params.verdict(combo_classes(idx)) {
            tp += pos;
            fp += neg;
        } else {
            fn_ += pos;
            tn += neg;
        }
    }
    // Both truth classes are present, so chance agreement is below 1.
    binary_kappa(tp, fp, fn_, tn).unwrap_or(0.0)
}

/// Grid search for the parameters maximizing Cohen's kappa between the
/// rule's verdicts and the binary labels. Ties resolve to the
/// lexicographically smallest `(threshold, ddh scores, borderline scores)`.
pub fn fit_scoring_params(
    dataset: &[(AngleMeasurements, bool)],
    space: &SearchSpace,
    ranges: &AngleRanges,
) -> Result<FitResult, ScoringError> {
    ranges.validate()?;
    let mut counts: ComboCounts = [[0; 2]; 27];
    for (m, label) in dataset {
        let classes = AngleKind::ALL.map(|k| classify_angle(k, k.value_of(m), ranges));
        counts[combo_index(classes)][if *label { 0 } else { 1 }] += 1;
    }
    let positives: u64 = counts.iter().map(|c| c[0]).sum();
    let negatives: u64 = counts.iter().map(|c| c[1]).sum();
    if positives == 0 || negatives == 0 {
        return Err(ScoringError::DegenerateDataset(format!(
            "need both classes, got {positives} positive and {negatives} negative hips"
        )));
    }

    let candidates = space.candidates();
    if candidates.is_empty() {
        return Err(ScoringError::InvalidParams("search space is empty".into()));
    }
    let scored: Vec<ScoredCandidate> = candidates
        .par_iter()
        .map(|p| ScoredCandidate { params: *p, kappa: candidate_kappa(p, &counts) })
        .collect();

    let best = *scored
        .iter()
        .max_by(|a, b| a.rank(b))
        .expect("non-empty candidate list");

    let max_threshold = scored.iter().map(|c| c.params.threshold).max().unwrap_or(0);
    let threshold_curve = (1..=max_threshold)
        .filter_map(|t| {
            scored
                .iter()
                .filter(|c| c.params.threshold == t)
                .max_by(|a, b| a.rank(b))
                .copied()
        })
        .collect();

    Ok(FitResult {
        params: best.params,
        kappa: best.kappa,
        threshold_curve,
        candidates_evaluated: scored.len(),
    })
}
