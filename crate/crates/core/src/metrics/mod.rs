//! Evaluation statistics: keypoint similarity and precision/recall, OKS
//! constants, and agreement measures between raters or methods.

pub mod agreement;
pub mod kconst;
pub mod oks;
pub mod precision;
pub mod report;

use thiserror::Error;

pub use agreement::{
    binary_kappa, bland_altman, cohen_kappa, confusion_f1, icc_absolute_agreement,
    kappa_from_matrix, BlandAltman, ConfusionReport, IccResult,
};
pub use kconst::{estimate_k_constants, KConstants, RepeatedAnnotations};
pub use oks::{oks, OksInput};
pub use precision::{
    average_precision_recall, default_oks_thresholds, map_mar, ApReport, GroundTruthInstance,
    OksRecord, ScoredDetection, ThresholdRow,
};
pub use report::{fmt_f64, KvReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid OKS scale: s = {scale}, k = {k} (both must be positive)")]
    InvalidScale { scale: f64, k: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient redundancy: {0}")]
    InsufficientRedundancy(String),
    #[error("degenerate k-constant for {0}: all repeats coincide")]
    DegenerateConstant(String),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("agreement is undefined: chance agreement equals 1")]
    DegenerateAgreement,
    #[error("ICC is undefined: all ratings are identical")]
    DegenerateVariance,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
