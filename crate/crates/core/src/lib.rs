//! Landmark-based hip dysplasia measurement.
//!
//! The crate turns 14 pelvic keypoints into the CE, Tönnis and Sharp angles
//! and the Crowe displacement ratio, scores them into a DDH verdict, and
//! provides the statistics used to evaluate keypoint detectors and readers
//! against each other.

pub mod data;
pub mod detection;
pub mod geometry;
pub mod metrics;
pub mod render;
pub mod scoring;
