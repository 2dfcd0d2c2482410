//! Error-level-analysis (ELA) image forensics toolkit.
//!
//! The crate localizes spliced regions in images by measuring JPEG
//! recompression error, generates synthetic tampered datasets with
//! ground-truth boxes, provides the detection loss kernels used by
//! region-proposal training, and scores detections with the PASCAL
//! 11-point average-precision protocol.
//!
//! Modules:
//! - [`imaging`]: decoding, JPEG encoding, and the recompression roundtrip
//! - [`ela`]: difference maps, 8x8 block scores, and heatmaps
//! - [`geometry`]: box algebra, anchors, regression targets, NMS
//! - [`losses`]: loss kernels with analytic gradients and a finite-difference checker
//! - [`synth`]: splice construction and dataset generation
//! - [`detect`]: the baseline ELA-driven tamper localizer
//! - [`evalkit`]: matching, precision/recall, 11-point AP
//! - [`fixtures`]: deterministic procedural images for tests, benchmarks and demos

pub mod detect;
pub mod ela;
pub mod evalkit;
pub mod fixtures;
pub mod geometry;
pub mod imaging;
pub mod losses;
pub mod synth;
