//! Detection scoring: greedy matching under the strict `IoU > threshold`
//! rule, precision/recall, and 11-point interpolated average precision.
//!
//! Matching follows the PASCAL protocol: detections are processed in
//! globally descending score order, each consuming at most one ground-truth
//! box. The inequality is strict, so a detection at exactly the threshold
//! counts as a false positive. There is a single "tampered" class.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{read_detections, Detection};
use crate::geometry::{iou, BBox};
use crate::synth::{read_annotations, SynthError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("detections reference an image absent from the ground truth: {0}")]
    UnknownImage(String),
    #[error("no ground-truth boxes: recall is undefined")]
    NoGroundTruth,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<SynthError> for EvalError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Parse {
                path,
                line,
                message,
            } => EvalError::Parse {
                path,
                line,
                message,
            },
            SynthError::Io { path, source } => EvalError::Io { path, source },
            other => EvalError::Parse {
                path: PathBuf::new(),
                line: 0,
                message: other.to_string(),
            },
        }
    }
}

/// Outcome of matching detections against ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Per-detection TP flag, in globally descending score order (the order
    /// the matcher processed them).
    pub flags: Vec<bool>,
}

/// Match detections to ground truth greedily in descending score order.
///
/// A detection is a true positive when its best-IoU unmatched ground-truth
/// box in the same image has `IoU > iou_thresh`; that box is then consumed.
/// Score ties break by `(image_path, original index)`. Detections for images
/// with no ground-truth entry count as false positives.
pub fn match_detections(
    dets: &BTreeMap<String, Vec<Detection>>,
    gts: &BTreeMap<String, Vec<BBox>>,
    iou_thresh: f64,
) -> MatchResult {
    assert!(
        iou_thresh > 0.0 && iou_thresh <= 1.0,
        "iou_thresh must be in (0, 1]"
    );
    let mut flat: Vec<(&str, usize, &Detection)> = Vec::new();
    for (image, list) in dets {
        for (idx, det) in list.iter().enumerate() {
            assert!(det.score.is_finite(), "detection scores must be finite");
            flat.push((image.as_str(), idx, det));
        }
    }
    flat.sort_by(|a, b| {
        b.2.score
            .partial_cmp(&a.2.score)
            .expect("finite scores")
            .then_with(|| a.0.cmp(b.0))
            .then_with(|| a.1.cmp(&b.1))
    });

    let mut consumed: BTreeMap<&str, Vec<bool>> = gts
        .iter()
        .map(|(image, boxes)| (image.as_str(), vec![false; boxes.len()]))
        .collect();
    let total_gt: usize = gts.values().map(Vec::len).sum();

    let mut flags = Vec::with_capacity(flat.len());
    let mut tp = 0;
    for (image, _, det) in &flat {
        let mut best: Option<(usize, f64)> = None;
        if let Some(boxes) = gts.get(*image) {
            let used = consumed.get_mut(*image).expect("same keys as gts");
            for (gi, gt) in boxes.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let v = iou(&det.bbox, gt);
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((gi, v));
                }
            }
            if let Some((gi, v)) = best {
                if v > iou_thresh {
                    used[gi] = true;
                    tp += 1;
                    flags.push(true);
                    continue;
                }
            }
        }
        flags.push(false);
    }

    MatchResult {
        true_positives: tp,
        false_positives: flags.len() - tp,
        false_negatives: total_gt - tp,
        flags,
    }
}

/// `tp / (tp + fp)`; 0 by convention when there are no detections.
pub fn precision(tp: usize, fp: usize) -> f64 {
    if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

/// `tp / (tp + fn)`; errors when there is no ground truth at all.
pub fn recall(tp: usize, fn_count: usize) -> Result<f64, EvalError> {
    if tp + fn_count == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    Ok(tp as f64 / (tp + fn_count) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall pairs accumulated in descending score order; recalls are
/// non-decreasing along the list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

/// Accumulate the PR curve from per-detection TP flags (already in
/// descending score order) and the ground-truth count.
pub fn pr_curve(flags: &[bool], total_gt: usize) -> PrCurve {
    assert!(total_gt >= 1, "pr_curve needs at least one ground-truth box");
    let mut points = Vec::with_capacity(flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in flags {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push(PrPoint {
            recall: tp as f64 / total_gt as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    PrCurve { points }
}

/// 11-point interpolated average precision.
///
/// `AP = (1/11) * sum over r in {0.0, 0.1, ..., 1.0} of P_interp(r)` where
/// `P_interp(r)` is the maximum precision at any recall `>= r`, or 0 when
/// that recall is never attained.
pub fn ap_11point(curve: &PrCurve) -> f64 {
    let mut sum = 0.0;
    for i in 0..=10 {
        let level = i as f64 / 10.0;
        let p = curve
            .points
            .iter()
            .filter(|pt| pt.recall >= level)
            .map(|pt| pt.precision)
            .fold(0.0, f64::max);
        sum += p;
    }
    sum / 11.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub images: usize,
    pub ground_truth_boxes: usize,
    pub detections: usize,
}

/// Full evaluation report; precision and recall are reported at the
/// operating point that keeps every detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub ap: f64,
    pub counts: EvalCounts,
}

/// Evaluate a detections file against a ground-truth annotations file
/// (both JSON-lines) at the given IoU threshold.
pub fn evaluate(
    dets_path: impl AsRef<Path>,
    gt_path: impl AsRef<Path>,
    iou_thresh: f64,
) -> Result<EvalReport, EvalError> {
    let annotations = read_annotations(gt_path.as_ref())?;
    let mut gts: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    for ann in annotations {
        let entry = gts.entry(ann.image_path.clone()).or_default();
        entry.extend(ann.boxes.iter().map(|b| b.bbox));
    }

    let det_lines = read_detections(dets_path.as_ref())?;
    let mut dets: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for line in det_lines {
        if !gts.contains_key(&line.image_path) {
            return Err(EvalError::UnknownImage(line.image_path));
        }
        dets.entry(line.image_path).or_default().extend(line.detections);
    }

    let total_gt: usize = gts.values().map(Vec::len).sum();
    if total_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }

    let result = match_detections(&dets, &gts, iou_thresh);
    let ap = if result.flags.is_empty() {
        0.0
    } else {
        ap_11point(&pr_curve(&result.flags, total_gt))
    };

    Ok(EvalReport {
        iou_threshold: iou_thresh,
        precision: precision(result.true_positives, result.false_positives),
        recall: recall(result.true_positives, result.false_negatives)?,
        ap,
        counts: EvalCounts {
            true_positives: result.true_positives,
            false_positives: result.false_positives,
            false_negatives: result.false_negatives,
            images: gts.len(),
            ground_truth_boxes: total_gt,
            detections: result.flags.len(),
        },
    })
}

impl From<crate::detect::DetectError> for EvalError {
    fn from(e: crate::detect::DetectError) -> Self {
        EvalError::Parse {
            path: PathBuf::new(),
            line: 0,
            message: e.to_string(),
        }
    }
}
