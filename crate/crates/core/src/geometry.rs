//! Bounding-box algebra: IoU, anchor grids, regression encode/decode, and
//! non-maximum suppression.
//!
//! Boxes are corner-form `(x1, y1, x2, y2)` in continuous pixel coordinates
//! (x rightward, y downward, origin top-left); areas are measured
//! continuously rather than by pixel counting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): need x2 > x1 and y2 > y1")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("invalid anchor config: {0}")]
    InvalidAnchorConfig(String),
}

/// Axis-aligned box with positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        if !(x2 > x1 && y2 > y1) || [x1, y1, x2, y2].iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Box from center point and side lengths.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    /// True if `self` lies entirely within `[0, w] x [0, h]`.
    pub fn within(&self, w: f64, h: f64) -> bool {
        self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= w && self.y2 <= h
    }
}

/// Intersection-over-union of two boxes, in [0, 1].
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Anchor grid configuration: one anchor per (cell, scale, ratio).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    stride: u32,
    scales: Vec<f64>,
    ratios: Vec<f64>,
}

impl AnchorConfig {
    pub fn new(stride: u32, scales: Vec<f64>, ratios: Vec<f64>) -> Result<Self, GeometryError> {
        if stride < 1 {
            return Err(GeometryError::InvalidAnchorConfig("stride must be >= 1".into()));
        }
        if scales.is_empty() || ratios.is_empty() {
            return Err(GeometryError::InvalidAnchorConfig(
                "scales and ratios must be non-empty".into(),
            ));
        }
        if scales.iter().chain(&ratios).any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(GeometryError::InvalidAnchorConfig(
                "scales and ratios must be positive and finite".into(),
            ));
        }
        Ok(Self { stride, scales, ratios })
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }
}

impl Default for AnchorConfig {
    /// Stride 16 with scales {32, 64, 128} and ratios {0.5, 1, 2}, sized for
    /// 256-512 px images.
    fn default() -> Self {
        Self::new(16, vec![32.0, 64.0, 128.0], vec![0.5, 1.0, 2.0]).unwrap()
    }
}

/// An anchor box plus whether it lies fully inside the source image.
/// Out-of-bounds anchors are flagged, never clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub bbox: BBox,
    pub in_bounds: bool,
}

/// Anchors for every (grid cell, scale, ratio), centered at
/// `((i + 0.5) * stride, (j + 0.5) * stride)` with `width = scale / sqrt(ratio)`
/// and `height = scale * sqrt(ratio)`.
///
/// The count is exactly `floor(w/stride) * floor(h/stride) * |scales| * |ratios|`.
pub fn generate_anchors(img_w: u32, img_h: u32, cfg: &AnchorConfig) -> Vec<Anchor> {
    assert!(
        img_w >= cfg.stride && img_h >= cfg.stride,
        "image must be at least one stride in each dimension"
    );
    let cells_x = img_w / cfg.stride;
    let cells_y = img_h / cfg.stride;
    let mut anchors =
        Vec::with_capacity((cells_x * cells_y) as usize * cfg.scales.len() * cfg.ratios.len());
    for j in 0..cells_y {
        for i in 0..cells_x {
            let cx = (i as f64 + 0.5) * cfg.stride as f64;
            let cy = (j as f64 + 0.5) * cfg.stride as f64;
            for &scale in &cfg.scales {
                for &ratio in &cfg.ratios {
                    let w = scale / ratio.sqrt();
                    let h = scale * ratio.sqrt();
                    let bbox = BBox::from_center(cx, cy, w, h)
                        .expect("positive scale and ratio yield a valid box");
                    let in_bounds = bbox.within(img_w as f64, img_h as f64);
                    anchors.push(Anchor { bbox, in_bounds });
                }
            }
        }
    }
    anchors
}

/// Box-regression parameterization relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionTarget {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl RegressionTarget {
    pub fn zero() -> Self {
        Self { tx: 0.0, ty: 0.0, tw: 0.0, th: 0.0 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.tx, self.ty, self.tw, self.th]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { tx: v[0], ty: v[1], tw: v[2], th: v[3] }
    }
}

/// Encode `gt` relative to `anchor`:
/// `tx = (gx-ax)/aw`, `ty = (gy-ay)/ah`, `tw = ln(gw/aw)`, `th = ln(gh/ah)`.
pub fn encode_box(gt: &BBox, anchor: &BBox) -> RegressionTarget {
    let (gx, gy) = gt.center();
    let (ax, ay) = anchor.center();
    RegressionTarget {
        tx: (gx - ax) / anchor.width(),
        ty: (gy - ay) / anchor.height(),
        tw: (gt.width() / anchor.width()).ln(),
        th: (gt.height() / anchor.height()).ln(),
    }
}

/// Exact inverse of [`encode_box`].
pub fn decode_box(t: &RegressionTarget, anchor: &BBox) -> BBox {
    assert!(
        t.as_array().iter().all(|v| v.is_finite()),
        "regression target must be finite"
    );
    let (ax, ay) = anchor.center();
    let cx = ax + t.tx * anchor.width();
    let cy = ay + t.ty * anchor.height();
    let w = anchor.width() * t.tw.exp();
    let h = anchor.height() * t.th.exp();
    BBox::from_center(cx, cy, w, h).expect("exp() keeps extents positive")
}

/// Greedy non-maximum suppression.
///
/// Boxes are processed in descending score order (ties broken by original
/// index, lower index first); a box is kept unless its IoU with an
/// already-kept box exceeds `iou_threshold`. Kept boxes retain that order.
pub fn nms(dets: &[(BBox, f64)], iou_threshold: f64) -> Vec<(BBox, f64)> {
    assert!(
        (0.0..=1.0).contains(&iou_threshold),
        "iou_threshold must be in [0, 1]"
    );
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable sort keeps original index order within equal scores
    order.sort_by(|&a, &b| dets[b].1.partial_cmp(&dets[a].1).expect("finite scores"));
    let mut kept: Vec<(BBox, f64)> = Vec::new();
    for &i in &order {
        let (bbox, score) = dets[i];
        if kept.iter().all(|(k, _)| iou(k, &bbox) <= iou_threshold) {
            kept.push((bbox, score));
        }
    }
    kept
}
