//! Loss kernels for region-proposal training and two-stream fusion, with
//! analytic gradients validated against central finite differences.
//!
//! The region-proposal loss combines a cross-entropy classification term
//! normalized by the mini-batch size with a smooth-L1 regression term that
//! only positive anchors contribute to, weighted by `lambda / n_reg`. Stream
//! fusion is the transpose product of two feature matrices that share a
//! spatial grid.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::RegressionTarget;

/// Probabilities are clamped into `[PROB_EPSILON, 1 - PROB_EPSILON]` so the
/// cross entropy is total on [0, 1].
pub const PROB_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("length mismatch: g={g}, g_star={g_star}, f={f}, f_star={f_star}")]
    LengthMismatch {
        g: usize,
        g_star: usize,
        f: usize,
        f_star: usize,
    },
    #[error("anchor batch must contain at least one anchor")]
    EmptyBatch,
    #[error("invalid batch parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: left has {left} rows, right has {right}")]
    ShapeMismatch { left: usize, right: usize },
    #[error("negative loss component {name} = {value}")]
    NegativeComponent { name: &'static str, value: f64 },
    #[error("feature matrix expects {rows}x{cols} = {expected} entries, got {got}")]
    MatrixSize {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("feature matrix entries must be finite")]
    NonFiniteEntry,
}

/// Binary cross entropy `-(label ln p + (1-label) ln(1-p))` with the
/// probability clamped away from the endpoints.
pub fn cross_entropy(p: f64, label: bool) -> f64 {
    let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of [`cross_entropy`] with respect to `p`. Zero in the clamped
/// regions, where the loss is constant.
pub fn cross_entropy_grad(p: f64, label: bool) -> f64 {
    if !(PROB_EPSILON..=1.0 - PROB_EPSILON).contains(&p) {
        return 0.0;
    }
    if label {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// Smooth L1: `0.5 x^2` for `|x| < 1`, otherwise `|x| - 0.5`.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Derivative of [`smooth_l1`]: `x` inside the quadratic region, `sign(x)`
/// outside; the two branches agree at `|x| = 1`.
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// One mini-batch of anchor predictions and targets.
///
/// `g` holds predicted manipulation probabilities, `g_star` the ground-truth
/// labels, `f`/`f_star` the predicted and ground-truth box regressions.
#[derive(Debug, Clone)]
pub struct AnchorBatch {
    g: Vec<f64>,
    g_star: Vec<bool>,
    f: Vec<RegressionTarget>,
    f_star: Vec<RegressionTarget>,
    n_cls: usize,
    n_reg: usize,
    lambda: f64,
}

impl AnchorBatch {
    pub fn new(
        g: Vec<f64>,
        g_star: Vec<bool>,
        f: Vec<RegressionTarget>,
        f_star: Vec<RegressionTarget>,
        n_cls: usize,
        n_reg: usize,
        lambda: f64,
    ) -> Result<Self, LossError> {
        if g.len() != g_star.len() || g.len() != f.len() || g.len() != f_star.len() {
            return Err(LossError::LengthMismatch {
                g: g.len(),
                g_star: g_star.len(),
                f: f.len(),
                f_star: f_star.len(),
            });
        }
        if g.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        if n_cls == 0 || n_reg == 0 {
            return Err(LossError::InvalidParameter(
                "n_cls and n_reg must be positive".into(),
            ));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(LossError::InvalidParameter("lambda must be >= 0".into()));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(LossError::InvalidParameter("g must be finite".into()));
        }
        Ok(Self {
            g,
            g_star,
            f,
            f_star,
            n_cls,
            n_reg,
            lambda,
        })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn g_star(&self) -> &[bool] {
        &self.g_star
    }

    pub fn f(&self) -> &[RegressionTarget] {
        &self.f
    }

    pub fn f_star(&self) -> &[RegressionTarget] {
        &self.f_star
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Batch with the predictions `g` and `f` replaced; targets and
    /// normalizers are kept. Used by the finite-difference harness.
    pub fn with_predictions(
        &self,
        g: Vec<f64>,
        f: Vec<RegressionTarget>,
    ) -> Result<Self, LossError> {
        Self::new(
            g,
            self.g_star.clone(),
            f,
            self.f_star.clone(),
            self.n_cls,
            self.n_reg,
            self.lambda,
        )
    }
}

/// Region-proposal loss value plus its gradient with respect to the
/// predictions.
#[derive(Debug, Clone)]
pub struct RpnLoss {
    pub loss: f64,
    /// d loss / d g_i.
    pub grad_g: Vec<f64>,
    /// d loss / d f_i, in (tx, ty, tw, th) order.
    pub grad_f: Vec<[f64; 4]>,
}

/// Classification mean over the batch plus the gated, `lambda`-weighted
/// regression term:
/// `(1/n_cls) sum_i ce(g_i, g*_i) + lambda (1/n_reg) sum_i g*_i sum_d sl1(f_i[d] - f*_i[d])`.
pub fn rpn_loss(batch: &AnchorBatch) -> RpnLoss {
    let n = batch.len();
    let cls_norm = 1.0 / batch.n_cls as f64;
    let reg_norm = batch.lambda / batch.n_reg as f64;
    let mut loss = 0.0;
    let mut grad_g = Vec::with_capacity(n);
    let mut grad_f = Vec::with_capacity(n);
    for i in 0..n {
        let label = batch.g_star[i];
        loss += cls_norm * cross_entropy(batch.g[i], label);
        grad_g.push(cls_norm * cross_entropy_grad(batch.g[i], label));
        let mut gf = [0.0; 4];
        if label {
            let p = batch.f[i].as_array();
            let t = batch.f_star[i].as_array();
            for d in 0..4 {
                let r = p[d] - t[d];
                loss += reg_norm * smooth_l1(r);
                gf[d] = reg_norm * smooth_l1_grad(r);
            }
        }
        grad_f.push(gf);
    }
    RpnLoss { loss, grad_g, grad_f }
}

/// Dense row-major real matrix standing in for a pooled RoI feature map:
/// rows are spatial positions, columns are channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LossError> {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        if data.len() != rows * cols {
            return Err(LossError::MatrixSize {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFiniteEntry);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "matrix index out of bounds");
        self.data[r * self.cols + c]
    }
}

/// Two-stream fusion `x = a^T b` over a shared spatial grid; the output is
/// `a.cols x b.cols` and sums over aligned positions.
pub fn bilinear_pool(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<FeatureMatrix, LossError> {
    if a.rows != b.rows {
        return Err(LossError::ShapeMismatch {
            left: a.rows,
            right: b.rows,
        });
    }
    let mut data = vec![0.0; a.cols * b.cols];
    for r in 0..a.rows {
        let ra = &a.data[r * a.cols..(r + 1) * a.cols];
        let rb = &b.data[r * b.cols..(r + 1) * b.cols];
        for (ca, &va) in ra.iter().enumerate() {
            let out = &mut data[ca * b.cols..(ca + 1) * b.cols];
            for (cb, &vb) in rb.iter().enumerate() {
                out[cb] += va * vb;
            }
        }
    }
    FeatureMatrix::new(a.cols, b.cols, data)
}

/// Optional post-processing for pooled features: element-wise signed square
/// root followed by global L2 normalization. Off by default; the raw
/// transpose product is the canonical fusion output.
pub fn signed_sqrt_l2_normalize(m: &FeatureMatrix) -> FeatureMatrix {
    let mut data: Vec<f64> = m.data.iter().map(|&v| v.signum() * v.abs().sqrt()).collect();
    let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut data {
            *v /= norm;
        }
    }
    FeatureMatrix::new(m.rows, m.cols, data).expect("same shape, finite entries")
}

/// Total training loss `l_rpn + l_tamper + l_bbox` with its components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub l_rpn: f64,
    pub l_tamper: f64,
    pub l_bbox: f64,
    pub l_total: f64,
}

/// Sum already-computed loss components; each must be non-negative.
pub fn total_loss(l_rpn: f64, l_tamper: f64, l_bbox: f64) -> Result<LossBreakdown, LossError> {
    for (name, value) in [("l_rpn", l_rpn), ("l_tamper", l_tamper), ("l_bbox", l_bbox)] {
        if !(value >= 0.0) {
            return Err(LossError::NegativeComponent { name, value });
        }
    }
    Ok(LossBreakdown {
        l_rpn,
        l_tamper,
        l_bbox,
        l_total: l_rpn + l_tamper + l_bbox,
    })
}

/// Compare an analytic gradient against central finite differences
/// `(f(x + h e_i) - f(x - h e_i)) / 2h`, returning the maximum relative
/// error over coordinates.
///
/// The point must avoid non-smooth loci of `f` (for [`smooth_l1`], the
/// kinks at `|x| = 1`) by at least `10 h`.
pub fn grad_check(f: impl Fn(&[f64]) -> f64, analytic: &[f64], point: &[f64], h: f64) -> f64 {
    assert_eq!(analytic.len(), point.len(), "gradient/point length mismatch");
    assert!(h > 0.0, "step must be positive");
    let mut max_rel = 0.0f64;
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let fp = f(&x);
        x[i] = point[i] - h;
        let fm = f(&x);
        x[i] = point[i];
        let fd = (fp - fm) / (2.0 * h);
        let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    max_rel
}
