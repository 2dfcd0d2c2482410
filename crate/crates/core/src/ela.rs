//! Error level analysis: recompression difference maps, 8x8 block scores,
//! and amplified greyscale heatmaps.
//!
//! The procedure: re-encode the image as JPEG at a (slightly lower) quality,
//! decode it back, take the per-pixel absolute difference against the input,
//! reduce over channels, and aggregate per 8x8 block. Regions whose
//! compression history differs from the rest of the image stand out in the
//! resulting map.

use serde::Serialize;

use crate::imaging::{
    decode_jpeg, encode_jpeg, ImageBuffer, ImagingError, PixelFormat, Quality,
};

/// Side length of the JPEG block grid, in pixels.
pub const BLOCK: u32 = 8;

/// Single-channel per-pixel difference map with values in 0..=255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffMap {
    width: u32,
    height: u32,
    values: Vec<u8>,
}

impl DiffMap {
    pub fn new(width: u32, height: u32, values: Vec<u8>) -> Self {
        assert!(width >= 1 && height >= 1, "diff map dimensions must be >= 1");
        assert_eq!(
            values.len(),
            width as usize * height as usize,
            "diff map length mismatch"
        );
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "diff index out of bounds");
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn max(&self) -> u8 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as u64).sum::<u64>() as f64 / self.values.len() as f64
    }
}

/// Grid of per-block mean difference scores; cell (x, y) covers pixels
/// `[8x, min(8x+8, w)) x [8y, min(8y+8, h))`. Serialized row-major, row = y.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Vec<Vec<f64>>")]
pub struct BlockGrid {
    cols: usize,
    rows: usize,
    scores: Vec<f64>,
}

impl BlockGrid {
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(x < self.cols && y < self.rows, "grid index out of bounds");
        self.scores[y * self.cols + x]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Row-major nested rows (row = y), the JSON wire shape.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.scores.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

impl From<BlockGrid> for Vec<Vec<f64>> {
    fn from(grid: BlockGrid) -> Self {
        grid.to_rows()
    }
}

/// Output of [`compute_ela`]: the raw difference map, its block-score grid,
/// and the amplified greyscale heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct ElaResult {
    pub diff: DiffMap,
    pub block_scores: BlockGrid,
    pub heatmap: ImageBuffer,
}

/// Run error level analysis on an RGB8 image already in the JPEG domain.
///
/// Re-encodes at quality `q`, decodes, and differences against `img`. The
/// per-pixel value is the channel-mean absolute difference rounded to the
/// nearest integer; the heatmap is `min(255, round(scale * diff))`.
pub fn compute_ela(img: &ImageBuffer, q: Quality, scale: f64) -> Result<ElaResult, ImagingError> {
    assert!(scale > 0.0, "heatmap scale must be positive");
    let recompressed = decode_jpeg(&encode_jpeg(img, q)?)?;
    Ok(ela_from_pair(img, &recompressed, scale))
}

/// Difference stage of ELA for an already-decoded recompression pair.
pub(crate) fn ela_from_pair(original: &ImageBuffer, recompressed: &ImageBuffer, scale: f64) -> ElaResult {
    assert_eq!(original.format(), PixelFormat::Rgb8);
    assert_eq!(original.width(), recompressed.width());
    assert_eq!(original.height(), recompressed.height());
    let (w, h) = (original.width(), original.height());
    let a = original.data();
    let b = recompressed.data();
    let mut values = Vec::with_capacity(w as usize * h as usize);
    for i in 0..(w as usize * h as usize) {
        let base = i * 3;
        let sum: u32 = (0..3)
            .map(|c| (a[base + c] as i32 - b[base + c] as i32).unsigned_abs())
            .sum();
        values.push((sum as f64 / 3.0).round() as u8);
    }
    let diff = DiffMap::new(w, h, values);
    ela_from_diff(diff, scale)
}

/// Block scoring and heatmap stages for a precomputed difference map.
pub(crate) fn ela_from_diff(diff: DiffMap, scale: f64) -> ElaResult {
    assert!(scale > 0.0, "heatmap scale must be positive");
    let block_scores = block_grid(&diff, BLOCK);
    let heat: Vec<u8> = diff
        .values()
        .iter()
        .map(|&v| (scale * v as f64).round().min(255.0) as u8)
        .collect();
    let heatmap = ImageBuffer::new(diff.width(), diff.height(), PixelFormat::Gray8, heat)
        .expect("heatmap length matches diff map");
    ElaResult {
        diff,
        block_scores,
        heatmap,
    }
}

/// Mean of `diff` over each `block`-sized cell; partial edge blocks average
/// over only the pixels they actually cover.
pub fn block_grid(diff: &DiffMap, block: u32) -> BlockGrid {
    assert!(block >= 1, "block size must be >= 1");
    let (w, h) = (diff.width() as usize, diff.height() as usize);
    let block = block as usize;
    let cols = w.div_ceil(block);
    let rows = h.div_ceil(block);
    let mut scores = Vec::with_capacity(cols * rows);
    for by in 0..rows {
        for bx in 0..cols {
            let x0 = bx * block;
            let y0 = by * block;
            let x1 = (x0 + block).min(w);
            let y1 = (y0 + block).min(h);
            let mut sum = 0u64;
            for y in y0..y1 {
                let row = y * w;
                for x in x0..x1 {
                    sum += diff.values()[row + x] as u64;
                }
            }
            let count = (x1 - x0) * (y1 - y0);
            scores.push(sum as f64 / count as f64);
        }
    }
    BlockGrid { cols, rows, scores }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::to_jpeg_domain;

    fn q(v: u32) -> Quality {
        Quality::new(v).unwrap()
    }

    #[test]
    fn uniform_midgray_has_zero_ela() {
        // Uniform 128 maps to all-zero DCT coefficients, so it is a fixed
        // point of the codec and the difference vanishes everywhere.
        let img = ImageBuffer::filled(32, 32, PixelFormat::Rgb8, 128);
        let img = to_jpeg_domain(&img, q(90)).unwrap();
        let ela = compute_ela(&img, q(90), 10.0).unwrap();
        assert_eq!(ela.diff.max(), 0);
        assert!(ela.block_scores.scores().iter().all(|&s| s == 0.0));
        assert!(ela.heatmap.data().iter().all(|&p| p == 0));
    }

    #[test]
    fn heatmap_clamps_at_255() {
        let diff = DiffMap::new(2, 1, vec![30, 3]);
        let ela = ela_from_diff(diff, 10.0);
        assert_eq!(ela.heatmap.data(), &[255, 30]);
    }

    #[test]
    fn block_grid_constant_field() {
        let diff = DiffMap::new(16, 8, vec![1; 16 * 8]);
        let grid = block_grid(&diff, 8);
        assert_eq!((grid.cols(), grid.rows()), (2, 1));
        assert_eq!(grid.scores(), &[1.0, 1.0]);
    }

    #[test]
    fn block_grid_zero_single_cell() {
        let diff = DiffMap::new(8, 8, vec![0; 64]);
        let grid = block_grid(&diff, 8);
        assert_eq!((grid.cols(), grid.rows()), (1, 1));
        assert_eq!(grid.get(0, 0), 0.0);
    }

    #[test]
    fn block_grid_partial_edge_block_uses_true_count() {
        // 9x8: the rightmost 1x8 strip is its own block, mean over 8 pixels.
        let mut values = vec![0u8; 9 * 8];
        for y in 0..8 {
            values[y * 9 + 8] = 8;
        }
        let diff = DiffMap::new(9, 8, values);
        let grid = block_grid(&diff, 8);
        assert_eq!((grid.cols(), grid.rows()), (2, 1));
        assert_eq!(grid.scores(), &[0.0, 8.0]);
    }

    #[test]
    fn block_mean_consistency() {
        // Sum over cells of score * covered-pixel-count equals the diff sum.
        let diff = DiffMap::new(
            13,
            11,
            (0..13u32 * 11).map(|i| (i * 37 % 251) as u8).collect(),
        );
        let grid = block_grid(&diff, 8);
        let mut recovered = 0.0;
        for by in 0..grid.rows() {
            for bx in 0..grid.cols() {
                let w = (13 - bx * 8).min(8);
                let h = (11 - by * 8).min(8);
                recovered += grid.get(bx, by) * (w * h) as f64;
            }
        }
        let direct: f64 = diff.values().iter().map(|&v| v as f64).sum();
        assert!((recovered - direct).abs() <= 1e-6 * direct.max(1.0));
    }

    #[test]
    fn heatmap_is_monotone_in_diff() {
        let values: Vec<u8> = (0..=255).map(|v| v as u8).collect();
        let diff = DiffMap::new(16, 16, values);
        let ela = ela_from_diff(diff, 3.5);
        let heat = ela.heatmap.data();
        let vals = ela.diff.values();
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                if vals[i] >= vals[j] {
                    assert!(heat[i] >= heat[j]);
                }
            }
        }
    }

    #[test]
    fn grid_serializes_as_row_major_rows() {
        let diff = DiffMap::new(16, 8, vec![1; 16 * 8]);
        let grid = block_grid(&diff, 8);
        let json = serde_json::to_string(&grid).unwrap();
        assert_eq!(json, "[[1.0,1.0]]");
    }

    #[test]
    fn ela_is_deterministic() {
        let img = crate::fixtures::texture_patchwork(48, 40, 7);
        let img = to_jpeg_domain(&img, q(85)).unwrap();
        let a = compute_ela(&img, q(75), 10.0).unwrap();
        let b = compute_ela(&img, q(75), 10.0).unwrap();
        assert_eq!(a, b);
    }
}
