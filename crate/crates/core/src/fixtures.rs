//! Deterministic procedural images and corpora.
//!
//! Everything here is a pure function of its seed, so tests, benchmarks and
//! demo datasets regenerate byte-identically. The generators cover the
//! texture range that matters for recompression analysis: flat fields and
//! smooth scenes (low block energy) through stripes and noise (high block
//! energy).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::imaging::{save_jpeg, ImageBuffer, ImagingError, Quality};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Independent uniform noise per channel.
pub fn noise_image(width: u32, height: u32, seed: u64) -> ImageBuffer {
    let mut r = rng(seed);
    ImageBuffer::from_rgb_fn(width, height, |_, _| [r.gen(), r.gen(), r.gen()])
}

/// Bilinear interpolation of four random corner colors.
pub fn smooth_gradient(width: u32, height: u32, seed: u64) -> ImageBuffer {
    let mut r = rng(seed);
    let corners: [[f64; 3]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| r.gen_range(0.0..=255.0)));
    let wm = (width - 1).max(1) as f64;
    let hm = (height - 1).max(1) as f64;
    ImageBuffer::from_rgb_fn(width, height, |x, y| {
        let u = x as f64 / wm;
        let v = y as f64 / hm;
        std::array::from_fn(|c| {
            let top = corners[0][c] * (1.0 - u) + corners[1][c] * u;
            let bottom = corners[2][c] * (1.0 - u) + corners[3][c] * u;
            (top * (1.0 - v) + bottom * v).round().clamp(0.0, 255.0) as u8
        })
    })
}

/// Smooth scene: gradient background, a few soft-edged disks, mild noise.
pub fn soft_scene(width: u32, height: u32, seed: u64) -> ImageBuffer {
    let mut r = rng(seed);
    let base = smooth_gradient(width, height, r.gen());
    let n_blobs = r.gen_range(3..=6);
    let blobs: Vec<([f64; 2], f64, [f64; 3])> = (0..n_blobs)
        .map(|_| {
            let cx = r.gen_range(0.0..width as f64);
            let cy = r.gen_range(0.0..height as f64);
            let radius = r.gen_range(width.min(height) as f64 * 0.1..width.min(height) as f64 * 0.3);
            let color = std::array::from_fn(|_| r.gen_range(0.0..=255.0));
            ([cx, cy], radius, color)
        })
        .collect();
    let mut noise = rng(r.gen());
    ImageBuffer::from_rgb_fn(width, height, |x, y| {
        let mut px: [f64; 3] = std::array::from_fn(|c| base.pixel(x, y)[c] as f64);
        for ([cx, cy], radius, color) in &blobs {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            // linear falloff over the outer 40% of the radius
            let t = ((radius - d) / (0.4 * radius)).clamp(0.0, 1.0);
            for c in 0..3 {
                px[c] = px[c] * (1.0 - t) + color[c] * t;
            }
        }
        std::array::from_fn(|c| {
            (px[c] + noise.gen_range(-2.0..=2.0)).round().clamp(0.0, 255.0) as u8
        })
    })
}

/// Strongly textured content: striped/checkered cells with per-pixel noise.
pub fn texture_patchwork(width: u32, height: u32, seed: u64) -> ImageBuffer {
    let mut r = rng(seed);
    let cell = r.gen_range(3..=8u32);
    let a: [f64; 3] = std::array::from_fn(|_| r.gen_range(0.0..=255.0));
    let b: [f64; 3] = std::array::from_fn(|_| r.gen_range(0.0..=255.0));
    let diagonal = r.gen_bool(0.5);
    let amp = r.gen_range(15.0..=35.0);
    let mut noise = rng(r.gen());
    ImageBuffer::from_rgb_fn(width, height, |x, y| {
        let k = if diagonal {
            (x / cell + y / cell) % 2
        } else {
            (x / cell) % 2
        };
        let color = if k == 0 { &a } else { &b };
        std::array::from_fn(|c| {
            (color[c] + noise.gen_range(-amp..=amp)).round().clamp(0.0, 255.0) as u8
        })
    })
}

/// Ten diverse raw (not yet JPEG-domain) fixture images.
pub fn fixture_suite(width: u32, height: u32) -> Vec<ImageBuffer> {
    vec![
        noise_image(width, height, 101),
        noise_image(width, height, 102),
        smooth_gradient(width, height, 201),
        smooth_gradient(width, height, 202),
        soft_scene(width, height, 301),
        soft_scene(width, height, 302),
        soft_scene(width, height, 303),
        texture_patchwork(width, height, 401),
        texture_patchwork(width, height, 402),
        ImageBuffer::filled(width, height, crate::imaging::PixelFormat::Rgb8, 128),
    ]
}

/// Write `count` textured images to `dir` as JPEGs whose quality cycles
/// through `qualities`, returning the written file names.
pub fn write_textured_jpegs(
    dir: &Path,
    count: usize,
    seed: u64,
    qualities: &[u32],
) -> Result<Vec<String>, ImagingError> {
    assert!(!qualities.is_empty());
    let mut names = Vec::with_capacity(count);
    for i in 0..count {
        let img = texture_patchwork(256, 256, seed.wrapping_add(i as u64));
        let q = Quality::new(qualities[i % qualities.len()])?;
        let name = format!("texture_{i:03}.jpg");
        save_jpeg(&img, q, &dir.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(noise_image(16, 16, 5), noise_image(16, 16, 5));
        assert_eq!(soft_scene(32, 24, 9), soft_scene(32, 24, 9));
        assert_ne!(noise_image(16, 16, 5), noise_image(16, 16, 6));
    }

    #[test]
    fn suite_has_ten_distinct_images() {
        let suite = fixture_suite(32, 32);
        assert_eq!(suite.len(), 10);
        for i in 0..suite.len() {
            for j in (i + 1)..suite.len() {
                assert_ne!(suite[i], suite[j], "fixtures {i} and {j} coincide");
            }
        }
    }
}
