//! One-off probe of the pinned JPEG codec: prints the subsampling layout and
//! the empirical recompression error bounds that the test-suite freezes.

use elakit::ela::compute_ela;
use elakit::fixtures;
use elakit::imaging::{
    decode_jpeg, encode_jpeg, to_jpeg_domain, ImageBuffer, PixelFormat, Quality,
};

fn q(v: u32) -> Quality {
    Quality::new(v).unwrap()
}

fn max_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> u8 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as i16 - y as i16).unsigned_abs() as u8)
        .max()
        .unwrap()
}

fn sof_sampling(bytes: &[u8]) -> String {
    let mut i = 2;
    while i + 4 <= bytes.len() {
        if bytes[i] != 0xFF {
            i += 1;
            continue;
        }
        let marker = bytes[i + 1];
        if (0xC0..=0xCF).contains(&marker) && marker != 0xC4 && marker != 0xC8 && marker != 0xCC {
            let ncomp = bytes[i + 9] as usize;
            let mut out = format!("SOF{:X} components:", marker - 0xC0);
            for c in 0..ncomp {
                let base = i + 10 + c * 3;
                out += &format!(
                    " id{}={}x{}",
                    bytes[base],
                    bytes[base + 1] >> 4,
                    bytes[base + 1] & 0xF
                );
            }
            return out;
        }
        let len = ((bytes[i + 2] as usize) << 8) | bytes[i + 3] as usize;
        i += 2 + len;
    }
    "no SOF found".into()
}

fn main() {
    let midgray = ImageBuffer::filled(64, 64, PixelFormat::Rgb8, 128);
    let bytes = encode_jpeg(&midgray, q(90)).unwrap();
    println!("codec: {}", sof_sampling(&bytes));
    println!("stream size 64x64 midgray q90: {} bytes", bytes.len());

    let rt = decode_jpeg(&bytes).unwrap();
    println!("midgray 64x64 q90 roundtrip max err: {}", max_abs_diff(&midgray, &rt));

    let black = ImageBuffer::filled(8, 8, PixelFormat::Rgb8, 0);
    let back = to_jpeg_domain(&black, q(95)).unwrap();
    println!(
        "black 8x8 q95 roundtrip max pixel: {}",
        back.data().iter().copied().max().unwrap()
    );

    println!("\n-- to_jpeg_domain double application (q0=95) --");
    for (i, img) in fixtures::fixture_suite(96, 80).iter().enumerate() {
        let once = to_jpeg_domain(img, q(95)).unwrap();
        let twice = to_jpeg_domain(&once, q(95)).unwrap();
        let e1 = max_abs_diff(img, &once);
        let e2 = max_abs_diff(&once, &twice);
        println!("fixture {i}: first-pass {e1}, second-pass {e2}, ok={}", e2 <= e1);
    }

    println!("\n-- ELA null (recompress at own quality) --");
    let qualities = [60u32, 70, 75, 80, 85, 90, 92, 95, 98, 100];
    for (i, img) in fixtures::fixture_suite(96, 80).iter().enumerate() {
        let qi = q(qualities[i]);
        let domain = to_jpeg_domain(img, qi).unwrap();
        let ela = compute_ela(&domain, qi, 10.0).unwrap();
        println!(
            "fixture {i} q{}: max diff {}, mean {:.3}",
            qualities[i],
            ela.diff.max(),
            ela.diff.mean()
        );
    }

    println!("\n-- ELA discrimination (q60 patch in q95 host, ELA at q90) --");
    for seed in 0..5u64 {
        let host = fixtures::soft_scene(32, 32, 1000 + seed);
        let patch_src = fixtures::texture_patchwork(16, 16, 2000 + seed);
        let patch = to_jpeg_domain(&patch_src, q(60)).unwrap();
        // paste at (8, 8), block-aligned
        let mut data = host.data().to_vec();
        for y in 0..16u32 {
            for x in 0..16u32 {
                let src = patch.pixel(x, y);
                let di = (((y + 8) * 32 + (x + 8)) * 3) as usize;
                data[di..di + 3].copy_from_slice(src);
            }
        }
        let composite = ImageBuffer::new(32, 32, PixelFormat::Rgb8, data).unwrap();
        let domain = to_jpeg_domain(&composite, q(95)).unwrap();
        let ela = compute_ela(&domain, q(90), 10.0).unwrap();
        // blocks: patch covers cells x,y in 1..=2
        let (mut inside, mut outside) = (vec![], vec![]);
        for by in 0..ela.block_scores.rows() {
            for bx in 0..ela.block_scores.cols() {
                let v = ela.block_scores.get(bx, by);
                if (1..=2).contains(&bx) && (1..=2).contains(&by) {
                    inside.push(v);
                } else {
                    outside.push(v);
                }
            }
        }
        let mi = inside.iter().sum::<f64>() / inside.len() as f64;
        let mo = outside.iter().sum::<f64>() / outside.len() as f64;
        println!("seed {seed}: inside {mi:.3}, outside {mo:.3}, ok={}", mi > mo);
    }
}
