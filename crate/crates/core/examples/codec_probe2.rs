//! Second probe round: ELA-null quality sweep per content class, and
//! discrimination sign/margins for aligned vs misaligned pastes.

use elakit::ela::compute_ela;
use elakit::fixtures;
use elakit::imaging::{to_jpeg_domain, ImageBuffer, PixelFormat, Quality};

fn q(v: u32) -> Quality {
    Quality::new(v).unwrap()
}

fn null_max(img: &ImageBuffer, quality: u32) -> u8 {
    let domain = to_jpeg_domain(img, q(quality)).unwrap();
    compute_ela(&domain, q(quality), 10.0).unwrap().diff.max()
}

fn paste(host: &ImageBuffer, patch: &ImageBuffer, ox: u32, oy: u32) -> ImageBuffer {
    let mut data = host.data().to_vec();
    for y in 0..patch.height() {
        for x in 0..patch.width() {
            let di = (((y + oy) * host.width() + (x + ox)) * 3) as usize;
            data[di..di + 3].copy_from_slice(patch.pixel(x, y));
        }
    }
    ImageBuffer::new(host.width(), host.height(), PixelFormat::Rgb8, data).unwrap()
}

/// (inside mean, outside mean) of block scores for a centred box.
fn contrast(
    host: &ImageBuffer,
    patch_seed: u64,
    patch_q: u32,
    host_q: u32,
    ela_q: u32,
    ox: u32,
    oy: u32,
    pw: u32,
    ph: u32,
) -> (f64, f64) {
    let patch_src = fixtures::texture_patchwork(pw, ph, patch_seed);
    let patch = to_jpeg_domain(&patch_src, q(patch_q)).unwrap();
    let composite = paste(host, &patch, ox, oy);
    let domain = to_jpeg_domain(&composite, q(host_q)).unwrap();
    let ela = compute_ela(&domain, q(ela_q), 10.0).unwrap();
    let (mut ins, mut outs) = (vec![], vec![]);
    for by in 0..ela.block_scores.rows() as u32 {
        for bx in 0..ela.block_scores.cols() as u32 {
            let v = ela.block_scores.get(bx as usize, by as usize);
            let cx0 = bx * 8;
            let cy0 = by * 8;
            // cell fully inside pasted box?
            if cx0 >= ox && cy0 >= oy && cx0 + 8 <= ox + pw && cy0 + 8 <= oy + ph {
                ins.push(v);
            } else if cx0 + 8 <= ox || cy0 + 8 <= oy || cx0 >= ox + pw || cy0 >= oy + ph {
                outs.push(v);
            }
        }
    }
    (
        ins.iter().sum::<f64>() / ins.len() as f64,
        outs.iter().sum::<f64>() / outs.len() as f64,
    )
}

fn main() {
    println!("-- ELA null max diff by content x quality --");
    let contents: Vec<(&str, ImageBuffer)> = vec![
        ("noise", fixtures::noise_image(96, 96, 11)),
        ("patchwork", fixtures::texture_patchwork(96, 96, 12)),
        ("soft_scene", fixtures::soft_scene(96, 96, 13)),
        ("gradient", fixtures::smooth_gradient(96, 96, 14)),
    ];
    print!("{:<12}", "quality");
    for (name, _) in &contents {
        print!("{name:>11}");
    }
    println!();
    for quality in [60, 70, 75, 80, 85, 90, 95, 98] {
        print!("{quality:<12}");
        for (_, img) in &contents {
            print!("{:>11}", null_max(img, quality));
        }
        println!();
    }

    println!("\n-- discrimination: host 128x128, patch 48x48, host q95 --");
    println!("(in/out block-score means; patch history vs ELA quality vs paste offset)");
    for patch_q in [55u32, 60, 70] {
        for ela_q in [90u32, 95] {
            for (label, ox, oy) in [("aligned", 40u32, 40u32), ("misaligned", 43, 45)] {
                let mut worst: f64 = f64::INFINITY;
                let mut ratios = vec![];
                for seed in 0..6u64 {
                    let host = fixtures::soft_scene(128, 128, 3000 + seed);
                    let (mi, mo) = contrast(&host, 4000 + seed, patch_q, 95, ela_q, ox, oy, 48, 48);
                    let r = mi / mo.max(1e-9);
                    ratios.push(r);
                    worst = worst.min(r);
                }
                let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
                println!(
                    "patch q{patch_q} ela q{ela_q} {label:<11} ratio avg {avg:>7.2} worst {worst:>7.2}"
                );
            }
        }
    }
}
