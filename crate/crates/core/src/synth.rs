//! Synthetic spliced-image datasets: paste annotated object boxes from
//! source images into target images, carrying the box along as tamper
//! ground truth.
//!
//! Pastes are rectangular and translation-only (no rescaling or blending).
//! Generated images are re-encoded as JPEG after pasting, so the pasted
//! region's earlier compression history differs from its host - the signal
//! error level analysis responds to.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::geometry::BBox;
use crate::imaging::{encode_jpeg, load_image, ImageBuffer, ImagingError, PixelFormat, Quality};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error(transparent)]
    Image(#[from] ImagingError),
    #[error("no admissible placement for sample {sample} after {retries} retries")]
    NoAdmissiblePlacement { sample: usize, retries: u32 },
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("invalid annotation for {path}: {reason}")]
    InvalidAnnotation { path: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A ground-truth or object box with an optional label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    #[serde(flatten)]
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// One annotation record, one JSON object per line on disk.
///
/// As tamper ground truth (`validate`), an untampered record carries no
/// boxes. The same wire format also carries object boxes for splice
/// *sources*, where `tampered` is false and `boxes` outline pasteable
/// objects; source ingestion does not apply the ground-truth rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub tampered: bool,
    pub boxes: Vec<LabeledBox>,
}

impl Annotation {
    /// Check the tamper-ground-truth invariants: every box within
    /// `[0,width] x [0,height]`, and no boxes unless tampered.
    pub fn validate(&self) -> Result<(), SynthError> {
        if !self.tampered && !self.boxes.is_empty() {
            return Err(SynthError::InvalidAnnotation {
                path: self.image_path.clone(),
                reason: "untampered record must not carry boxes".into(),
            });
        }
        for b in &self.boxes {
            if !b.bbox.within(self.width as f64, self.height as f64) {
                return Err(SynthError::InvalidAnnotation {
                    path: self.image_path.clone(),
                    reason: format!(
                        "box ({}, {}, {}, {}) exceeds {}x{}",
                        b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2, self.width, self.height
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Read a JSON-lines annotation file; blank lines are ignored and parse
/// errors carry 1-based line numbers. Box geometry is validated.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>, SynthError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| SynthError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SynthError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ann: Annotation = serde_json::from_str(&line).map_err(|e| SynthError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        for b in &ann.boxes {
            BBox::new(b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2).map_err(|e| {
                SynthError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                }
            })?;
        }
        out.push(ann);
    }
    Ok(out)
}

/// Write annotations as JSON lines.
pub fn write_annotations(
    path: impl AsRef<Path>,
    annotations: &[Annotation],
) -> Result<(), SynthError> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| SynthError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    for ann in annotations {
        let line = serde_json::to_string(ann).expect("annotation serializes");
        writeln!(file, "{line}").map_err(|e| SynthError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    Ok(())
}

/// Instructions for one splice: crop `source_box` from `source_image` and
/// paste it into `target_image` at `paste_origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpliceRecipe {
    pub source_image: PathBuf,
    pub source_box: BBox,
    pub target_image: PathBuf,
    pub paste_origin: (u32, u32),
    pub rng_seed: u64,
}

/// Integer pixel rectangle; splice boxes are rounded onto the pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PixelRect {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

impl PixelRect {
    fn from_bbox(b: &BBox) -> Result<Self, SynthError> {
        let x = b.x1.round();
        let y = b.y1.round();
        let w = (b.x2 - b.x1).round();
        let h = (b.y2 - b.y1).round();
        if x < 0.0 || y < 0.0 || w < 1.0 || h < 1.0 {
            return Err(SynthError::OutOfBounds(format!(
                "box ({}, {}, {}, {}) does not round to a positive pixel rectangle",
                b.x1, b.y1, b.x2, b.y2
            )));
        }
        Ok(Self {
            x: x as u32,
            y: y as u32,
            w: w as u32,
            h: h as u32,
        })
    }
}

/// Copy the `rect` region of `source` into `target` at `origin`.
fn paste_rect(
    target: &ImageBuffer,
    source: &ImageBuffer,
    rect: PixelRect,
    origin: (u32, u32),
) -> Result<ImageBuffer, SynthError> {
    assert_eq!(target.format(), PixelFormat::Rgb8);
    assert_eq!(source.format(), PixelFormat::Rgb8);
    if rect.x + rect.w > source.width() || rect.y + rect.h > source.height() {
        return Err(SynthError::OutOfBounds(format!(
            "source box {}x{} at ({}, {}) exceeds source image {}x{}",
            rect.w,
            rect.h,
            rect.x,
            rect.y,
            source.width(),
            source.height()
        )));
    }
    let (ox, oy) = origin;
    if ox + rect.w > target.width() || oy + rect.h > target.height() {
        return Err(SynthError::OutOfBounds(format!(
            "pasted box {}x{} at ({}, {}) exceeds target image {}x{}",
            rect.w,
            rect.h,
            ox,
            oy,
            target.width(),
            target.height()
        )));
    }
    let mut data = target.data().to_vec();
    let tw = target.width() as usize;
    let sw = source.width() as usize;
    for row in 0..rect.h as usize {
        let src_start = ((rect.y as usize + row) * sw + rect.x as usize) * 3;
        let dst_start = ((oy as usize + row) * tw + ox as usize) * 3;
        let len = rect.w as usize * 3;
        data[dst_start..dst_start + len]
            .copy_from_slice(&source.data()[src_start..src_start + len]);
    }
    Ok(ImageBuffer::new(target.width(), target.height(), PixelFormat::Rgb8, data)
        .expect("paste preserves dimensions"))
}

/// Execute a splice recipe against the filesystem.
///
/// The output image equals the target everywhere outside the pasted
/// rectangle. The returned annotation holds the translated box with
/// `tampered = true`; its `image_path` is left empty for the dataset writer
/// to fill once the image has a home.
pub fn splice(recipe: &SpliceRecipe) -> Result<(ImageBuffer, Annotation), SynthError> {
    let source = load_image(&recipe.source_image)?;
    let target = load_image(&recipe.target_image)?;
    let rect = PixelRect::from_bbox(&recipe.source_box)?;
    let out = paste_rect(&target, &source, rect, recipe.paste_origin)?;
    let (ox, oy) = recipe.paste_origin;
    let annotation = Annotation {
        image_path: String::new(),
        width: target.width(),
        height: target.height(),
        tampered: true,
        boxes: vec![LabeledBox {
            bbox: BBox::new(
                ox as f64,
                oy as f64,
                (ox + rect.w) as f64,
                (oy + rect.h) as f64,
            )
            .expect("positive pixel rectangle"),
            label: None,
        }],
    };
    annotation.validate()?;
    Ok((out, annotation))
}

/// Parameters for [`generate_dataset`].
#[derive(Debug, Clone, Serialize)]
pub struct GenerateConfig {
    pub sources: PathBuf,
    pub targets: PathBuf,
    pub out: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub min_area_frac: f64,
    pub max_area_frac: f64,
    pub jpeg_quality: Quality,
    pub emit_originals: bool,
    pub max_retries: u32,
}

impl GenerateConfig {
    pub fn new(
        sources: impl Into<PathBuf>,
        targets: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
        count: usize,
        seed: u64,
    ) -> Self {
        Self {
            sources: sources.into(),
            targets: targets.into(),
            out: out.into(),
            count,
            seed,
            min_area_frac: 0.01,
            max_area_frac: 0.25,
            jpeg_quality: Quality::new(95).expect("default quality valid"),
            emit_originals: false,
            max_retries: 100,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.count < 1 {
            return Err(SynthError::InvalidConfig("count must be >= 1".into()));
        }
        if !(self.min_area_frac > 0.0
            && self.min_area_frac <= self.max_area_frac
            && self.max_area_frac <= 1.0)
        {
            return Err(SynthError::InvalidConfig(format!(
                "area fractions must satisfy 0 < min <= max <= 1 (got {} and {})",
                self.min_area_frac, self.max_area_frac
            )));
        }
        if self.max_retries == 0 {
            return Err(SynthError::InvalidConfig("max_retries must be >= 1".into()));
        }
        Ok(())
    }
}

/// Provenance record for one generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub image: String,
    pub recipe: SpliceRecipe,
}

/// Full provenance for a generated dataset: the effective configuration and
/// one recipe per sample. Written as `manifest.json` next to the images.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: GenerateConfig,
    pub samples: Vec<SampleRecord>,
}

struct SourceObject {
    image_index: usize,
    rect: PixelRect,
    label: Option<String>,
}

fn load_source_corpus(
    dir: &Path,
) -> Result<(Vec<(String, ImageBuffer)>, Vec<SourceObject>), SynthError> {
    let ann_path = dir.join("annotations.jsonl");
    let annotations = read_annotations(&ann_path)?;
    let mut images: Vec<(String, ImageBuffer)> = Vec::new();
    let mut index_by_path: BTreeMap<String, usize> = BTreeMap::new();
    let mut objects = Vec::new();
    for ann in &annotations {
        if ann.boxes.is_empty() {
            continue;
        }
        let image_index = match index_by_path.get(&ann.image_path) {
            Some(&i) => i,
            None => {
                let img = load_image(dir.join(&ann.image_path))?;
                images.push((ann.image_path.clone(), img));
                index_by_path.insert(ann.image_path.clone(), images.len() - 1);
                images.len() - 1
            }
        };
        let (w, h) = {
            let img = &images[image_index].1;
            (img.width(), img.height())
        };
        for b in &ann.boxes {
            let rect = PixelRect::from_bbox(&b.bbox)?;
            if rect.x + rect.w > w || rect.y + rect.h > h {
                return Err(SynthError::InvalidAnnotation {
                    path: ann.image_path.clone(),
                    reason: format!("object box exceeds the {w}x{h} image"),
                });
            }
            objects.push(SourceObject {
                image_index,
                rect,
                label: b.label.clone(),
            });
        }
    }
    if objects.is_empty() {
        return Err(SynthError::EmptyCorpus(format!(
            "no object boxes found via {}",
            ann_path.display()
        )));
    }
    Ok((images, objects))
}

fn load_target_corpus(dir: &Path) -> Result<Vec<(String, ImageBuffer)>, SynthError> {
    let entries = fs::read_dir(dir).map_err(|e| SynthError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut names: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| SynthError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let lower = name.to_lowercase();
        if lower.ends_with(".jpg") || lower.ends_with(".jpeg") || lower.ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(SynthError::EmptyCorpus(format!(
            "no JPEG or PNG images in {}",
            dir.display()
        )));
    }
    names
        .into_iter()
        .map(|name| {
            let img = load_image(dir.join(&name))?;
            Ok((name, img))
        })
        .collect()
}

/// Generate `config.count` spliced JPEGs plus `annotations.jsonl` and
/// `manifest.json` under `config.out`.
///
/// Sampling draws (object, target, origin) uniformly - the origin from a
/// corpus-wide maximal grid so every admissible triple is equally likely -
/// and rejects until the pasted box fits the target and its area fraction
/// lies within bounds. Sample `i` draws from an RNG seeded with `seed ^ i`,
/// so samples are independent of each other and of render parallelism.
pub fn generate_dataset(config: &GenerateConfig) -> Result<DatasetManifest, SynthError> {
    config.validate()?;
    let (source_images, objects) = load_source_corpus(&config.sources)?;
    let targets = load_target_corpus(&config.targets)?;
    let max_w = targets.iter().map(|(_, img)| img.width()).max().unwrap();
    let max_h = targets.iter().map(|(_, img)| img.height()).max().unwrap();

    struct Plan {
        object: usize,
        target: usize,
        origin: (u32, u32),
        rng_seed: u64,
    }

    let mut plans = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let sample_seed = config.seed ^ i as u64;
        let mut rng = ChaCha12Rng::seed_from_u64(sample_seed);
        let mut placed = None;
        for _ in 0..config.max_retries {
            let object = rng.gen_range(0..objects.len());
            let target = rng.gen_range(0..targets.len());
            let ox = rng.gen_range(0..max_w);
            let oy = rng.gen_range(0..max_h);
            let rect = objects[object].rect;
            let timg = &targets[target].1;
            if ox + rect.w > timg.width() || oy + rect.h > timg.height() {
                continue;
            }
            let frac = (rect.w as f64 * rect.h as f64)
                / (timg.width() as f64 * timg.height() as f64);
            if frac < config.min_area_frac || frac > config.max_area_frac {
                continue;
            }
            placed = Some(Plan {
                object,
                target,
                origin: (ox, oy),
                rng_seed: sample_seed,
            });
            break;
        }
        plans.push(placed.ok_or(SynthError::NoAdmissiblePlacement {
            sample: i,
            retries: config.max_retries,
        })?);
    }

    // Render in parallel; each sample is a pure function of its plan.
    let rendered: Result<Vec<(Vec<u8>, Option<Vec<u8>>)>, SynthError> = plans
        .par_iter()
        .map(|plan| {
            let obj = &objects[plan.object];
            let src = &source_images[obj.image_index].1;
            let tgt = &targets[plan.target].1;
            let composite = paste_rect(tgt, src, obj.rect, plan.origin)?;
            let bytes = encode_jpeg(&composite, config.jpeg_quality)?;
            let original = if config.emit_originals {
                Some(encode_jpeg(tgt, config.jpeg_quality)?)
            } else {
                None
            };
            Ok((bytes, original))
        })
        .collect();
    let rendered = rendered?;

    let images_dir = config.out.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| SynthError::Io {
        path: images_dir.clone(),
        source: e,
    })?;
    let originals_dir = config.out.join("originals");
    if config.emit_originals {
        fs::create_dir_all(&originals_dir).map_err(|e| SynthError::Io {
            path: originals_dir.clone(),
            source: e,
        })?;
    }

    let mut annotations = Vec::with_capacity(config.count * 2);
    let mut samples = Vec::with_capacity(config.count);
    let mut original_annotations = Vec::new();
    for (i, (plan, (bytes, original))) in plans.iter().zip(&rendered).enumerate() {
        let obj = &objects[plan.object];
        let rel = format!("images/sample_{i:06}.jpg");
        let file = config.out.join(&rel);
        fs::write(&file, bytes).map_err(|e| SynthError::Io {
            path: file.clone(),
            source: e,
        })?;

        let (ox, oy) = plan.origin;
        let tgt = &targets[plan.target].1;
        let annotation = Annotation {
            image_path: rel.clone(),
            width: tgt.width(),
            height: tgt.height(),
            tampered: true,
            boxes: vec![LabeledBox {
                bbox: BBox::new(
                    ox as f64,
                    oy as f64,
                    (ox + obj.rect.w) as f64,
                    (oy + obj.rect.h) as f64,
                )
                .expect("positive pixel rectangle"),
                label: obj.label.clone(),
            }],
        };
        annotation.validate()?;
        annotations.push(annotation);

        if let Some(orig_bytes) = original {
            let orel = format!("originals/sample_{i:06}.jpg");
            let ofile = config.out.join(&orel);
            fs::write(&ofile, orig_bytes).map_err(|e| SynthError::Io {
                path: ofile.clone(),
                source: e,
            })?;
            original_annotations.push(Annotation {
                image_path: orel,
                width: tgt.width(),
                height: tgt.height(),
                tampered: false,
                boxes: vec![],
            });
        }

        samples.push(SampleRecord {
            index: i,
            image: rel,
            recipe: SpliceRecipe {
                source_image: PathBuf::from(&source_images[obj.image_index].0),
                source_box: BBox::new(
                    obj.rect.x as f64,
                    obj.rect.y as f64,
                    (obj.rect.x + obj.rect.w) as f64,
                    (obj.rect.y + obj.rect.h) as f64,
                )
                .expect("positive pixel rectangle"),
                target_image: PathBuf::from(&targets[plan.target].0),
                paste_origin: plan.origin,
                rng_seed: plan.rng_seed,
            },
        });
    }
    annotations.extend(original_annotations);

    write_annotations(config.out.join("annotations.jsonl"), &annotations)?;

    let manifest = DatasetManifest {
        tool: "elakit",
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        samples,
    };
    let manifest_path = config.out.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json).map_err(|e| SynthError::Io {
        path: manifest_path,
        source: e,
    })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::imaging::save_jpeg;

    fn q(v: u32) -> Quality {
        Quality::new(v).unwrap()
    }

    #[test]
    fn self_paste_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let img = fixtures::texture_patchwork(40, 40, 3);
        let path = dir.path().join("img.png");
        crate::imaging::save_png(&img, &path).unwrap();
        let recipe = SpliceRecipe {
            source_image: path.clone(),
            source_box: BBox::new(8.0, 8.0, 18.0, 18.0).unwrap(),
            target_image: path,
            paste_origin: (8, 8),
            rng_seed: 0,
        };
        let (out, ann) = splice(&recipe).unwrap();
        assert_eq!(out, img);
        assert_eq!(ann.boxes.len(), 1);
        let b = ann.boxes[0].bbox;
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (8.0, 8.0, 18.0, 18.0));
        assert!(ann.tampered);
    }

    #[test]
    fn pixels_outside_pasted_box_equal_target() {
        let dir = tempfile::tempdir().unwrap();
        let src = fixtures::noise_image(30, 30, 1);
        let tgt = fixtures::smooth_gradient(50, 44, 2);
        let sp = dir.path().join("s.png");
        let tp = dir.path().join("t.png");
        crate::imaging::save_png(&src, &sp).unwrap();
        crate::imaging::save_png(&tgt, &tp).unwrap();
        let recipe = SpliceRecipe {
            source_image: sp,
            source_box: BBox::new(5.0, 5.0, 17.0, 20.0).unwrap(),
            target_image: tp,
            paste_origin: (31, 7),
            rng_seed: 0,
        };
        let (out, ann) = splice(&recipe).unwrap();
        let b = ann.boxes[0].bbox;
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (31.0, 7.0, 43.0, 22.0));
        let mut inside_differs = false;
        for y in 0..44u32 {
            for x in 0..50u32 {
                let inside =
                    (x as f64) >= b.x1 && (x as f64) < b.x2 && (y as f64) >= b.y1 && (y as f64) < b.y2;
                if inside {
                    inside_differs |= out.pixel(x, y) != tgt.pixel(x, y);
                } else {
                    assert_eq!(out.pixel(x, y), tgt.pixel(x, y), "pixel ({x},{y}) leaked");
                }
            }
        }
        assert!(inside_differs, "paste changed nothing inside the box");
    }

    #[test]
    fn paste_beyond_target_is_out_of_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let src = fixtures::noise_image(30, 30, 1);
        let tgt = fixtures::smooth_gradient(40, 40, 2);
        let sp = dir.path().join("s.png");
        let tp = dir.path().join("t.png");
        crate::imaging::save_png(&src, &sp).unwrap();
        crate::imaging::save_png(&tgt, &tp).unwrap();
        let recipe = SpliceRecipe {
            source_image: sp,
            source_box: BBox::new(0.0, 0.0, 20.0, 20.0).unwrap(),
            target_image: tp,
            paste_origin: (25, 25),
            rng_seed: 0,
        };
        assert!(matches!(splice(&recipe), Err(SynthError::OutOfBounds(_))));
    }

    fn make_corpora(root: &Path, n_sources: usize, n_targets: usize) -> (PathBuf, PathBuf) {
        let sources = root.join("sources");
        let targets = root.join("targets");
        fs::create_dir_all(&sources).unwrap();
        fs::create_dir_all(&targets).unwrap();
        let mut anns = Vec::new();
        for i in 0..n_sources {
            let name = format!("src_{i}.jpg");
            let img = fixtures::texture_patchwork(96, 96, 500 + i as u64);
            save_jpeg(&img, q(60), sources.join(&name)).unwrap();
            anns.push(Annotation {
                image_path: name,
                width: 96,
                height: 96,
                tampered: false,
                boxes: vec![
                    LabeledBox {
                        bbox: BBox::new(4.0, 4.0, 36.0, 30.0).unwrap(),
                        label: Some("object".into()),
                    },
                    LabeledBox {
                        bbox: BBox::new(40.0, 40.0, 80.0, 88.0).unwrap(),
                        label: Some("object".into()),
                    },
                ],
            });
        }
        write_annotations(sources.join("annotations.jsonl"), &anns).unwrap();
        for i in 0..n_targets {
            let img = fixtures::soft_scene(96, 96, 900 + i as u64);
            save_jpeg(&img, q(95), targets.join(format!("tgt_{i}.jpg"))).unwrap();
        }
        (sources, targets)
    }

    #[test]
    fn generated_dataset_satisfies_constraints_and_reproduces() {
        let dir = tempfile::tempdir().unwrap();
        let (sources, targets) = make_corpora(dir.path(), 3, 3);

        let mut cfg = GenerateConfig::new(&sources, &targets, dir.path().join("out_a"), 12, 77);
        cfg.min_area_frac = 0.05;
        cfg.max_area_frac = 0.5;
        let manifest_a = generate_dataset(&cfg).unwrap();
        assert_eq!(manifest_a.samples.len(), 12);

        // every emitted annotation satisfies the area-fraction bounds
        let anns = read_annotations(dir.path().join("out_a/annotations.jsonl")).unwrap();
        assert_eq!(anns.len(), 12);
        for ann in &anns {
            ann.validate().unwrap();
            assert!(ann.tampered);
            let frac =
                ann.boxes[0].bbox.area() / (ann.width as f64 * ann.height as f64);
            assert!(
                (0.05..=0.5).contains(&frac),
                "area fraction {frac} out of bounds"
            );
        }

        // same seed, second directory: byte-identical images + annotations
        let mut cfg_b = cfg.clone();
        cfg_b.out = dir.path().join("out_b");
        generate_dataset(&cfg_b).unwrap();
        for i in 0..12 {
            let rel = format!("images/sample_{i:06}.jpg");
            let a = fs::read(dir.path().join("out_a").join(&rel)).unwrap();
            let b = fs::read(dir.path().join("out_b").join(&rel)).unwrap();
            assert_eq!(a, b, "sample {i} bytes differ");
        }
        let a = fs::read(dir.path().join("out_a/annotations.jsonl")).unwrap();
        let b = fs::read(dir.path().join("out_b/annotations.jsonl")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn paste_locality_holds_for_generated_samples() {
        // symmetric difference between output and its target is inside the box
        let dir = tempfile::tempdir().unwrap();
        let (sources, targets) = make_corpora(dir.path(), 2, 2);
        let mut cfg = GenerateConfig::new(&sources, &targets, dir.path().join("out"), 6, 5);
        cfg.min_area_frac = 0.02;
        cfg.max_area_frac = 0.5;
        let manifest = generate_dataset(&cfg).unwrap();
        let anns = read_annotations(dir.path().join("out/annotations.jsonl")).unwrap();
        for (sample, ann) in manifest.samples.iter().zip(&anns) {
            // compare against the target re-encoded exactly like the output
            let tgt = load_image(targets.join(sample.recipe.target_image.to_str().unwrap()))
                .unwrap();
            let tgt_jpeg = crate::imaging::to_jpeg_domain(&tgt, cfg.jpeg_quality).unwrap();
            let out = load_image(dir.path().join("out").join(&sample.image)).unwrap();
            let b = ann.boxes[0].bbox;
            for y in 0..out.height() {
                for x in 0..out.width() {
                    let inside = (x as f64) >= b.x1
                        && (x as f64) < b.x2
                        && (y as f64) >= b.y1
                        && (y as f64) < b.y2;
                    if !inside && out.pixel(x, y) != tgt_jpeg.pixel(x, y) {
                        // JPEG blocks straddling the box edge may ring; allow
                        // differences only within one block of the box
                        let near = (x as f64) >= b.x1 - 8.0
                            && (x as f64) < b.x2 + 8.0
                            && (y as f64) >= b.y1 - 8.0
                            && (y as f64) < b.y2 + 8.0;
                        assert!(
                            near,
                            "sample {} pixel ({x},{y}) differs far outside the box",
                            sample.index
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn forced_single_triple_is_chosen() {
        let dir = tempfile::tempdir().unwrap();
        let sources = dir.path().join("sources");
        let targets = dir.path().join("targets");
        fs::create_dir_all(&sources).unwrap();
        fs::create_dir_all(&targets).unwrap();
        let src = fixtures::texture_patchwork(64, 64, 1);
        save_jpeg(&src, q(60), sources.join("s.jpg")).unwrap();
        write_annotations(
            sources.join("annotations.jsonl"),
            &[Annotation {
                image_path: "s.jpg".into(),
                width: 64,
                height: 64,
                tampered: false,
                boxes: vec![LabeledBox {
                    bbox: BBox::new(0.0, 0.0, 63.0, 63.0).unwrap(),
                    label: None,
                }],
            }],
        )
        .unwrap();
        let tgt = fixtures::soft_scene(64, 64, 2);
        save_jpeg(&tgt, q(95), targets.join("t.jpg")).unwrap();

        // a 63x63 box in a 64x64 target admits only origins (0..=1, 0..=1);
        // area fraction ~0.969 forces max_area_frac = 1.0
        let mut cfg = GenerateConfig::new(&sources, &targets, dir.path().join("out"), 1, 3);
        cfg.min_area_frac = 0.9;
        cfg.max_area_frac = 1.0;
        let manifest = generate_dataset(&cfg).unwrap();
        let r = &manifest.samples[0].recipe;
        assert_eq!(r.source_image, PathBuf::from("s.jpg"));
        assert_eq!(r.target_image, PathBuf::from("t.jpg"));
        assert!(r.paste_origin.0 <= 1 && r.paste_origin.1 <= 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let sources = dir.path().join("sources");
        let targets = dir.path().join("targets");
        fs::create_dir_all(&sources).unwrap();
        fs::create_dir_all(&targets).unwrap();
        write_annotations(sources.join("annotations.jsonl"), &[]).unwrap();
        let cfg = GenerateConfig::new(&sources, &targets, dir.path().join("out"), 1, 0);
        assert!(matches!(
            generate_dataset(&cfg),
            Err(SynthError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn inadmissible_constraints_fail_with_sample_index() {
        let dir = tempfile::tempdir().unwrap();
        let (sources, targets) = make_corpora(dir.path(), 1, 1);
        let mut cfg = GenerateConfig::new(&sources, &targets, dir.path().join("out"), 3, 0);
        // objects are far smaller than 90% of the target area
        cfg.min_area_frac = 0.9;
        cfg.max_area_frac = 1.0;
        match generate_dataset(&cfg) {
            Err(SynthError::NoAdmissiblePlacement { sample: 0, .. }) => {}
            other => panic!("expected NoAdmissiblePlacement, got {other:?}"),
        }
    }

    #[test]
    fn untampered_record_with_boxes_fails_validation() {
        let ann = Annotation {
            image_path: "x.jpg".into(),
            width: 10,
            height: 10,
            tampered: false,
            boxes: vec![LabeledBox {
                bbox: BBox::new(0.0, 0.0, 5.0, 5.0).unwrap(),
                label: None,
            }],
        };
        assert!(matches!(
            ann.validate(),
            Err(SynthError::InvalidAnnotation { .. })
        ));
    }

    #[test]
    fn annotation_wire_format_is_stable() {
        let ann = Annotation {
            image_path: "images/sample_000000.jpg".into(),
            width: 256,
            height: 256,
            tampered: true,
            boxes: vec![LabeledBox {
                bbox: BBox::new(10.0, 20.0, 42.0, 52.0).unwrap(),
                label: Some("object".into()),
            }],
        };
        let json = serde_json::to_string(&ann).unwrap();
        assert_eq!(
            json,
            r#"{"image_path":"images/sample_000000.jpg","width":256,"height":256,"tampered":true,"boxes":[{"x1":10.0,"y1":20.0,"x2":42.0,"y2":52.0,"label":"object"}]}"#
        );
        let back: Annotation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ann);
    }
}
