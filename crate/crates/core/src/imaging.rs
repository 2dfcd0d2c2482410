//! Image loading, JPEG encoding, and the recompression roundtrip.
//!
//! All pixel data lives in [`ImageBuffer`]: row-major, channel-interleaved
//! bytes with an explicit [`PixelFormat`]. The coordinate convention is
//! x rightward, y downward, origin at the top-left pixel.
//!
//! The JPEG codec configuration is pinned: baseline sequential encoding
//! without chroma subsampling (4:4:4), standard quantization tables scaled
//! by the quality level, as implemented by the `image` crate. Every frozen
//! error bound in the test-suite references this configuration.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },
    #[error("jpeg encode failed: {0}")]
    EncodeFailure(String),
    #[error("jpeg decode failed: {0}")]
    DecodeFailure(String),
    #[error("invalid quality {0}: must be in 1..=100")]
    InvalidQuality(u32),
    #[error("buffer length {got} does not match {width}x{height} {format:?} (expected {expected})")]
    BufferSize {
        width: u32,
        height: u32,
        format: PixelFormat,
        expected: usize,
        got: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Pixel layout of an [`ImageBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    Rgb8,
    Gray8,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::Rgb8 => 3,
            PixelFormat::Gray8 => 1,
        }
    }
}

/// Decoded raster image: row-major, channel-interleaved bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    format: PixelFormat,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(
        width: u32,
        height: u32,
        format: PixelFormat,
        data: Vec<u8>,
    ) -> Result<Self, ImagingError> {
        assert!(width >= 1 && height >= 1, "image dimensions must be >= 1");
        let expected = width as usize * height as usize * format.channels();
        if data.len() != expected {
            return Err(ImagingError::BufferSize {
                width,
                height,
                format,
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            format,
            data,
        })
    }

    /// Uniform image with every channel set to `value`.
    pub fn filled(width: u32, height: u32, format: PixelFormat, value: u8) -> Self {
        let len = width as usize * height as usize * format.channels();
        Self {
            width,
            height,
            format,
            data: vec![value; len],
        }
    }

    /// Build an RGB image from a per-pixel function.
    pub fn from_rgb_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            format: PixelFormat::Rgb8,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Channel values of the pixel at (x, y); length 3 for RGB, 1 for gray.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let c = self.format.channels();
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }
}

/// JPEG quality level in 1..=100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u32", try_from = "u32")]
pub struct Quality(u8);

impl Quality {
    pub fn new(value: u32) -> Result<Self, ImagingError> {
        if (1..=100).contains(&value) {
            Ok(Quality(value as u8))
        } else {
            Err(ImagingError::InvalidQuality(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl From<Quality> for u32 {
    fn from(q: Quality) -> u32 {
        q.0 as u32
    }
}

impl TryFrom<u32> for Quality {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Quality::new(value).map_err(|e| e.to_string())
    }
}

/// Decode a JPEG or PNG file into an RGB8 buffer.
///
/// Greyscale sources are expanded to RGB by channel replication.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer, ImagingError> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ImagingError::FileNotFound(path.to_path_buf())
        } else {
            ImagingError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let reader = reader.with_guessed_format().map_err(|e| ImagingError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    match reader.format() {
        Some(ImageFormat::Jpeg) | Some(ImageFormat::Png) => {}
        Some(other) => {
            return Err(ImagingError::UnsupportedFormat(format!(
                "{}: {:?} (expected JPEG or PNG)",
                path.display(),
                other
            )))
        }
        None => {
            return Err(ImagingError::UnsupportedFormat(format!(
                "{}: not a recognized image container",
                path.display()
            )))
        }
    }
    let dynamic = reader.decode().map_err(|e| ImagingError::CorruptImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = dynamic.to_rgb8();
    ImageBuffer::new(rgb.width(), rgb.height(), PixelFormat::Rgb8, rgb.into_raw())
}

/// Encode an RGB8 buffer as a baseline JPEG byte stream at quality `q`.
pub fn encode_jpeg(img: &ImageBuffer, q: Quality) -> Result<Vec<u8>, ImagingError> {
    if img.format() != PixelFormat::Rgb8 {
        return Err(ImagingError::UnsupportedFormat(
            "encode_jpeg expects an RGB8 buffer".into(),
        ));
    }
    let mut out = Vec::new();
    let encoder = JpegEncoder::new_with_quality(Cursor::new(&mut out), q.get());
    encoder
        .write_image(
            img.data(),
            img.width(),
            img.height(),
            ExtendedColorType::Rgb8,
        )
        .map_err(|e| ImagingError::EncodeFailure(e.to_string()))?;
    Ok(out)
}

/// Decode a JPEG byte stream (baseline or progressive) to RGB8.
pub fn decode_jpeg(bytes: &[u8]) -> Result<ImageBuffer, ImagingError> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Jpeg)
        .map_err(|e| ImagingError::DecodeFailure(e.to_string()))?;
    let rgb = dynamic.to_rgb8();
    ImageBuffer::new(rgb.width(), rgb.height(), PixelFormat::Rgb8, rgb.into_raw())
}

/// Re-encode at quality `q0` and decode again: the canonical preprocessing
/// that places a non-JPEG source in the JPEG domain before ELA.
pub fn to_jpeg_domain(img: &ImageBuffer, q0: Quality) -> Result<ImageBuffer, ImagingError> {
    decode_jpeg(&encode_jpeg(img, q0)?)
}

/// Write a buffer as PNG (RGB or greyscale, matching the buffer format).
pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let color = match img.format() {
        PixelFormat::Rgb8 => ExtendedColorType::Rgb8,
        PixelFormat::Gray8 => ExtendedColorType::L8,
    };
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width(),
        img.height(),
        color,
        ImageFormat::Png,
    )
    .map_err(|e| ImagingError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

/// Encode as JPEG at quality `q` and write to `path`.
pub fn save_jpeg(img: &ImageBuffer, q: Quality, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let bytes = encode_jpeg(img, q)?;
    std::fs::write(path, bytes).map_err(|e| ImagingError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_bounds() {
        assert!(Quality::new(1).is_ok());
        assert!(Quality::new(100).is_ok());
        assert!(matches!(
            Quality::new(0),
            Err(ImagingError::InvalidQuality(0))
        ));
        assert!(matches!(
            Quality::new(101),
            Err(ImagingError::InvalidQuality(101))
        ));
    }

    #[test]
    fn buffer_length_is_validated() {
        let err = ImageBuffer::new(2, 2, PixelFormat::Rgb8, vec![0; 11]).unwrap_err();
        assert!(matches!(err, ImagingError::BufferSize { expected: 12, .. }));
        assert!(ImageBuffer::new(2, 2, PixelFormat::Rgb8, vec![0; 12]).is_ok());
    }

    #[test]
    fn png_roundtrip_preserves_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.png");
        let img = ImageBuffer::from_rgb_fn(2, 2, |_, _| [10, 20, 30]);
        save_png(&img, &path).unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded, img);
    }

    #[test]
    fn missing_file_is_file_not_found() {
        let err = load_image("/nonexistent/nowhere.png").unwrap_err();
        assert!(matches!(err, ImagingError::FileNotFound(_)));
    }

    #[test]
    fn gray_png_expands_to_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        let img = ImageBuffer::filled(1, 1, PixelFormat::Gray8, 7);
        save_png(&img, &path).unwrap();
        let loaded = load_image(&path).unwrap();
        assert_eq!(loaded.format(), PixelFormat::Rgb8);
        assert_eq!(loaded.data(), &[7, 7, 7]);
    }

    #[test]
    fn unsupported_format_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not_an_image.txt");
        std::fs::write(&path, b"plain text, no image markers here").unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(matches!(err, ImagingError::UnsupportedFormat(_)));
    }

    #[test]
    fn corrupt_jpeg_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.jpg");
        let img = ImageBuffer::filled(16, 16, PixelFormat::Rgb8, 128);
        let mut bytes = encode_jpeg(&img, Quality::new(90).unwrap()).unwrap();
        bytes.truncate(bytes.len() / 2);
        std::fs::write(&path, bytes).unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(matches!(err, ImagingError::CorruptImage { .. }));
    }

    #[test]
    fn jpeg_stream_starts_with_soi() {
        let img = ImageBuffer::filled(8, 8, PixelFormat::Rgb8, 200);
        let bytes = encode_jpeg(&img, Quality::new(90).unwrap()).unwrap();
        assert!(bytes.len() > 2);
        assert_eq!(&bytes[..2], &[0xFF, 0xD8]);
    }

    #[test]
    fn encode_rejects_gray_input() {
        let img = ImageBuffer::filled(8, 8, PixelFormat::Gray8, 5);
        let err = encode_jpeg(&img, Quality::new(90).unwrap()).unwrap_err();
        assert!(matches!(err, ImagingError::UnsupportedFormat(_)));
    }
}
