//! Decoded RGB raster with intensities in `[0, 1]`.
//!
//! Every buffer carries an [`ImageTag`] describing where it came from: the
//! registered id of the source picture, the noise variant it belongs to, and
//! any crops applied. Fixture-driven backends resolve requests through the tag
//! so that perturbed copies of a registered picture still find their entries.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImageTag {
    /// Registered id of the source image, extended with `/crop:...` segments.
    pub id: Option<String>,
    /// Index of the noise variant this buffer was produced as, if any.
    pub variant: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f32>,
    tag: ImageTag,
}

impl ImageBuffer {
    /// Builds a buffer from interleaved RGB values.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * CHANNELS {
            return Err(Error::Image(format!(
                "expected {} values for a {width}x{height} RGB image, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Image(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
            tag: ImageTag::default(),
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * CHANNELS).collect();
        Self::new(width, height, data)
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.tag.id = Some(id.into());
        self
    }

    pub(crate) fn with_tag(mut self, tag: ImageTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn tag(&self) -> &ImageTag {
        &self.tag
    }

    pub fn id(&self) -> Option<&str> {
        self.tag.id.as_deref()
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Applies `f(channel, value)` to every intensity, clamping the result to `[0, 1]`.
    pub(crate) fn map_channels(&self, f: impl Fn(usize, f32) -> f32) -> Self {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % CHANNELS, v).clamp(0.0, 1.0))
            .collect();
        Self {
            width: self.width,
            height: self.height,
            data,
            tag: self.tag.clone(),
        }
    }

    /// Copies the rectangle `[x0, x1) x [y0, y1)`. Bounds must already be validated.
    pub(crate) fn sub_image(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        let w = x1 - x0;
        let mut data = Vec::with_capacity(w * (y1 - y0) * CHANNELS);
        for y in y0..y1 {
            let start = (y * self.width + x0) * CHANNELS;
            data.extend_from_slice(&self.data[start..start + w * CHANNELS]);
        }
        let id = self
            .tag
            .id
            .as_ref()
            .map(|id| format!("{id}/crop:{x0},{y0},{x1},{y1}"));
        Self {
            width: w,
            height: y1 - y0,
            data,
            tag: ImageTag { id, variant: None },
        }
    }

    /// SHA-256 over the dimensions and the raw intensity bits, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update((self.height as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self
            .data
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_rgb8(img: &RgbImage) -> Result<Self> {
        let data = img.as_raw().iter().map(|&b| f32::from(b) / 255.0).collect();
        Self::new(img.width() as usize, img.height() as usize, data)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb8()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// Decodes PNG or JPEG bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Image(e.to_string()))?;
        Self::from_rgb8(&img.to_rgb8())
    }

    /// Loads an image file; the file stem becomes the image id.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        let img = Self::decode(&bytes)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        Ok(match path.file_stem().and_then(|s| s.to_str()) {
            Some(stem) => img.with_id(stem),
            None => img,
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_lengths() {
        assert!(ImageBuffer::new(1, 1, vec![0.0, 0.5, 1.1]).is_err());
        assert!(ImageBuffer::new(2, 1, vec![0.0; 3]).is_err());
        assert!(ImageBuffer::new(0, 1, vec![]).is_err());
        assert!(ImageBuffer::new(1, 1, vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn png_round_trip_preserves_8bit_values() {
        let img = ImageBuffer::from_fn(4, 3, |x, y| {
            [x as f32 / 255.0, y as f32 / 255.0, 128.0 / 255.0]
        })
        .unwrap();
        let back = ImageBuffer::decode(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back.data(), img.data());
        assert_eq!(back.content_hash(), img.content_hash());
    }

    #[test]
    fn sub_image_extends_id() {
        let img = ImageBuffer::from_fn(4, 4, |x, y| [x as f32 / 4.0, y as f32 / 4.0, 0.0])
            .unwrap()
            .with_id("room");
        let c = img.sub_image(1, 2, 3, 4);
        assert_eq!(c.id(), Some("room/crop:1,2,3,4"));
        assert_eq!(c.pixel(0, 0), img.pixel(1, 2));
        assert_eq!(c.pixel(1, 1), img.pixel(2, 3));
    }
}
