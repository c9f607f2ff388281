//! PNG/JPEG decoding into [`ImageBuffer`] and PNG encoding of variants.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};

use super::buffer::ImageBuffer;
use crate::error::{Error, Result};

/// Decodes PNG or JPEG bytes. Greyscale is promoted to RGB and alpha is dropped.
pub fn decode(bytes: &[u8]) -> Result<ImageBuffer> {
    let format = image::guess_format(bytes)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(Error::invalid(format!("unsupported image format {format:?}")));
    }
    let rgb = image::load_from_memory_with_format(bytes, format)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    ImageBuffer::from_raw(w as usize, h as usize, rgb.into_raw())
}

pub fn load(path: &Path) -> Result<ImageBuffer> {
    decode(&std::fs::read(path)?)
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let rgb = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .ok_or_else(|| Error::invalid("image too large to encode"))?;
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageRgb8(rgb).write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}
