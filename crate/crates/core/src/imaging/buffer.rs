use crate::error::{Error, Result};

/// Number of interleaved samples per pixel. Only RGB is supported.
pub const CHANNELS: usize = 3;

/// An 8-bit, three-channel raster stored row-major with interleaved samples
/// (`R G B R G B ...`).
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    /// Wraps raw interleaved RGB samples. Fails unless both dimensions are at
    /// least one and `data.len() == width * height * 3`.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "sample buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * CHANNELS)
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: u8) {
        self.data[(y * self.width + x) * CHANNELS + c] = value;
    }

    /// Copies one channel out into a contiguous `width * height` plane.
    pub fn channel(&self, c: usize) -> Vec<u8> {
        assert!(c < CHANNELS, "channel index {c} out of range");
        self.data.iter().skip(c).step_by(CHANNELS).copied().collect()
    }

    /// Inverse of [`ImageBuffer::channel`]: interleaves three planes.
    pub fn from_channels(width: usize, height: usize, planes: [&[u8]; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::invalid("channel planes differ from image size"));
        }
        let mut data = Vec::with_capacity(n * CHANNELS);
        for i in 0..n {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// Per-channel signed integer field with the same layout as [`ImageBuffer`].
/// Holds intermediate results (e.g. the Laplacian) that may leave `[0, 255]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedRaster {
    width: usize,
    height: usize,
    data: Vec<i32>,
}

impl SignedRaster {
    pub fn from_raw(width: usize, height: usize, data: Vec<i32>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * CHANNELS {
            return Err(Error::invalid("signed raster length does not match dimensions"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> i32 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }
}

impl From<&ImageBuffer> for SignedRaster {
    fn from(img: &ImageBuffer) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| i32::from(v)).collect(),
        }
    }
}

/// Anything that can feed a sample stream into [`blend`](super::blend).
pub trait Raster {
    fn dimensions(&self) -> (usize, usize);
    /// Sample at flat interleaved index `i`.
    fn sample(&self, i: usize) -> i32;
}

impl Raster for ImageBuffer {
    fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    fn sample(&self, i: usize) -> i32 {
        i32::from(self.data[i])
    }
}

impl Raster for SignedRaster {
    fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    fn sample(&self, i: usize) -> i32 {
        self.data[i]
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}
