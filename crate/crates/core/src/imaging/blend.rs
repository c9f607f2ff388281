use serde::{Deserialize, Serialize};

use super::buffer::{ImageBuffer, Raster};
use crate::error::{Error, Result};

/// Weights of the pixel-wise combination `alpha * src1 + beta * src2 + gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub alpha: f64,
    pub beta: f64,
    /// Brightness offset in sample units.
    pub gamma: f64,
}

impl BlendWeights {
    pub const IDENTITY: Self = Self {
        alpha: 1.0,
        beta: 0.0,
        gamma: 0.0,
    };

    /// 1.5 / -0.5 / 0: the unsharp-mask weights used for both filtered variants.
    pub const SHARPEN: Self = Self {
        alpha: 1.5,
        beta: -0.5,
        gamma: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(format!("blend weights must be finite: {self:?}")))
        }
    }
}

impl Default for BlendWeights {
    fn default() -> Self {
        Self::SHARPEN
    }
}

/// Saturating weighted blend of two equally sized rasters.
///
/// Each output sample is `clamp(round(alpha * a + beta * b + gamma), 0, 255)`
/// with ties rounded away from zero.
pub fn blend<A, B>(src1: &A, src2: &B, w: BlendWeights) -> Result<ImageBuffer>
where
    A: Raster + ?Sized,
    B: Raster + ?Sized,
{
    w.validate()?;
    let (width, height) = src1.dimensions();
    if src2.dimensions() != (width, height) {
        return Err(Error::invalid(format!(
            "blend sources differ in size: {:?} vs {:?}",
            src1.dimensions(),
            src2.dimensions()
        )));
    }
    let n = width * height * super::CHANNELS;
    let data = (0..n)
        .map(|i| {
            let v = w.alpha * f64::from(src1.sample(i)) + w.beta * f64::from(src2.sample(i)) + w.gamma;
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    ImageBuffer::from_raw(width, height, data)
}
