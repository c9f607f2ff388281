use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::blend::{blend, BlendWeights};
use super::buffer::ImageBuffer;
use super::laplacian::laplacian;
use super::median::{median_filter, validate_kernel, Border};
use crate::error::{Error, Result};

/// The three image versions shown to the responder.
///
/// Declaration order is also the tie-break preference: least processing first.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Variant {
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "NR")]
    Nr,
    #[serde(rename = "EE")]
    Ee,
}

impl Variant {
    /// Processing order of a record, and tie-break preference.
    pub const ALL: [Variant; 3] = [Variant::Org, Variant::Nr, Variant::Ee];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Org => "ORG",
            Variant::Nr => "NR",
            Variant::Ee => "EE",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ORG" => Ok(Variant::Org),
            "NR" => Ok(Variant::Nr),
            "EE" => Ok(Variant::Ee),
            _ => Err(Error::invalid(format!("unknown variant {s:?}"))),
        }
    }
}

/// What the noise-reduced variant is made of.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrMode {
    /// The median-filtered image as is.
    #[default]
    PureMedian,
    /// The median output blended back against the source with the blend weights.
    Blended,
}

impl FromStr for NrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" | "pure_median" => Ok(NrMode::PureMedian),
            "blended" => Ok(NrMode::Blended),
            _ => Err(Error::invalid(format!("unknown NR mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub variant: Variant,
    pub kernel_size: usize,
    pub nr_mode: NrMode,
    pub blend: BlendWeights,
    pub border: Border,
}

impl FilterSpec {
    pub const DEFAULT_KERNEL: usize = 15;

    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            kernel_size: Self::DEFAULT_KERNEL,
            nr_mode: NrMode::default(),
            blend: BlendWeights::default(),
            border: Border::Replicate,
        }
    }

    pub fn with_kernel(mut self, kernel_size: usize) -> Self {
        self.kernel_size = kernel_size;
        self
    }

    pub fn with_nr_mode(mut self, nr_mode: NrMode) -> Self {
        self.nr_mode = nr_mode;
        self
    }

    pub fn with_blend(mut self, blend: BlendWeights) -> Self {
        self.blend = blend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::Org {
            return Ok(());
        }
        validate_kernel(self.kernel_size)?;
        self.blend.validate()
    }
}

/// Produces one variant of `src`.
///
/// * ORG: a copy of the input.
/// * NR: the median filter, optionally blended against the source.
/// * EE: `blend(src, laplacian(src))`, channel by channel.
pub fn apply_variant(src: &ImageBuffer, spec: &FilterSpec) -> Result<ImageBuffer> {
    spec.validate()?;
    match spec.variant {
        Variant::Org => Ok(src.clone()),
        Variant::Nr => {
            let median = median_filter(src, spec.kernel_size, spec.border)?;
            match spec.nr_mode {
                NrMode::PureMedian => Ok(median),
                NrMode::Blended => blend(src, &median, spec.blend),
            }
        }
        Variant::Ee => blend(src, &laplacian(src)?, spec.blend),
    }
}
