//! Image variants: identity, median noise reduction and Laplacian edge
//! enhancement over 8-bit RGB rasters.
//!
//! Everything here is a pure function of its inputs.

mod blend;
mod buffer;
pub mod codec;
mod laplacian;
mod median;
mod variant;

pub use blend::{blend, BlendWeights};
pub use buffer::{ImageBuffer, Raster, SignedRaster, CHANNELS};
pub use laplacian::laplacian;
pub use median::{median_filter, median_filter_naive, validate_kernel, Border};
pub use variant::{apply_variant, FilterSpec, NrMode, Variant};
