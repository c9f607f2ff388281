use super::buffer::{ImageBuffer, SignedRaster, CHANNELS};
use crate::error::Result;

/// Five-point discrete Laplacian, applied to each channel independently:
///
/// `out = f(x+1,y) + f(x-1,y) + f(x,y+1) + f(x,y-1) - 4 f(x,y)`
///
/// Neighbours outside the image clamp to the edge. The result is a signed
/// field in `[-1020, 1020]`; it is deliberately not clamped.
pub fn laplacian(src: &ImageBuffer) -> Result<SignedRaster> {
    let (w, h) = (src.width(), src.height());
    let mut data = Vec::with_capacity(w * h * CHANNELS);
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            for c in 0..CHANNELS {
                let at = |xx, yy| i32::from(src.get(xx, yy, c));
                data.push(at(right, y) + at(left, y) + at(x, down) + at(x, up) - 4 * at(x, y));
            }
        }
    }
    SignedRaster::from_raw(w, h, data)
}
