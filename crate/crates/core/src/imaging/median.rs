//! Median filtering over square windows with clamp-to-edge borders.
//!
//! Two implementations produce bit-identical output:
//!
//! * [`median_filter_naive`] gathers every window and sorts it. It is the
//!   reference path and is only suitable for small inputs.
//! * [`median_filter`] keeps one 256-bin histogram per image column plus a
//!   two-level (16 coarse x 16 fine bins) histogram for the current window.
//!   Moving one row down touches each column histogram once; moving one pixel
//!   right adds one column and removes another from the coarse level. Fine
//!   bins are refreshed lazily, only for the coarse bin holding the median,
//!   so the per-pixel cost does not grow with the kernel size.

use super::buffer::{ImageBuffer, CHANNELS};
use crate::error::{Error, Result};

/// How samples outside the image are synthesized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Border {
    /// Out-of-range coordinates clamp to the nearest edge pixel.
    #[default]
    Replicate,
}

/// Checks that `kernel_size` describes a centred window.
pub fn validate_kernel(kernel_size: usize) -> Result<()> {
    if kernel_size < 3 || kernel_size % 2 == 0 {
        return Err(Error::invalid(format!(
            "kernel size must be odd and at least 3, got {kernel_size}"
        )));
    }
    Ok(())
}

/// Median filter, fast path. See the module docs for the algorithm.
pub fn median_filter(src: &ImageBuffer, kernel_size: usize, border: Border) -> Result<ImageBuffer> {
    validate_kernel(kernel_size)?;
    let Border::Replicate = border;
    let (w, h) = (src.width(), src.height());
    let planes: Vec<Vec<u8>> = (0..CHANNELS)
        .map(|c| {
            let padded = Padded::new(&src.channel(c), w, h, kernel_size / 2);
            histogram_median_plane(&padded, w, h, kernel_size)
        })
        .collect();
    ImageBuffer::from_channels(w, h, [&planes[0], &planes[1], &planes[2]])
}

/// Median filter, reference path: sorts every window.
pub fn median_filter_naive(
    src: &ImageBuffer,
    kernel_size: usize,
    border: Border,
) -> Result<ImageBuffer> {
    validate_kernel(kernel_size)?;
    let Border::Replicate = border;
    let (w, h) = (src.width(), src.height());
    let r = (kernel_size / 2) as isize;
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut window = Vec::with_capacity(kernel_size * kernel_size);
    let mut out = src.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                window.clear();
                for dy in -r..=r {
                    let sy = clamp(y as isize + dy, h);
                    for dx in -r..=r {
                        let sx = clamp(x as isize + dx, w);
                        window.push(src.get(sx, sy, c));
                    }
                }
                window.sort_unstable();
                out.set(x, y, c, window[window.len() / 2]);
            }
        }
    }
    Ok(out)
}

/// A single channel padded by `radius` replicated pixels on every side.
struct Padded {
    data: Vec<u8>,
    stride: usize,
}

impl Padded {
    fn new(plane: &[u8], w: usize, h: usize, radius: usize) -> Self {
        let stride = w + 2 * radius;
        let rows = h + 2 * radius;
        let mut data = Vec::with_capacity(stride * rows);
        for py in 0..rows {
            let sy = py.saturating_sub(radius).min(h - 1);
            let row = &plane[sy * w..(sy + 1) * w];
            data.extend(std::iter::repeat(row[0]).take(radius));
            data.extend_from_slice(row);
            data.extend(std::iter::repeat(row[w - 1]).take(radius));
        }
        Self { data, stride }
    }

    #[inline]
    fn at(&self, px: usize, py: usize) -> u8 {
        self.data[py * self.stride + px]
    }
}

const COARSE: usize = 16;
const FINE: usize = 16;

fn histogram_median_plane(src: &Padded, w: usize, h: usize, k: usize) -> Vec<u8> {
    let cols = src.stride;
    // Zero-based rank of the median inside a k*k window.
    let rank = (k * k / 2) as u32;

    let mut col_fine = vec![[0u32; 256]; cols];
    let mut col_coarse = vec![[0u32; COARSE]; cols];
    for px in 0..cols {
        for py in 0..k {
            let v = src.at(px, py) as usize;
            col_fine[px][v] += 1;
            col_coarse[px][v / FINE] += 1;
        }
    }

    let mut out = vec![0u8; w * h];

    for y in 0..h {
        if y > 0 {
            for px in 0..cols {
                let old = src.at(px, y - 1) as usize;
                let new = src.at(px, y + k - 1) as usize;
                col_fine[px][old] -= 1;
                col_coarse[px][old / FINE] -= 1;
                col_fine[px][new] += 1;
                col_coarse[px][new / FINE] += 1;
            }
        }

        let mut coarse = [0u32; COARSE];
        let mut fine = [[0u32; FINE]; COARSE];
        for px in 0..k {
            for b in 0..COARSE {
                coarse[b] += col_coarse[px][b];
            }
            for (v, &n) in col_fine[px].iter().enumerate() {
                fine[v / FINE][v % FINE] += n;
            }
        }
        // Window start column each fine segment is currently valid for.
        let mut seg_start = [0usize; COARSE];

        for x in 0..w {
            if x > 0 {
                let (add, sub) = (&col_coarse[x + k - 1], &col_coarse[x - 1]);
                for b in 0..COARSE {
                    coarse[b] = coarse[b] + add[b] - sub[b];
                }
            }

            let mut below = 0u32;
            let mut bin = 0;
            while below + coarse[bin] <= rank {
                below += coarse[bin];
                bin += 1;
            }

            refresh_segment(&mut fine[bin], &mut seg_start[bin], bin, x, k, &col_fine);

            let seg = &fine[bin];
            let mut i = 0;
            while below + seg[i] <= rank {
                below += seg[i];
                i += 1;
            }
            out[y * w + x] = (bin * FINE + i) as u8;
        }
    }
    out
}

/// Brings one fine segment from the window starting at `*start` to the
/// window starting at `x`.
#[inline]
fn refresh_segment(
    seg: &mut [u32; FINE],
    start: &mut usize,
    bin: usize,
    x: usize,
    k: usize,
    col_fine: &[[u32; 256]],
) {
    let lo = bin * FINE;
    let from = *start;
    if from == x {
        return;
    }
    if x - from >= k {
        *seg = [0; FINE];
        for col in &col_fine[x..x + k] {
            for (s, &n) in seg.iter_mut().zip(&col[lo..lo + FINE]) {
                *s += n;
            }
        }
    } else {
        for col in &col_fine[from..x] {
            for (s, &n) in seg.iter_mut().zip(&col[lo..lo + FINE]) {
                *s -= n;
            }
        }
        for col in &col_fine[from + k..x + k] {
            for (s, &n) in seg.iter_mut().zip(&col[lo..lo + FINE]) {
                *s += n;
            }
        }
    }
    *start = x;
}
