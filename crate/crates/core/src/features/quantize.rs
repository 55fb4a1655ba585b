use super::GradientImage;
use crate::error::{Error, Result};

/// Marker for pixels without an orientation.
pub const EMPTY_BIN: u8 = u8::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedOrientationImage {
    pub width: u32,
    pub height: u32,
    pub n0: usize,
    /// Row-major bins, [`EMPTY_BIN`] where no orientation survives.
    pub bins: Vec<u8>,
}

impl QuantizedOrientationImage {
    pub fn empty(width: u32, height: u32, n0: usize) -> Self {
        QuantizedOrientationImage {
            width,
            height,
            n0,
            bins: vec![EMPTY_BIN; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: i64, y: i64) -> Option<u8> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        let b = self.bins[y as usize * self.width as usize + x as usize];
        (b != EMPTY_BIN).then_some(b)
    }

    pub fn set(&mut self, x: u32, y: u32, bin: Option<u8>) {
        let i = y as usize * self.width as usize + x as usize;
        self.bins[i] = bin.unwrap_or(EMPTY_BIN);
    }
}

/// Bin of an orientation in `[0, 180)`: `floor(orientation / (180 / n0))`.
pub fn orientation_bin(orientation_deg: f32, n0: usize) -> u8 {
    let b = (orientation_deg as f64 * n0 as f64 / 180.0).floor() as i64;
    b.clamp(0, n0 as i64 - 1) as u8
}

/// Quantizes orientations above `magnitude_threshold`, then replaces each
/// bin by the most frequent bin of its 3x3 neighbourhood. A pixel whose most
/// frequent bin occurs fewer than twice is cleared. Ties prefer the pixel's
/// own bin, then the lowest bin.
pub fn quantize_orientations(
    g: &GradientImage,
    magnitude_threshold: f32,
    n0: usize,
) -> Result<QuantizedOrientationImage> {
    if !(2..EMPTY_BIN as usize).contains(&n0) {
        return Err(Error::invalid(format!("bin count {n0} must be at least 2")));
    }
    let (w, h) = (g.width as usize, g.height as usize);
    let raw: Vec<u8> = g
        .magnitude
        .iter()
        .zip(&g.orientation)
        .map(|(&m, &o)| {
            if m > 0.0 && m >= magnitude_threshold {
                orientation_bin(o, n0)
            } else {
                EMPTY_BIN
            }
        })
        .collect();
    let mut bins = vec![EMPTY_BIN; w * h];
    let mut counts = vec![0u8; n0];
    for y in 0..h {
        for x in 0..w {
            let own = raw[y * w + x];
            if own == EMPTY_BIN {
                continue;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let b = raw[ny * w + nx];
                    if b != EMPTY_BIN {
                        counts[b as usize] += 1;
                    }
                }
            }
            let top = *counts.iter().max().unwrap();
            if top < 2 {
                continue;
            }
            bins[y * w + x] = if counts[own as usize] == top {
                own
            } else {
                counts.iter().position(|&c| c == top).unwrap() as u8
            };
        }
    }
    Ok(QuantizedOrientationImage {
        width: g.width,
        height: g.height,
        n0,
        bins,
    })
}
