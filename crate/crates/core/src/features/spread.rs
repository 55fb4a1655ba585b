use super::QuantizedOrientationImage;
use crate::error::{Error, Result};

/// Per-pixel union of the bins found within Chebyshev distance `radius`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadOrientationImage {
    pub width: u32,
    pub height: u32,
    pub n0: usize,
    pub radius: u32,
    /// Bit `b` set iff bin `b` occurs in the window.
    pub bits: Vec<u32>,
}

impl SpreadOrientationImage {
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.bits[y as usize * self.width as usize + x as usize]
    }
}

/// Spreads orientations over a `(2T+1)^2` window by separable shifted ORs.
pub fn spread_orientations(q: &QuantizedOrientationImage, radius: u32) -> Result<SpreadOrientationImage> {
    if q.n0 > 32 {
        return Err(Error::invalid(format!("bin count {} does not fit a 32-bit set", q.n0)));
    }
    let (w, h) = (q.width as usize, q.height as usize);
    let t = radius as usize;
    let single: Vec<u32> = q
        .bins
        .iter()
        .map(|&b| if b == super::EMPTY_BIN { 0 } else { 1u32 << b })
        .collect();

    let mut rows = vec![0u32; w * h];
    for y in 0..h {
        let src = &single[y * w..(y + 1) * w];
        let dst = &mut rows[y * w..(y + 1) * w];
        for s in 0..=t.min(w.saturating_sub(1)) {
            for x in 0..w - s {
                dst[x] |= src[x + s];
                dst[x + s] |= src[x];
            }
        }
    }
    let mut bits = vec![0u32; w * h];
    for s in 0..=t.min(h.saturating_sub(1)) {
        for y in 0..h - s {
            for x in 0..w {
                bits[y * w + x] |= rows[(y + s) * w + x];
                bits[(y + s) * w + x] |= rows[y * w + x];
            }
        }
    }
    Ok(SpreadOrientationImage {
        width: q.width,
        height: q.height,
        n0: q.n0,
        radius,
        bits,
    })
}
