use super::SpreadOrientationImage;
use crate::error::{Error, Result};

/// Largest bin count whose bitsets index a 256-entry table.
pub const MAX_LOOKUP_BINS: usize = 8;

/// `table[b][j] = round(255 * |cos((b - j) * 180 / n0)|)`.
pub fn cos_table(n0: usize) -> Vec<Vec<u8>> {
    (0..n0)
        .map(|b| {
            (0..n0)
                .map(|j| {
                    let d = (b as f64 - j as f64) * 180.0 / n0 as f64;
                    (255.0 * d.to_radians().cos().abs()).round() as u8
                })
                .collect()
        })
        .collect()
}

/// Per template bin, the best `cos_table` entry over every bin in a bitset.
pub fn bitset_lookup(n0: usize) -> Result<Vec<[u8; 256]>> {
    if n0 > MAX_LOOKUP_BINS {
        return Err(Error::BinCountExceedsLookup(n0));
    }
    let cos = cos_table(n0);
    Ok((0..n0)
        .map(|b| {
            let mut lut = [0u8; 256];
            for (set, slot) in lut.iter_mut().enumerate() {
                *slot = (0..n0)
                    .filter(|j| set & (1 << j) != 0)
                    .map(|j| cos[b][j])
                    .max()
                    .unwrap_or(0);
            }
            lut
        })
        .collect())
}

/// One plane per template bin holding `255 * max |cos|` at every pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseMaps {
    pub width: u32,
    pub height: u32,
    pub n0: usize,
    pub planes: Vec<Vec<u8>>,
}

impl ResponseMaps {
    pub fn value(&self, bin: u8, x: i64, y: i64) -> u8 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return 0;
        }
        self.planes[bin as usize][y as usize * self.width as usize + x as usize]
    }
}

pub fn build_response_maps(s: &SpreadOrientationImage) -> Result<ResponseMaps> {
    let luts = bitset_lookup(s.n0)?;
    let planes = luts
        .iter()
        .map(|lut| s.bits.iter().map(|&set| lut[set as usize]).collect())
        .collect();
    Ok(ResponseMaps {
        width: s.width,
        height: s.height,
        n0: s.n0,
        planes,
    })
}
