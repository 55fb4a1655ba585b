//! COCO run-length encoding: column-major runs that alternate between
//! background and foreground, starting with background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Uncompressed COCO RLE. `size` is `[height, width]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub size: [u32; 2],
    pub counts: Vec<u32>,
}

pub fn encode(mask: &Mask) -> Rle {
    let (w, h) = mask.dims();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    let bbox = mask.bbox();
    for x in 0..w as i64 {
        let column_empty = bbox.is_none_or(|b| x < b.x as i64 || x >= b.x as i64 + b.w as i64);
        if column_empty && !current {
            run += h;
            continue;
        }
        for y in 0..h as i64 {
            let v = mask.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle { size: [h, w], counts }
}

pub fn decode(rle: &Rle) -> Result<Mask> {
    let [h, w] = rle.size;
    let expected = h as u64 * w as u64;
    let sum: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if sum != expected {
        return Err(Error::CorruptRle { sum, expected });
    }
    let runs = || {
        let mut pos = 0u64;
        rle.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += c as u64;
            (i % 2 == 1 && c > 0).then_some((start, c as u64))
        })
    };
    let (h64, mut x0, mut y0, mut x1, mut y1) = (h as u64, u64::MAX, u64::MAX, 0, 0);
    for (start, len) in runs() {
        let (first, last) = (start, start + len - 1);
        x0 = x0.min(first / h64);
        x1 = x1.max(last / h64);
        if first / h64 != last / h64 {
            y0 = 0;
            y1 = h64 - 1;
        } else {
            y0 = y0.min(first % h64);
            y1 = y1.max(last % h64);
        }
    }
    if x0 == u64::MAX {
        return Ok(Mask::empty(w, h));
    }
    let (rw, rh) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut bits = vec![false; rw * rh];
    for (start, len) in runs() {
        for p in start..start + len {
            let (x, y) = (p / h64, p % h64);
            bits[(y - y0) as usize * rw + (x - x0) as usize] = true;
        }
    }
    Ok(Mask::from_region(w, h, x0 as i64, y0 as i64, rw as u32, rh as u32, &bits))
}
