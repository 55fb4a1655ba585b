//! Response planes re-laid out per stride phase so one template can be
//! scored at every stride-spaced anchor with contiguous row additions.

use crate::features::ResponseMaps;
use crate::geometry::Template;

struct Phase {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

pub struct LinearMemories {
    stride: usize,
    n0: usize,
    grid_cols: usize,
    grid_rows: usize,
    /// Indexed `[bin][py][px]`.
    phases: Vec<Phase>,
}

impl LinearMemories {
    pub fn new(r: &ResponseMaps, stride: u32) -> Self {
        let s = stride as usize;
        let (w, h) = (r.width as usize, r.height as usize);
        let mut phases = Vec::with_capacity(r.n0 * s * s);
        for plane in &r.planes {
            for py in 0..s {
                for px in 0..s {
                    let rows = (h.saturating_sub(py)).div_ceil(s);
                    let cols = (w.saturating_sub(px)).div_ceil(s);
                    let mut data = Vec::with_capacity(rows * cols);
                    for j in 0..rows {
                        let y = j * s + py;
                        data.extend((0..cols).map(|i| plane[y * w + i * s + px]));
                    }
                    phases.push(Phase { rows, cols, data });
                }
            }
        }
        LinearMemories {
            stride: s,
            n0: r.n0,
            grid_cols: w.div_ceil(s),
            grid_rows: h.div_ceil(s),
            phases,
        }
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    /// Similarity sums for anchors `(stride * i, stride * j)`, row-major
    /// over the anchor grid. Sums equal `similarity_sum` at each anchor.
    /// The template may carry at most 256 features.
    pub fn accumulate(&self, t: &Template, acc: &mut Vec<u16>) {
        let s = self.stride as i64;
        let (gw, gh) = (self.grid_cols, self.grid_rows);
        acc.clear();
        acc.resize(gw * gh, 0);
        debug_assert!(t.feature_count() <= 256);
        for f in &t.features {
            debug_assert!((f.bin as usize) < self.n0);
            let (px, qx) = ((f.dx as i64).rem_euclid(s) as usize, (f.dx as i64).div_euclid(s));
            let (py, qy) = ((f.dy as i64).rem_euclid(s) as usize, (f.dy as i64).div_euclid(s));
            let phase = &self.phases[(f.bin as usize * self.stride + py) * self.stride + px];
            let i_lo = (-qx).max(0) as usize;
            let i_hi = (phase.cols as i64 - qx).min(gw as i64);
            if i_hi <= i_lo as i64 {
                continue;
            }
            let i_hi = i_hi as usize;
            let src_lo = (i_lo as i64 + qx) as usize;
            let len = i_hi - i_lo;
            let j_lo = (-qy).max(0) as usize;
            let j_hi = (phase.rows as i64 - qy).min(gh as i64).max(0) as usize;
            for j in j_lo..j_hi {
                let src_row = (j as i64 + qy) as usize * phase.cols + src_lo;
                let src = &phase.data[src_row..src_row + len];
                let dst = &mut acc[j * gw + i_lo..j * gw + i_lo + len];
                // at most 256 features of 255 each, so the sum never wraps
                for (a, &v) in dst.iter_mut().zip(src) {
                    *a = a.wrapping_add(v as u16);
                }
            }
        }
    }
}
