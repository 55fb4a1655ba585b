//! Template-to-image similarity: the mean over template features of the
//! best `|cos|` orientation agreement inside each feature's spread window.

use crate::features::{cos_table, QuantizedOrientationImage, ResponseMaps};
use crate::geometry::Template;

/// Integer similarity sum read from the response planes. Features that
/// land outside the image contribute 0.
pub fn similarity_sum(t: &Template, r: &ResponseMaps, c: (i32, i32)) -> u32 {
    t.features
        .iter()
        .map(|f| r.value(f.bin, (c.0 + f.dx) as i64, (c.1 + f.dy) as i64) as u32)
        .sum()
}

/// Normalized score in `[0, 1]`.
pub fn similarity(t: &Template, r: &ResponseMaps, c: (i32, i32)) -> f64 {
    normalize(similarity_sum(t, r, c), t.feature_count())
}

pub fn normalize(sum: u32, feature_count: usize) -> f64 {
    if feature_count == 0 {
        return 0.0;
    }
    sum as f64 / (255.0 * feature_count as f64)
}

/// Reference evaluation straight from the quantized image: for every
/// feature, scans its `(2T+1)^2` window for the best `cos_table` entry.
pub fn similarity_naive_sum(
    t: &Template,
    q: &QuantizedOrientationImage,
    radius: u32,
    c: (i32, i32),
) -> u32 {
    let table = cos_table(q.n0);
    let r = radius as i64;
    let mut total = 0u32;
    for f in &t.features {
        let (fx, fy) = ((c.0 + f.dx) as i64, (c.1 + f.dy) as i64);
        if fx < 0 || fy < 0 || fx >= q.width as i64 || fy >= q.height as i64 {
            continue;
        }
        let mut best = 0u8;
        for dy in -r..=r {
            for dx in -r..=r {
                if let Some(b) = q.get(fx + dx, fy + dy) {
                    best = best.max(table[f.bin as usize][b as usize]);
                }
            }
        }
        total += best as u32;
    }
    total
}

pub fn similarity_naive(t: &Template, q: &QuantizedOrientationImage, radius: u32, c: (i32, i32)) -> f64 {
    normalize(similarity_naive_sum(t, q, radius, c), t.feature_count())
}
