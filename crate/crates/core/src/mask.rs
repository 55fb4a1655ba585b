//! Binary instance masks stored as a tight crop inside a fixed image frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned pixel box, `x..x+w` by `y..y+h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersection(&self, other: &BBox) -> u64 {
        let x0 = self.x.max(other.x) as i64;
        let y0 = self.y.max(other.y) as i64;
        let x1 = (self.x as i64 + self.w as i64).min(other.x as i64 + other.w as i64);
        let y1 = (self.y as i64 + self.h as i64).min(other.y as i64 + other.h as i64);
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            ((x1 - x0) * (y1 - y0)) as u64
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn translated(&self, dx: i32, dy: i32) -> BBox {
        BBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

/// A binary mask over a `width x height` image.
///
/// Only the tight bounding box of the set pixels is stored, so two masks
/// with the same pixels compare equal regardless of how they were built.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            x0: 0,
            y0: 0,
            w: 0,
            h: 0,
            bits: Vec::new(),
        }
    }

    /// Builds a mask from a row-major dense buffer of `width * height` flags.
    pub fn from_dense(width: u32, height: u32, dense: &[bool]) -> Self {
        assert_eq!(dense.len(), width as usize * height as usize);
        Self::from_region(width, height, 0, 0, width, height, dense)
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let dense: Vec<bool> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::from_dense(width, height, &dense)
    }

    /// Builds a mask from a row-major region `(x0, y0, w, h)` of an image.
    /// Region pixels falling outside the image are discarded.
    pub fn from_region(
        width: u32,
        height: u32,
        x0: i64,
        y0: i64,
        w: u32,
        h: u32,
        bits: &[bool],
    ) -> Self {
        assert_eq!(bits.len(), w as usize * h as usize);
        let (mut min_x, mut min_y) = (i64::MAX, i64::MAX);
        let (mut max_x, mut max_y) = (i64::MIN, i64::MIN);
        for ry in 0..h as i64 {
            let y = y0 + ry;
            if y < 0 || y >= height as i64 {
                continue;
            }
            let row = &bits[(ry as usize) * w as usize..(ry as usize + 1) * w as usize];
            for (rx, &b) in row.iter().enumerate() {
                let x = x0 + rx as i64;
                if b && x >= 0 && x < width as i64 {
                    min_x = min_x.min(x);
                    max_x = max_x.max(x);
                    min_y = min_y.min(y);
                    max_y = max_y.max(y);
                }
            }
        }
        if min_x > max_x {
            return Self::empty(width, height);
        }
        let tw = (max_x - min_x + 1) as u32;
        let th = (max_y - min_y + 1) as u32;
        let mut out = vec![false; tw as usize * th as usize];
        for ty in 0..th as i64 {
            let ry = (min_y + ty - y0) as usize;
            for tx in 0..tw as i64 {
                let rx = (min_x + tx - x0) as usize;
                out[ty as usize * tw as usize + tx as usize] = bits[ry * w as usize + rx];
            }
        }
        Mask {
            width,
            height,
            x0: min_x as u32,
            y0: min_y as u32,
            w: tw,
            h: th,
            bits: out,
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut dense = vec![false; width as usize * height as usize];
        for (x, y) in pixels {
            if x < width && y < height {
                dense[y as usize * width as usize + x as usize] = true;
            }
        }
        Self::from_dense(width, height, &dense)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0
    }

    /// Tight bounding box of the set pixels, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        (!self.is_empty()).then_some(BBox {
            x: self.x0 as i32,
            y: self.y0 as i32,
            w: self.w,
            h: self.h,
        })
    }

    pub fn get(&self, x: i64, y: i64) -> bool {
        let lx = x - self.x0 as i64;
        let ly = y - self.y0 as i64;
        if lx < 0 || ly < 0 || lx >= self.w as i64 || ly >= self.h as i64 {
            return false;
        }
        self.bits[ly as usize * self.w as usize + lx as usize]
    }

    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.w as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (self.x0 + (i % w) as u32, self.y0 + (i / w) as u32))
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut dense = vec![false; self.width as usize * self.height as usize];
        for (x, y) in self.pixels() {
            dense[y as usize * self.width as usize + x as usize] = true;
        }
        dense
    }

    /// Shifts the mask by `(dx, dy)` into a `width x height` frame, clipping
    /// whatever falls outside.
    pub fn translated(&self, dx: i64, dy: i64, width: u32, height: u32) -> Mask {
        if self.is_empty() {
            return Mask::empty(width, height);
        }
        Mask::from_region(
            width,
            height,
            self.x0 as i64 + dx,
            self.y0 as i64 + dy,
            self.w,
            self.h,
            &self.bits,
        )
    }

    pub fn intersection_area(&self, other: &Mask) -> u64 {
        let (Some(a), Some(b)) = (self.bbox(), other.bbox()) else {
            return 0;
        };
        if a.intersection(&b) == 0 {
            return 0;
        }
        let x0 = a.x.max(b.x) as i64;
        let y0 = a.y.max(b.y) as i64;
        let x1 = (a.x + a.w as i32).min(b.x + b.w as i32) as i64;
        let y1 = (a.y + a.h as i32).min(b.y + b.h as i32) as i64;
        let mut n = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                if self.get(x, y) && other.get(x, y) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Intersection over union; 0 when both masks are empty.
    pub fn iou(&self, other: &Mask) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                a: self.dims(),
                b: other.dims(),
            });
        }
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_crop_makes_equality_structural() {
        let a = Mask::from_pixels(10, 10, [(2, 3), (4, 5)]);
        let dense = a.to_dense();
        let b = Mask::from_dense(10, 10, &dense);
        assert_eq!(a, b);
        assert_eq!(a.bbox(), Some(BBox { x: 2, y: 3, w: 3, h: 3 }));
        assert_eq!(a.area(), 2);
    }

    #[test]
    fn translation_clips_at_borders() {
        let a = Mask::from_fn(8, 8, |x, y| x < 4 && y < 4);
        let b = a.translated(6, 6, 8, 8);
        assert_eq!(b.area(), 4);
        let c = a.translated(-10, 0, 8, 8);
        assert!(c.is_empty());
    }

    #[test]
    fn iou_basic_cases() {
        let a = Mask::from_fn(6, 6, |x, _| x < 3);
        let b = Mask::from_fn(6, 6, |x, _| x >= 3);
        assert_eq!(a.iou(&a).unwrap(), 1.0);
        assert_eq!(a.iou(&b).unwrap(), 0.0);
        let e = Mask::empty(6, 6);
        assert_eq!(e.iou(&e).unwrap(), 0.0);
        assert!(a.iou(&Mask::empty(5, 6)).is_err());
    }

    #[test]
    fn bbox_iou() {
        let a = BBox { x: 0, y: 0, w: 4, h: 4 };
        let b = BBox { x: 2, y: 0, w: 4, h: 4 };
        assert!((a.iou(&b) - 8.0 / 24.0).abs() < 1e-15);
        assert_eq!(a.iou(&a.translated(10, 0)), 0.0);
    }
}
