//! Down-scaling and cropping of input images, and the inverse mapping of
//! detections back into the input frame.

use image::imageops::FilterType;
use image::DynamicImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubeloc::geometry::CameraIntrinsics;
use tubeloc::matching::Detection;
use tubeloc::Mask;

/// Maps input pixels to the processed image: scale first, then crop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub scale: f64,
    pub offset: (u32, u32),
    pub input: (u32, u32),
    pub processed: (u32, u32),
}

impl Frame {
    pub fn identity(width: u32, height: u32) -> Self {
        Frame {
            scale: 1.0,
            offset: (0, 0),
            input: (width, height),
            processed: (width, height),
        }
    }

    /// Applies `scale` and, when given, a random `crop`-sized window drawn
    /// from `seed`. Sides shorter than the crop are kept whole.
    pub fn apply(image: &DynamicImage, scale: f64, crop: Option<u32>, seed: u64) -> (DynamicImage, Frame) {
        let (w, h) = (image.width(), image.height());
        let scaled = if scale == 1.0 {
            image.clone()
        } else {
            let nw = ((w as f64 * scale).round() as u32).max(1);
            let nh = ((h as f64 * scale).round() as u32).max(1);
            image.resize_exact(nw, nh, FilterType::Triangle)
        };
        let (sw, sh) = (scaled.width(), scaled.height());
        let (cw, ch) = crop.map_or((sw, sh), |c| (c.min(sw), c.min(sh)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ox = rng.random_range(0..=sw - cw);
        let oy = rng.random_range(0..=sh - ch);
        let out = if (cw, ch) == (sw, sh) {
            scaled
        } else {
            scaled.crop_imm(ox, oy, cw, ch)
        };
        (
            out,
            Frame {
                scale: sw as f64 / w as f64,
                offset: (ox, oy),
                input: (w, h),
                processed: (cw, ch),
            },
        )
    }

    /// Intrinsics of the processed image given those of the input.
    pub fn intrinsics(&self, k: &CameraIntrinsics) -> CameraIntrinsics {
        let s = self.scale;
        CameraIntrinsics {
            fx: k.fx * s,
            fy: k.fy * s,
            cx: (k.cx + 0.5) * s - 0.5 - self.offset.0 as f64,
            cy: (k.cy + 0.5) * s - 0.5 - self.offset.1 as f64,
            width: self.processed.0,
            height: self.processed.1,
        }
    }

    fn to_processed(&self, x: u32, y: u32) -> (i64, i64) {
        (
            ((x as f64 + 0.5) * self.scale).floor() as i64 - self.offset.0 as i64,
            ((y as f64 + 0.5) * self.scale).floor() as i64 - self.offset.1 as i64,
        )
    }

    pub fn mask_to_input(&self, m: &Mask) -> Mask {
        Mask::from_fn(self.input.0, self.input.1, |x, y| {
            let (px, py) = self.to_processed(x, y);
            m.get(px, py)
        })
    }

    pub fn detection_to_input(&self, mut d: Detection) -> Detection {
        if *self == Frame::identity(self.input.0, self.input.1) {
            return d;
        }
        let back = |v: i32, o: u32| ((v as f64 + o as f64 + 0.5) / self.scale - 0.5).round() as i32;
        d.location = (back(d.location.0, self.offset.0), back(d.location.1, self.offset.1));
        d.mask = self.mask_to_input(&d.mask);
        d
    }
}
