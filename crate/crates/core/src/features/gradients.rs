use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};

/// Per-pixel Sobel magnitude and orientation folded to `[0, 180)` degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientImage {
    pub width: u32,
    pub height: u32,
    pub magnitude: Vec<f32>,
    /// Meaningful only where `magnitude > 0`.
    pub orientation: Vec<f32>,
}

impl GradientImage {
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

pub fn compute_gradients(image: &DynamicImage) -> Result<GradientImage> {
    match image {
        DynamicImage::ImageLuma8(g) => compute_gradients_gray(g),
        other => compute_gradients_rgb(&other.to_rgb8()),
    }
}

pub fn compute_gradients_gray(image: &GrayImage) -> Result<GradientImage> {
    gradients_interleaved(image.width(), image.height(), image.as_raw(), 1)
}

/// Sobel per channel; each pixel keeps the channel with the largest magnitude.
pub fn compute_gradients_rgb(image: &RgbImage) -> Result<GradientImage> {
    gradients_interleaved(image.width(), image.height(), image.as_raw(), 3)
}

/// Sobel over an interleaved `channels`-channel buffer, borders replicated.
pub fn gradients_interleaved(width: u32, height: u32, data: &[u8], channels: usize) -> Result<GradientImage> {
    if width < 3 || height < 3 {
        return Err(Error::invalid(format!("image {width}x{height} smaller than 3x3")));
    }
    assert_eq!(data.len(), width as usize * height as usize * channels);
    let (w, h) = (width as i64, height as i64);
    let at = |x: i64, y: i64, c: usize| -> i32 {
        let x = x.clamp(0, w - 1) as usize;
        let y = y.clamp(0, h - 1) as usize;
        data[(y * width as usize + x) * channels + c] as i32
    };
    let n = width as usize * height as usize;
    let mut magnitude = vec![0f32; n];
    let mut orientation = vec![0f32; n];
    for y in 0..h {
        for x in 0..w {
            let mut best = (0i32, 0i32, 0i32);
            for c in 0..channels {
                let gx = (at(x + 1, y - 1, c) + 2 * at(x + 1, y, c) + at(x + 1, y + 1, c))
                    - (at(x - 1, y - 1, c) + 2 * at(x - 1, y, c) + at(x - 1, y + 1, c));
                let gy = (at(x - 1, y + 1, c) + 2 * at(x, y + 1, c) + at(x + 1, y + 1, c))
                    - (at(x - 1, y - 1, c) + 2 * at(x, y - 1, c) + at(x + 1, y - 1, c));
                let m2 = gx * gx + gy * gy;
                if m2 > best.2 {
                    best = (gx, gy, m2);
                }
            }
            let i = (y * w + x) as usize;
            if best.2 > 0 {
                magnitude[i] = (best.2 as f32).sqrt();
                let mut deg = (best.1 as f64).atan2(best.0 as f64).to_degrees();
                if deg < 0.0 {
                    deg += 180.0;
                }
                if deg >= 180.0 {
                    deg -= 180.0;
                }
                orientation[i] = deg as f32;
            }
        }
    }
    Ok(GradientImage {
        width,
        height,
        magnitude,
        orientation,
    })
}
