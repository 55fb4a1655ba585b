//! Detection contours drawn over the input image.

use image::{Rgb, RgbImage};
use tubeloc::Mask;

const PALETTE: [[u8; 3]; 6] = [
    [255, 40, 40],
    [40, 220, 40],
    [60, 120, 255],
    [255, 200, 0],
    [230, 60, 230],
    [0, 220, 220],
];

pub fn color(rank: usize) -> Rgb<u8> {
    Rgb(PALETTE[rank % PALETTE.len()])
}

/// Mask pixels inside the image with a 4-neighbour outside the mask.
/// Masks of another size are clipped to the image.
pub fn contour(mask: &Mask, width: u32, height: u32) -> Vec<(u32, u32)> {
    mask.pixels()
        .filter(|&(x, y)| x < width && y < height)
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dx, dy)| !mask.get(x + dx, y + dy))
        })
        .collect()
}

/// Paints the contour of `mask`; returns the number of painted pixels.
pub fn draw_contour(img: &mut RgbImage, mask: &Mask, c: Rgb<u8>) -> usize {
    let px = contour(mask, img.width(), img.height());
    for &(x, y) in &px {
        img.put_pixel(x, y, c);
    }
    px.len()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn square_outline() {
        let mut img = RgbImage::new(10, 10);
        let m = Mask::from_fn(10, 10, |x, y| (2..6).contains(&x) && (3..7).contains(&y));
        assert_eq!(draw_contour(&mut img, &m, color(0)), 12);
        assert_eq!(*img.get_pixel(2, 3), color(0));
        assert_eq!(*img.get_pixel(3, 4), Rgb([0, 0, 0]));
        assert_eq!(*img.get_pixel(1, 3), Rgb([0, 0, 0]));
    }

    #[test]
    fn empty_mask_draws_nothing() {
        let mut img = RgbImage::from_pixel(4, 4, Rgb([9, 9, 9]));
        let before = img.clone();
        assert_eq!(draw_contour(&mut img, &Mask::empty(4, 4), color(1)), 0);
        assert_eq!(img, before);
    }

    proptest! {
        #[test]
        fn mismatched_masks_are_clipped(mw in 1u32..40, mh in 1u32..40, iw in 1u32..30, ih in 1u32..30, s in any::<u64>()) {
            let m = Mask::from_fn(mw, mh, |x, y| (s.rotate_left(x * 3 + y * 5) & 1) == 1);
            let mut img = RgbImage::new(iw, ih);
            let n = draw_contour(&mut img, &m, color(2));
            prop_assert!(n <= (iw * ih) as usize);
            prop_assert!(n <= m.area() as usize);
        }
    }
}
