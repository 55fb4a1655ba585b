//! Scanline rasterization of the tube mesh: binary silhouettes and a
//! flat-shaded intensity render used for template gradients.

use nalgebra::{Point3, UnitQuaternion, Vector3};

use super::{CameraIntrinsics, TubeModel, Viewpoint};
use crate::error::{Error, Result};
use crate::mask::Mask;

/// Background level of shaded renders.
pub const BACKGROUND: u8 = 40;
const AMBIENT: f64 = 0.55;
const DIFFUSE: f64 = 0.45;
const ALBEDO: f64 = 235.0;

/// Fills pixel centers of a triangle row by row. Pixels on an edge count as
/// covered. `f` receives `(x, y)` plus barycentric weights.
pub(crate) fn scan_triangle(
    p: [(f64, f64); 3],
    clip: (i64, i64, i64, i64),
    mut f: impl FnMut(i64, i64, [f64; 3]),
) {
    let (x_lo, y_lo, x_hi, y_hi) = clip;
    let area2 = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[1].1 - p[0].1) * (p[2].0 - p[0].0);
    if area2.abs() < 1e-12 {
        return;
    }
    let p = if area2 < 0.0 { [p[0], p[2], p[1]] } else { p };
    let area2 = area2.abs();
    // edge i is opposite vertex i; E_i(x, y) = a*x + b*y + c >= 0 inside
    let edges: [(f64, f64, f64); 3] = std::array::from_fn(|i| {
        let (s, e) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        let a = -(e.1 - s.1);
        let b = e.0 - s.0;
        (a, b, -(a * s.0 + b * s.1))
    });
    let min_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
    let min_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
    let y0 = (min_y.ceil() as i64).max(y_lo);
    let y1 = (max_y.floor() as i64).min(y_hi);
    for y in y0..=y1 {
        let yf = y as f64;
        let (mut xl, mut xr) = (min_x, max_x);
        let mut empty = false;
        for &(a, b, c) in &edges {
            let k = b * yf + c;
            if a > 0.0 {
                xl = xl.max(-k / a);
            } else if a < 0.0 {
                xr = xr.min(-k / a);
            } else if k < 0.0 {
                empty = true;
            }
        }
        if empty || xl > xr {
            continue;
        }
        let x0 = (xl.ceil() as i64).max(x_lo);
        let x1 = (xr.floor() as i64).min(x_hi);
        for x in x0..=x1 {
            let xf = x as f64;
            let w: [f64; 3] =
                std::array::from_fn(|i| ((edges[i].0 * xf + edges[i].1 * yf + edges[i].2) / area2).max(0.0));
            f(x, y, w);
        }
    }
}

struct Projected {
    cam: Vec<Point3<f64>>,
    img: Vec<(f64, f64)>,
    triangles: Vec<[usize; 3]>,
    /// Inclusive pixel bounds of the projection.
    bounds: (i64, i64, i64, i64),
}

fn project_mesh(model: &TubeModel, vp: &Viewpoint, k: &CameraIntrinsics) -> Result<Projected> {
    project_mesh_posed(model, &vp.camera_from_body(), &vp.translation(), k)
}

fn project_mesh_posed(
    model: &TubeModel,
    r: &UnitQuaternion<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<Projected> {
    let mesh = model.mesh();
    let cam: Vec<Point3<f64>> = mesh.vertices.iter().map(|v| Point3::from(r * v.coords + t)).collect();
    let mut img = Vec::with_capacity(cam.len());
    for p in &cam {
        let (u, v) = k.project(p).ok_or(Error::SilhouetteClipped)?;
        if !k.contains(u, v) {
            return Err(Error::SilhouetteClipped);
        }
        img.push((u, v));
    }
    let bounds = (
        img.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor() as i64,
        img.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor() as i64,
        img.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64,
        img.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64,
    );
    Ok(Projected {
        cam,
        img,
        triangles: mesh.triangles,
        bounds,
    })
}

/// Binary silhouette of the tube seen from `vp`: a pixel is set iff its
/// center is covered by the projected mesh.
pub fn render_silhouette(model: &TubeModel, vp: &Viewpoint, k: &CameraIntrinsics) -> Result<Mask> {
    render_silhouette_posed(model, &vp.camera_from_body(), &vp.translation(), k)
}

/// Silhouette for an arbitrary camera-from-body pose.
pub fn render_silhouette_posed(
    model: &TubeModel,
    rotation: &UnitQuaternion<f64>,
    translation: &Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<Mask> {
    let proj = project_mesh_posed(model, rotation, translation, k)?;
    let (x0, y0, x1, y1) = proj.bounds;
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    let mut bits = vec![false; w * h];
    for t in &proj.triangles {
        let tri = [proj.img[t[0]], proj.img[t[1]], proj.img[t[2]]];
        scan_triangle(tri, proj.bounds, |x, y, _| {
            bits[(y - y0) as usize * w + (x - x0) as usize] = true;
        });
    }
    Ok(Mask::from_region(k.width, k.height, x0, y0, w as u32, h as u32, &bits))
}

/// Flat-shaded render of the tube on a uniform background, cropped to the
/// silhouette bounds plus a margin. Intensities are box-filtered over a
/// `SUPERSAMPLE x SUPERSAMPLE` grid per pixel so contours carry sub-pixel
/// edge orientation; the silhouette keeps pixel-center coverage.
#[derive(Clone, Debug)]
pub struct ShadedView {
    /// Crop origin in the full image.
    pub x0: i64,
    pub y0: i64,
    pub width: u32,
    pub height: u32,
    /// Row-major intensities of the crop.
    pub pixels: Vec<u8>,
    /// Silhouette in full-image coordinates.
    pub silhouette: Mask,
}

pub const SUPERSAMPLE: i64 = 4;

pub fn render_shaded(
    model: &TubeModel,
    vp: &Viewpoint,
    k: &CameraIntrinsics,
    margin: u32,
) -> Result<ShadedView> {
    let proj = project_mesh(model, vp, k)?;
    let m = margin as i64;
    let x0 = (proj.bounds.0 - m).max(0);
    let y0 = (proj.bounds.1 - m).max(0);
    let x1 = (proj.bounds.2 + m).min(k.width as i64 - 1);
    let y1 = (proj.bounds.3 + m).min(k.height as i64 - 1);
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;

    let mut covered = vec![false; w * h];
    for t in &proj.triangles {
        let tri = [proj.img[t[0]], proj.img[t[1]], proj.img[t[2]]];
        scan_triangle(tri, proj.bounds, |x, y, _| {
            covered[(y - y0) as usize * w + (x - x0) as usize] = true;
        });
    }

    // sub-sample X covers pixel x = X div S at offset (X mod S + 0.5) / S - 0.5
    let s = SUPERSAMPLE;
    let to_sub = |(u, v): (f64, f64)| ((u + 0.5) * s as f64 - 0.5, (v + 0.5) * s as f64 - 0.5);
    let (sw, sh) = (w * s as usize, h * s as usize);
    let sub_clip = (x0 * s, y0 * s, (x1 + 1) * s - 1, (y1 + 1) * s - 1);
    let mut sub = vec![BACKGROUND; sw * sh];
    let mut depth = vec![f64::INFINITY; sw * sh];
    let light = Vector3::new(-0.3, -0.6, -1.0).normalize();
    for t in &proj.triangles {
        let (a, b, c) = (proj.cam[t[0]], proj.cam[t[1]], proj.cam[t[2]]);
        let normal = (b - a).cross(&(c - a)).normalize();
        let shade = AMBIENT + DIFFUSE * normal.dot(&light).max(0.0);
        let level = (ALBEDO * shade).round().clamp(0.0, 255.0) as u8;
        let inv_z = [1.0 / a.z, 1.0 / b.z, 1.0 / c.z];
        let tri = [to_sub(proj.img[t[0]]), to_sub(proj.img[t[1]]), to_sub(proj.img[t[2]])];
        let (ta, tb, tc) = (tri[0], tri[1], tri[2]);
        // weights from scan_triangle follow its vertex order, which may be swapped
        let area2 = (tb.0 - ta.0) * (tc.1 - ta.1) - (tb.1 - ta.1) * (tc.0 - ta.0);
        let order = if area2 < 0.0 { [0, 2, 1] } else { [0, 1, 2] };
        scan_triangle(tri, sub_clip, |x, y, wts| {
            let iz: f64 = (0..3).map(|i| wts[i] * inv_z[order[i]]).sum();
            let z = 1.0 / iz;
            let idx = (y - y0 * s) as usize * sw + (x - x0 * s) as usize;
            if z < depth[idx] {
                depth[idx] = z;
                sub[idx] = level;
            }
        });
    }
    let n = (s * s) as u32;
    let mut pixels = vec![0u8; w * h];
    for py in 0..h {
        for px in 0..w {
            let mut acc = 0u32;
            for sy in 0..s as usize {
                let row = (py * s as usize + sy) * sw + px * s as usize;
                acc += sub[row..row + s as usize].iter().map(|&v| v as u32).sum::<u32>();
            }
            pixels[py * w + px] = ((acc + n / 2) / n) as u8;
        }
    }
    Ok(ShadedView {
        x0,
        y0,
        width: w as u32,
        height: h as u32,
        pixels,
        silhouette: Mask::from_region(k.width, k.height, x0, y0, w as u32, h as u32, &covered),
    })
}
