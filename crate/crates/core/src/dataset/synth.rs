//! Synthetic depot scenes: tubes lying on procedurally textured ground with
//! rocks, sun shading, cast shadows and dust, rendered by ray casting with
//! exact per-pixel ground truth.
//!
//! World frame: z up, ground plane `z = 0`. Tubes rest on the ground with
//! their centroid at `z = radius`.

use std::collections::HashMap;

use image::GrayImage;
use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{GroundTruthSet, GtImage, GtInstance};
use crate::geometry::{CameraIntrinsics, TubeModel};
use crate::mask::Mask;
use crate::matching::PoseEstimate;

const AMBIENT: f64 = 0.3;
const DIFFUSE: f64 = 0.7;
const TUBE_ALBEDO: f64 = 0.92;
const SAND_ALBEDO: f64 = 0.58;
const DUST_ALPHA: f64 = 0.85;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Terrain {
    Plain,
    Flagstone,
    /// Rocks covering `density` of the visible ground area.
    CfaRocks { density: f64 },
    Ditch,
    Riverbed,
}

impl Terrain {
    pub fn label(&self) -> String {
        match self {
            Terrain::Plain => "plain".into(),
            Terrain::Flagstone => "flagstone".into(),
            Terrain::CfaRocks { density } => format!("cfa{}", (density * 100.0).round()),
            Terrain::Ditch => "ditch".into(),
            Terrain::Riverbed => "riverbed".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sun {
    /// Degrees counter-clockwise from world +x.
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Default for Sun {
    fn default() -> Self {
        Sun {
            azimuth_deg: 135.0,
            elevation_deg: 45.0,
        }
    }
}

impl Sun {
    pub fn direction(&self) -> Vector3<f64> {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
}

impl CameraPose {
    /// Camera-from-world rotation: x right, y down, z forward, world z up.
    pub fn rotation(&self) -> Result<UnitQuaternion<f64>> {
        let p = Vector3::from(self.position);
        let forward = Vector3::from(self.look_at) - p;
        let right = forward.cross(&Vector3::z());
        if forward.norm() < 1e-9 || right.norm() < 1e-6 * forward.norm() {
            return Err(Error::invalid("camera must not look straight up or down"));
        }
        let forward = forward.normalize();
        let right = right.normalize();
        let down = forward.cross(&right);
        let m = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        Ok(UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubePlacement {
    /// Ground-plane position of the centroid, meters.
    pub position: [f64; 2],
    /// Heading of the long axis, degrees from world +x.
    pub yaw_deg: f64,
    /// Rotation about the long axis, degrees.
    #[serde(default)]
    pub roll_deg: f64,
    /// Fraction of the length, measured from one end, under dust.
    #[serde(default)]
    pub dust_coverage: f64,
    /// Places a rock against the tube on the camera side.
    #[serde(default)]
    pub occluder_contact: bool,
}

impl TubePlacement {
    pub fn world_from_body(&self, model: &TubeModel) -> (UnitQuaternion<f64>, Vector3<f64>) {
        let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw_deg.to_radians())
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.roll_deg.to_radians());
        (r, Vector3::new(self.position[0], self.position[1], model.radius))
    }

    fn axis_xy(&self) -> (f64, f64) {
        let y = self.yaw_deg.to_radians();
        (y.cos(), y.sin())
    }
}

fn default_noise() -> f64 {
    2.0 / 255.0
}

fn default_supersample() -> u32 {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub terrain: Terrain,
    pub tubes: Vec<TubePlacement>,
    #[serde(default)]
    pub sun: Sun,
    #[serde(default)]
    pub camera: CameraIntrinsics,
    pub camera_pose: CameraPose,
    #[serde(default)]
    pub tube: TubeModel,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of additive Gaussian noise, as a fraction of 255.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default = "default_true")]
    pub shadows: bool,
    /// Samples per pixel side; odd so the center sample sits on the pixel
    /// center that defines the ground truth.
    #[serde(default = "default_supersample")]
    pub supersample: u32,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.tube.validate()?;
        self.camera_pose.rotation()?;
        if self.camera_pose.position[2] <= 0.0 {
            return Err(Error::invalid("camera must be above the ground"));
        }
        if self.supersample == 0 || self.supersample % 2 == 0 {
            return Err(Error::invalid("supersample must be odd"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        if let Terrain::CfaRocks { density } = self.terrain {
            if !(0.0..0.9).contains(&density) {
                return Err(Error::invalid("rock density must lie in [0, 0.9)"));
            }
        }
        for t in &self.tubes {
            if !(0.0..1.0).contains(&t.dust_coverage) {
                return Err(Error::invalid("dust_coverage must lie in [0, 1)"));
            }
        }
        for i in 0..self.tubes.len() {
            for j in i + 1..self.tubes.len() {
                if tubes_collide(&self.tube, &self.tubes[i], &self.tubes[j]) {
                    return Err(Error::TubeCollision(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Ground-truth camera-from-body pose of tube `i`.
    pub fn tube_pose(&self, i: usize) -> Result<PoseEstimate> {
        let r_cw = self.camera_pose.rotation()?;
        let (r_wb, p) = self.tubes[i].world_from_body(&self.tube);
        let c = Vector3::from(self.camera_pose.position);
        Ok(PoseEstimate::new(r_cw * r_wb, r_cw * (p - c)))
    }
}

/// Closest distance between two 2D segments.
fn segment_distance(a0: (f64, f64), a1: (f64, f64), b0: (f64, f64), b1: (f64, f64)) -> f64 {
    fn point_seg(p: (f64, f64), s0: (f64, f64), s1: (f64, f64)) -> f64 {
        let (dx, dy) = (s1.0 - s0.0, s1.1 - s0.1);
        let l2 = dx * dx + dy * dy;
        let t = if l2 == 0.0 {
            0.0
        } else {
            (((p.0 - s0.0) * dx + (p.1 - s0.1) * dy) / l2).clamp(0.0, 1.0)
        };
        ((p.0 - s0.0 - t * dx).powi(2) + (p.1 - s0.1 - t * dy).powi(2)).sqrt()
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let (d1, d2) = (cross(b0, b1, a0), cross(b0, b1, a1));
    let (d3, d4) = (cross(a0, a1, b0), cross(a0, a1, b1));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_seg(a0, b0, b1)
        .min(point_seg(a1, b0, b1))
        .min(point_seg(b0, a0, a1))
        .min(point_seg(b1, a0, a1))
}

fn tube_segment(model: &TubeModel, t: &TubePlacement) -> ((f64, f64), (f64, f64)) {
    let (ax, ay) = t.axis_xy();
    let h = model.length / 2.0;
    (
        (t.position[0] - h * ax, t.position[1] - h * ay),
        (t.position[0] + h * ax, t.position[1] + h * ay),
    )
}

fn tubes_collide(model: &TubeModel, a: &TubePlacement, b: &TubePlacement) -> bool {
    let (a0, a1) = tube_segment(model, a);
    let (b0, b1) = tube_segment(model, b);
    segment_distance(a0, a1, b0, b1) < 2.0 * model.radius
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash2(seed: u64, x: i64, y: i64) -> u64 {
    splitmix(seed ^ splitmix((x as u64).wrapping_mul(0x1f1f_1f1f) ^ splitmix(y as u64)))
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in `[0, 1)`.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (ix, iy) = (x.floor() as i64, y.floor() as i64);
    let (fx, fy) = (x - ix as f64, y - iy as f64);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (s(fx), s(fy));
    let v = |dx, dy| unit(hash2(seed, ix + dx, iy + dy));
    let top = v(0, 0) + (v(1, 0) - v(0, 0)) * sx;
    let bottom = v(0, 1) + (v(1, 1) - v(0, 1)) * sx;
    top + (bottom - top) * sy
}

fn fbm(seed: u64, x: f64, y: f64, octaves: u32) -> f64 {
    let (mut sum, mut amp, mut freq, mut norm) = (0.0, 0.5, 1.0, 0.0);
    for o in 0..octaves {
        sum += amp * value_noise(seed.wrapping_add(o as u64), x * freq, y * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

/// Distances to the nearest and second-nearest jittered grid point, plus
/// the nearest point's cell hash.
fn voronoi(seed: u64, x: f64, y: f64) -> (f64, f64, u64) {
    let (ix, iy) = (x.floor() as i64, y.floor() as i64);
    let (mut d1, mut d2, mut id) = (f64::INFINITY, f64::INFINITY, 0);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let h = hash2(seed, ix + dx, iy + dy);
            let px = (ix + dx) as f64 + 0.15 + 0.7 * unit(h);
            let py = (iy + dy) as f64 + 0.15 + 0.7 * unit(splitmix(h));
            let d = ((px - x).powi(2) + (py - y).powi(2)).sqrt();
            if d < d1 {
                d2 = d1;
                d1 = d;
                id = h;
            } else if d < d2 {
                d2 = d;
            }
        }
    }
    (d1, d2, id)
}

#[derive(Clone, Copy, Debug)]
struct Rock {
    center: Vector3<f64>,
    axes: Vector3<f64>,
    yaw: f64,
    albedo: f64,
}

impl Rock {
    fn bound(&self) -> f64 {
        self.axes.max()
    }

    fn to_local(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.yaw.sin_cos();
        Vector3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
    }

    fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        let lo = self.to_local(&(o.coords - self.center)).component_div(&self.axes);
        let ld = self.to_local(d).component_div(&self.axes);
        let a = ld.norm_squared();
        let b = lo.dot(&ld);
        let c = lo.norm_squared() - 1.0;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t = [(-b - sq) / a, (-b + sq) / a].into_iter().find(|&t| t > 1e-9)?;
        let p = lo + ld * t;
        let n_local = p.component_div(&self.axes);
        let (s, c) = self.yaw.sin_cos();
        let n = Vector3::new(c * n_local.x - s * n_local.y, s * n_local.x + c * n_local.y, n_local.z);
        Some((t, n.normalize()))
    }

    fn footprint_area(&self) -> f64 {
        let k = 1.0 - (self.center.z / self.axes.z).powi(2);
        std::f64::consts::PI * self.axes.x * self.axes.y * k.max(0.0)
    }
}

struct PlacedTube {
    model: TubeModel,
    r_wb: UnitQuaternion<f64>,
    p: Vector3<f64>,
    /// Body x beyond which (times `dust_sign`) the surface is dusted.
    dust_from: f64,
    dust_sign: f64,
}

impl PlacedTube {
    fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>, bool)> {
        let inv = self.r_wb.inverse();
        let ob = Point3::from(inv * (o.coords - self.p));
        let db = inv * d;
        let hit = self.model.intersect(&ob, &db)?;
        let dusted = self.dust_sign * hit.point.x >= self.dust_from;
        Some((hit.t, self.r_wb * hit.normal, dusted))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Surface {
    Ground,
    Rock(usize),
    Tube(usize, bool),
}

struct World<'a> {
    spec: &'a SceneSpec,
    tubes: Vec<PlacedTube>,
    rocks: Vec<Rock>,
    /// Rock indices per 0.25 m ground cell.
    rock_grid: HashMap<(i64, i64), Vec<usize>>,
    rock_top: f64,
    sun: Vector3<f64>,
    ditch: Option<(Vector3<f64>, Vector3<f64>)>,
    tex_seed: u64,
}

const CELL: f64 = 0.25;

impl World<'_> {
    fn ground_albedo_normal(&self, x: f64, y: f64) -> (f64, Vector3<f64>) {
        let s = self.tex_seed;
        let fine = fbm(s, x * 6.0, y * 6.0, 4);
        let mut n = Vector3::z();
        let albedo = match self.spec.terrain {
            Terrain::Plain | Terrain::CfaRocks { .. } => 0.42 + 0.12 * (fine - 0.5),
            Terrain::Flagstone => {
                let (d1, d2, id) = voronoi(s ^ 0xf1a9, x / 0.35, y / 0.35);
                if (d2 - d1) * 0.35 < 0.012 {
                    0.16
                } else {
                    0.36 + 0.16 * unit(id) + 0.08 * (fine - 0.5)
                }
            }
            Terrain::Ditch => {
                let (origin, across) = self.ditch.expect("ditch geometry");
                let d = (Vector3::new(x, y, 0.0) - origin).dot(&across);
                let base = 0.42 + 0.12 * (fine - 0.5);
                if d.abs() < 0.15 {
                    base - 0.07
                } else if d.abs() < 0.3 {
                    let tilt = 0.45 * d.signum();
                    n = (Vector3::z() - across * tilt).normalize();
                    base - 0.03
                } else {
                    base
                }
            }
            Terrain::Riverbed => {
                let streak = fbm(s ^ 0x5eed, x * 1.2, y * 9.0, 3);
                0.38 + 0.2 * (streak - 0.5) + 0.06 * (fine - 0.5)
            }
        };
        (albedo.clamp(0.05, 0.95), n)
    }

    fn nearest(&self, o: &Point3<f64>, d: &Vector3<f64>, rocks: &[usize]) -> Option<(f64, Vector3<f64>, Surface)> {
        let mut best: Option<(f64, Vector3<f64>, Surface)> = None;
        let mut consider = |t: f64, n: Vector3<f64>, s: Surface| {
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, n, s));
            }
        };
        if d.z < 0.0 {
            let t = -o.z / d.z;
            if t > 0.0 {
                consider(t, Vector3::z(), Surface::Ground);
            }
        }
        for &i in rocks {
            if let Some((t, n)) = self.rocks[i].intersect(o, d) {
                consider(t, n, Surface::Rock(i));
            }
        }
        for (i, tube) in self.tubes.iter().enumerate() {
            if let Some((t, n, dusted)) = tube.intersect(o, d) {
                consider(t, n, Surface::Tube(i, dusted));
            }
        }
        best
    }

    fn in_shadow(&self, p: &Point3<f64>) -> bool {
        let l = self.sun;
        if l.z <= 0.0 {
            return true;
        }
        let reach = ((self.rock_top.max(2.0 * self.spec.tube.radius + 0.01) - p.z).max(0.0) / l.z) * l.xy().norm();
        let end = (p.x + l.x / l.xy().norm().max(1e-12) * reach, p.y + l.y / l.xy().norm().max(1e-12) * reach);
        let (cx0, cx1) = (((p.x.min(end.0)) / CELL).floor() as i64 - 1, ((p.x.max(end.0)) / CELL).floor() as i64 + 1);
        let (cy0, cy1) = (((p.y.min(end.1)) / CELL).floor() as i64 - 1, ((p.y.max(end.1)) / CELL).floor() as i64 + 1);
        for tube in &self.tubes {
            if tube.intersect(p, &l).is_some() {
                return true;
            }
        }
        if self.rocks.is_empty() {
            return false;
        }
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                if let Some(list) = self.rock_grid.get(&(cx, cy)) {
                    if list.iter().any(|&i| self.rocks[i].intersect(p, &l).is_some()) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn shade(&self, o: &Point3<f64>, d: &Vector3<f64>, rocks: &[usize]) -> (f64, Option<(usize, bool)>) {
        let Some((t, n, surf)) = self.nearest(o, d, rocks) else {
            return (0.5 * 255.0, None);
        };
        let p = o + d * t;
        let (albedo, n, label) = match surf {
            Surface::Ground => {
                let (a, n) = self.ground_albedo_normal(p.x, p.y);
                (a, n, None)
            }
            Surface::Rock(i) => {
                let r = &self.rocks[i];
                let tex = fbm(self.tex_seed ^ 0x70c4, p.x * 25.0, p.y * 25.0 + p.z * 25.0, 3);
                (r.albedo + 0.1 * (tex - 0.5), n, None)
            }
            Surface::Tube(i, dusted) => {
                let a = if dusted {
                    let tex = fbm(self.tex_seed ^ 0xd057, p.x * 40.0, p.y * 40.0 + p.z * 40.0, 3);
                    DUST_ALPHA * (SAND_ALBEDO + 0.12 * (tex - 0.5)) + (1.0 - DUST_ALPHA) * TUBE_ALBEDO
                } else {
                    TUBE_ALBEDO
                };
                (a, n, Some((i, dusted)))
            }
        };
        let facing = n.dot(&self.sun).max(0.0);
        let lit = if facing > 0.0 && self.spec.shadows {
            !self.in_shadow(&(p + n * 1e-5))
        } else {
            facing > 0.0
        };
        let light = AMBIENT + if lit { DIFFUSE * facing } else { 0.0 };
        ((255.0 * albedo * light).clamp(0.0, 255.0), label)
    }
}

/// A rendered scene with per-tube ground truth.
#[derive(Clone, Debug)]
pub struct Scene {
    /// Final image, noise included.
    pub image: GrayImage,
    /// Image before noise.
    pub clean: GrayImage,
    pub instances: Vec<SceneInstance>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneInstance {
    pub tube: usize,
    /// Visible, undusted tube pixels.
    pub mask: Mask,
    /// Every pixel whose center sees the tube, dusted or not.
    pub tube_pixels: Mask,
    pub pose: PoseEstimate,
}

fn place_rocks(spec: &SceneSpec, rng: &mut ChaCha8Rng, r_cw: &UnitQuaternion<f64>) -> Vec<Rock> {
    let cam = Point3::from(spec.camera_pose.position);
    let k = &spec.camera;
    let mut rocks = Vec::new();
    // contact rocks first so random rocks steer clear of them too
    for t in spec.tubes.iter().filter(|t| t.occluder_contact) {
        let (ax, ay) = t.axis_xy();
        let mut side = Vector3::new(-ay, ax, 0.0);
        let to_cam = cam.coords - Vector3::new(t.position[0], t.position[1], 0.0);
        if side.dot(&to_cam) < 0.0 {
            side = -side;
        }
        let a = rng.random_range(0.03..0.05);
        let along = rng.random_range(-0.25..0.25) * spec.tube.length;
        let c = rng.random_range(0.5..0.8) * a;
        let center = Vector3::new(t.position[0] + along * ax, t.position[1] + along * ay, 0.0)
            + side * (spec.tube.radius + 0.8 * a);
        rocks.push(Rock {
            center: Vector3::new(center.x, center.y, 0.15 * c),
            axes: Vector3::new(a, a * rng.random_range(0.7..1.0), c),
            yaw: rng.random_range(0.0..std::f64::consts::TAU),
            albedo: rng.random_range(0.3..0.45),
        });
    }
    let (density, size) = match spec.terrain {
        Terrain::CfaRocks { density } => (density, (0.03, 0.14)),
        Terrain::Riverbed => (0.12, (0.01, 0.035)),
        _ => (0.0, (0.0, 0.0)),
    };
    if density <= 0.0 {
        return rocks;
    }
    // visible ground region from rays along the image border, capped at 8 m
    let r_wc = r_cw.inverse();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (w, h) = (k.width as f64 - 1.0, k.height as f64 - 1.0);
    for i in 0..=16 {
        let s = i as f64 / 16.0;
        for (u, v) in [(s * w, 0.0), (s * w, h), (0.0, s * h), (w, s * h)] {
            let d = r_wc * k.ray(u, v);
            let t = if d.z < -1e-9 { (-cam.z / d.z).min(8.0) } else { 8.0 };
            let p = cam + d * t;
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
    }
    let target = density * (x1 - x0) * (y1 - y0);
    let mut covered = 0.0;
    let mut attempts = 0;
    while covered < target && attempts < 200_000 && rocks.len() < 6000 {
        attempts += 1;
        let a = size.0 * (size.1 / size.0 as f64).powf(rng.random::<f64>());
        let c = a * rng.random_range(0.4..0.8);
        let rock = Rock {
            center: Vector3::new(rng.random_range(x0..x1), rng.random_range(y0..y1), c * rng.random_range(-0.3..0.3)),
            axes: Vector3::new(a, a * rng.random_range(0.6..1.0), c),
            yaw: rng.random_range(0.0..std::f64::consts::TAU),
            albedo: rng.random_range(0.25..0.5),
        };
        let clear = spec.tubes.iter().all(|t| {
            let (s0, s1) = tube_segment(&spec.tube, t);
            let c = (rock.center.x, rock.center.y);
            segment_distance(c, c, s0, s1) > rock.bound() + spec.tube.radius + 0.01
        });
        if clear {
            covered += rock.footprint_area();
            rocks.push(rock);
        }
    }
    rocks
}

fn build_world(spec: &SceneSpec) -> Result<World<'_>> {
    let r_cw = spec.camera_pose.rotation()?;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(spec.seed ^ 0x5ce_e5ce));
    let tex_seed = splitmix(spec.seed);
    let tubes = spec
        .tubes
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (r_wb, p) = t.world_from_body(&spec.tube);
            let half = spec.tube.length / 2.0;
            PlacedTube {
                model: spec.tube,
                r_wb,
                p,
                dust_from: if t.dust_coverage > 0.0 {
                    half - t.dust_coverage * spec.tube.length
                } else {
                    f64::INFINITY
                },
                // the dusted end depends only on the seed and tube index
                dust_sign: if splitmix(spec.seed ^ (i as u64 + 1).wrapping_mul(0xd0d0)) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                },
            }
        })
        .collect();
    let ditch = matches!(spec.terrain, Terrain::Ditch).then(|| {
        let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let la = spec.camera_pose.look_at;
        let offset = rng.random_range(0.3..0.6) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let across = Vector3::new(-a.sin(), a.cos(), 0.0);
        (Vector3::new(la[0], la[1], 0.0) + across * offset, across)
    });
    let rocks = place_rocks(spec, &mut rng, &r_cw);
    let mut rock_grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, r) in rocks.iter().enumerate() {
        let b = r.bound();
        for cy in ((r.center.y - b) / CELL).floor() as i64..=((r.center.y + b) / CELL).floor() as i64 {
            for cx in ((r.center.x - b) / CELL).floor() as i64..=((r.center.x + b) / CELL).floor() as i64 {
                rock_grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    let rock_top = rocks.iter().map(|r| r.center.z + r.axes.z).fold(0.0, f64::max);
    Ok(World {
        spec,
        tubes,
        rocks,
        rock_grid,
        rock_top,
        sun: spec.sun.direction(),
        ditch,
        tex_seed,
    })
}

const TILE: u32 = 16;

/// Rocks whose bounding sphere may cover each 16x16 pixel tile.
fn rock_tiles(world: &World, r_cw: &UnitQuaternion<f64>) -> Vec<Vec<usize>> {
    let k = &world.spec.camera;
    let (tw, th) = (k.width.div_ceil(TILE), k.height.div_ceil(TILE));
    let mut tiles = vec![Vec::new(); (tw * th) as usize];
    let cam = Vector3::from(world.spec.camera_pose.position);
    for (i, r) in world.rocks.iter().enumerate() {
        let c = r_cw * (r.center - cam);
        let b = r.bound();
        let (tx0, ty0, tx1, ty1) = if c.z - b < 0.05 {
            if c.z + b < 0.0 {
                continue;
            }
            (0, 0, tw as i64 - 1, th as i64 - 1)
        } else {
            let u = k.fx * c.x / c.z + k.cx;
            let v = k.fy * c.y / c.z + k.cy;
            let rad = k.fx.max(k.fy) * b / (c.z - b) + 2.0;
            (
                ((u - rad) / TILE as f64).floor() as i64,
                ((v - rad) / TILE as f64).floor() as i64,
                ((u + rad) / TILE as f64).floor() as i64,
                ((v + rad) / TILE as f64).floor() as i64,
            )
        };
        for ty in ty0.max(0)..=ty1.min(th as i64 - 1) {
            for tx in tx0.max(0)..=tx1.min(tw as i64 - 1) {
                tiles[(ty * tw as i64 + tx) as usize].push(i);
            }
        }
    }
    tiles
}

/// Renders `spec`. Ground truth comes from the ray through each pixel
/// center; intensities average `supersample^2` rays per pixel.
pub fn render_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let world = build_world(spec)?;
    let r_cw = spec.camera_pose.rotation()?;
    let r_wc = r_cw.inverse();
    let k = spec.camera;
    let (w, h) = (k.width as usize, k.height as usize);
    let tiles = rock_tiles(&world, &r_cw);
    let tw = k.width.div_ceil(TILE) as usize;
    let cam = Point3::from(spec.camera_pose.position);
    let s = spec.supersample as usize;
    let offsets: Vec<f64> = (0..s).map(|i| (i as f64 + 0.5) / s as f64 - 0.5).collect();

    let rows: Vec<(Vec<f64>, Vec<Option<(usize, bool)>>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut vals = Vec::with_capacity(w);
            let mut labels = Vec::with_capacity(w);
            for x in 0..w {
                let rocks = &tiles[(y / TILE as usize) * tw + x / TILE as usize];
                let mut acc = 0.0;
                let mut center = None;
                for (j, oy) in offsets.iter().enumerate() {
                    for (i, ox) in offsets.iter().enumerate() {
                        let d = r_wc * k.ray(x as f64 + ox, y as f64 + oy);
                        let (v, label) = world.shade(&cam, &d, rocks);
                        acc += v;
                        if i == s / 2 && j == s / 2 {
                            center = label;
                        }
                    }
                }
                vals.push(acc / (s * s) as f64);
                labels.push(center);
            }
            (vals, labels)
        })
        .collect();

    let mut clean = GrayImage::new(k.width, k.height);
    let mut image = GrayImage::new(k.width, k.height);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(spec.seed ^ 0x0153));
    let noise = Normal::new(0.0, spec.noise_sigma * 255.0).map_err(|e| Error::invalid(e.to_string()))?;
    for (y, (vals, _)) in rows.iter().enumerate() {
        for (x, &v) in vals.iter().enumerate() {
            clean.put_pixel(x as u32, y as u32, image::Luma([v.round().clamp(0.0, 255.0) as u8]));
            let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            image.put_pixel(x as u32, y as u32, image::Luma([(v + n).round().clamp(0.0, 255.0) as u8]));
        }
    }

    let mut instances = Vec::new();
    for i in 0..spec.tubes.len() {
        let label = |want_clean: bool| {
            let mut dense = vec![false; w * h];
            for (y, (_, labels)) in rows.iter().enumerate() {
                for (x, l) in labels.iter().enumerate() {
                    if let Some((t, dusted)) = l {
                        dense[y * w + x] = *t == i && !(want_clean && *dusted);
                    }
                }
            }
            Mask::from_dense(k.width, k.height, &dense)
        };
        instances.push(SceneInstance {
            tube: i,
            mask: label(true),
            tube_pixels: label(false),
            pose: spec.tube_pose(i)?,
        });
    }
    Ok(Scene {
        image,
        clean,
        instances,
    })
}

/// Image plus the ground-truth fragment for one scene. Tubes with no
/// visible undusted pixel are left out of the ground truth.
pub fn synth_scene(spec: &SceneSpec, image_id: &str) -> Result<(GrayImage, GroundTruthSet)> {
    let scene = render_scene(spec)?;
    let gt = GroundTruthSet {
        images: vec![GtImage {
            id: image_id.to_string(),
            width: spec.camera.width,
            height: spec.camera.height,
        }],
        instances: scene
            .instances
            .into_iter()
            .filter(|i| !i.mask.is_empty())
            .map(|i| GtInstance {
                image_id: image_id.to_string(),
                mask: i.mask,
                pose: Some(i.pose),
            })
            .collect(),
    };
    Ok((scene.image, gt))
}

/// Draws random scene layouts: camera range and elevation, tube positions
/// and headings, sun. Every sampled tube lies fully inside the frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSampler {
    pub terrain: Terrain,
    /// Inclusive range of tubes per scene.
    pub tubes: (usize, usize),
    /// Camera-to-look-at distance, meters.
    pub distance_range: (f64, f64),
    /// Elevation of the camera above the look-at point, degrees.
    pub view_elevation_deg: (f64, f64),
    pub sun_elevation_deg: (f64, f64),
    pub sun_azimuth_deg: (f64, f64),
    pub dust_coverage: f64,
    /// Probability that a tube gets a contact rock.
    pub occluder_probability: f64,
    /// Maximum tube offset from the look-at point, meters.
    pub spread: f64,
    /// Pixels kept free between every tube and the image border.
    pub border: f64,
    pub camera: CameraIntrinsics,
    pub tube: TubeModel,
    pub noise_sigma: f64,
    pub shadows: bool,
    pub supersample: u32,
}

impl Default for SceneSampler {
    fn default() -> Self {
        SceneSampler {
            terrain: Terrain::Plain,
            tubes: (1, 1),
            distance_range: (1.5, 2.5),
            view_elevation_deg: (25.0, 65.0),
            sun_elevation_deg: (30.0, 70.0),
            sun_azimuth_deg: (0.0, 360.0),
            dust_coverage: 0.0,
            occluder_probability: 0.0,
            spread: 0.3,
            border: 12.0,
            camera: CameraIntrinsics::default(),
            tube: TubeModel::default(),
            noise_sigma: default_noise(),
            shadows: true,
            supersample: default_supersample(),
        }
    }
}

impl SceneSampler {
    pub fn sample(&self, seed: u64) -> Result<SceneSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let range = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let n_tubes = if self.tubes.1 > self.tubes.0 {
            rng.random_range(self.tubes.0..=self.tubes.1)
        } else {
            self.tubes.0
        };
        for _ in 0..500 {
            let look = [range(&mut rng, (-0.5, 0.5)), range(&mut rng, (-0.5, 0.5)), 0.0];
            let dist = range(&mut rng, self.distance_range);
            let elev = range(&mut rng, self.view_elevation_deg).to_radians();
            let az = rng.random_range(0.0..std::f64::consts::TAU);
            let pose = CameraPose {
                position: [
                    look[0] + dist * elev.cos() * az.cos(),
                    look[1] + dist * elev.cos() * az.sin(),
                    dist * elev.sin(),
                ],
                look_at: look,
            };
            let mut tubes: Vec<TubePlacement> = Vec::new();
            for _ in 0..n_tubes * 50 {
                if tubes.len() == n_tubes {
                    break;
                }
                let (r, a) = (self.spread * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                let cand = TubePlacement {
                    position: [look[0] + r * a.cos(), look[1] + r * a.sin()],
                    yaw_deg: rng.random_range(0.0..360.0),
                    roll_deg: rng.random_range(0.0..360.0),
                    dust_coverage: self.dust_coverage,
                    occluder_contact: rng.random_bool(self.occluder_probability.clamp(0.0, 1.0)),
                };
                let gap_ok = tubes.iter().all(|t| {
                    let (a0, a1) = tube_segment(&self.tube, t);
                    let (b0, b1) = tube_segment(&self.tube, &cand);
                    segment_distance(a0, a1, b0, b1) > 2.0 * self.tube.radius + 0.05
                });
                if gap_ok {
                    tubes.push(cand);
                }
            }
            if tubes.len() < n_tubes {
                continue;
            }
            let spec = SceneSpec {
                terrain: self.terrain.clone(),
                tubes,
                sun: Sun {
                    azimuth_deg: range(&mut rng, self.sun_azimuth_deg),
                    elevation_deg: range(&mut rng, self.sun_elevation_deg),
                },
                camera: self.camera,
                camera_pose: pose,
                tube: self.tube,
                seed: rng.random(),
                noise_sigma: self.noise_sigma,
                shadows: self.shadows,
                supersample: self.supersample,
            };
            if (0..spec.tubes.len()).all(|i| self.in_frame(&spec, i)) {
                spec.validate()?;
                return Ok(spec);
            }
        }
        Err(Error::invalid("could not place the tubes inside the frame"))
    }

    fn in_frame(&self, spec: &SceneSpec, i: usize) -> bool {
        let Ok(pose) = spec.tube_pose(i) else {
            return false;
        };
        let k = &spec.camera;
        let half = spec.tube.length / 2.0;
        let rad = spec.tube.radius;
        [-half, half].iter().all(|&x| {
            [(0.0, 0.0), (rad, 0.0), (-rad, 0.0), (0.0, rad), (0.0, -rad)].iter().all(|&(y, z)| {
                let p = pose.rotation * Vector3::new(x, y, z) + pose.translation;
                k.project(&Point3::from(p)).is_some_and(|(u, v)| {
                    u >= self.border
                        && v >= self.border
                        && u <= k.width as f64 - 1.0 - self.border
                        && v <= k.height as f64 - 1.0 - self.border
                })
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::render_silhouette_posed;

    fn small_camera() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 400.0,
            fy: 400.0,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
        }
    }

    fn one_tube(terrain: Terrain, dust: f64, seed: u64) -> SceneSpec {
        SceneSampler {
            terrain,
            camera: small_camera(),
            dust_coverage: dust,
            distance_range: (1.0, 1.4),
            ..SceneSampler::default()
        }
        .sample(seed)
        .unwrap()
    }

    #[test]
    fn camera_pose_convention() {
        let pose = CameraPose {
            position: [0.0, -2.0, 1.0],
            look_at: [0.0, 0.0, 1.0],
        };
        let r = pose.rotation().unwrap();
        assert!((r * Vector3::x() - Vector3::x()).norm() < 1e-12);
        assert!((r * Vector3::y() - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((r * Vector3::z() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        let up = CameraPose {
            position: [0.0, 0.0, 2.0],
            look_at: [0.0, 0.0, 0.0],
        };
        assert!(up.rotation().is_err());
    }

    #[test]
    fn ground_truth_matches_mesh_silhouette() {
        for seed in 0..4 {
            let mut spec = one_tube(Terrain::Plain, 0.0, seed);
            spec.shadows = false;
            let scene = render_scene(&spec).unwrap();
            let inst = &scene.instances[0];
            let sil =
                render_silhouette_posed(&spec.tube, &inst.pose.rotation, &inst.pose.translation, &spec.camera).unwrap();
            // every disagreement lies within one pixel of the other mask's boundary
            let near = |m: &Mask, x: i64, y: i64| (-1..=1).any(|dy| (-1..=1).any(|dx| m.get(x + dx, y + dy)));
            for (x, y) in inst.mask.pixels() {
                assert!(near(&sil, x as i64, y as i64));
            }
            for (x, y) in sil.pixels() {
                assert!(near(&inst.mask, x as i64, y as i64));
            }
            let iou = inst.mask.iou(&sil).unwrap();
            assert!(iou > 0.85, "seed {seed}: IoU {iou}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = one_tube(Terrain::CfaRocks { density: 0.06 }, 0.2, 9);
        let (a, ga) = synth_scene(&spec, "x.png").unwrap();
        let (b, gb) = synth_scene(&spec, "x.png").unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
    }

    #[test]
    fn dust_half_covers_about_half() {
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let spec = one_tube(Terrain::Plain, 0.5, 100 + seed);
            let scene = render_scene(&spec).unwrap();
            let inst = &scene.instances[0];
            ratios.push(inst.mask.area() as f64 / inst.tube_pixels.area() as f64);
        }
        // perspective makes the near end look bigger, so single scenes scatter
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((0.4..=0.6).contains(&mean), "{ratios:?}");
        assert!(ratios.iter().all(|r| (0.25..=0.75).contains(r)), "{ratios:?}");
    }

    #[test]
    fn dust_regions_are_nested() {
        let base = one_tube(Terrain::Plain, 0.0, 77);
        let mut prev: Option<Mask> = None;
        for f in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
            let mut spec = base.clone();
            spec.tubes[0].dust_coverage = f;
            let m = render_scene(&spec).unwrap().instances.remove(0).mask;
            if let Some(p) = &prev {
                assert!(m.pixels().all(|(x, y)| p.get(x as i64, y as i64)));
            }
            prev = Some(m);
        }
    }

    #[test]
    fn ground_truth_pixels_show_the_tube() {
        let spec = one_tube(Terrain::Flagstone, 0.3, 5);
        let scene = render_scene(&spec).unwrap();
        let world = build_world(&spec).unwrap();
        let r_wc = spec.camera_pose.rotation().unwrap().inverse();
        let cam = Point3::from(spec.camera_pose.position);
        let all: Vec<usize> = (0..world.rocks.len()).collect();
        let inst = &scene.instances[0];
        assert!(!inst.mask.is_empty());
        for (x, y) in inst.mask.pixels() {
            let d = r_wc * spec.camera.ray(x as f64, y as f64);
            let (_, _, surf) = world.nearest(&cam, &d, &all).unwrap();
            assert_eq!(surf, Surface::Tube(0, false));
        }
        // fully covered pixels carry tube intensities, never the dark ground
        let lo = (255.0 * TUBE_ALBEDO * AMBIENT).floor() as u8;
        for (x, y) in inst.mask.pixels() {
            let all_in = (-1..=1).all(|dy| (-1..=1).all(|dx| inst.mask.get(x as i64 + dx, y as i64 + dy)));
            if all_in {
                assert!(scene.clean.get_pixel(x, y)[0] >= lo);
            }
        }
    }

    #[test]
    fn overlapping_tubes_are_rejected() {
        let mut spec = one_tube(Terrain::Plain, 0.0, 1);
        let mut other = spec.tubes[0].clone();
        other.yaw_deg += 90.0;
        spec.tubes.push(other);
        assert!(matches!(render_scene(&spec), Err(Error::TubeCollision(0, 1))));
    }

    #[test]
    fn every_terrain_renders() {
        for terrain in [
            Terrain::Plain,
            Terrain::Flagstone,
            Terrain::CfaRocks { density: 0.06 },
            Terrain::Ditch,
            Terrain::Riverbed,
        ] {
            let spec = one_tube(terrain.clone(), 0.0, 3);
            let (img, gt) = synth_scene(&spec, "t.png").unwrap();
            assert_eq!(img.dimensions(), (320, 240));
            assert_eq!(gt.instances.len(), 1, "{terrain:?}");
        }
    }

    #[test]
    fn contact_rock_occludes_without_collision() {
        let mut spec = one_tube(Terrain::Plain, 0.0, 21);
        let free = render_scene(&spec).unwrap().instances.remove(0).mask.area();
        spec.tubes[0].occluder_contact = true;
        let hidden = render_scene(&spec).unwrap().instances.remove(0).mask.area();
        assert!(hidden <= free);
    }

    #[test]
    fn segment_distance_cases() {
        assert_eq!(segment_distance((0.0, 0.0), (1.0, 0.0), (0.5, -1.0), (0.5, 1.0)), 0.0);
        assert!((segment_distance((0.0, 0.0), (1.0, 0.0), (0.0, 2.0), (1.0, 2.0)) - 2.0).abs() < 1e-12);
        assert!((segment_distance((0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec = SceneSpec::from_toml(
            r#"
            terrain = { kind = "cfa_rocks", density = 0.06 }
            seed = 4
            camera_pose = { position = [0.0, -2.0, 1.2], look_at = [0.0, 0.0, 0.0] }
            [[tubes]]
            position = [0.0, 0.0]
            yaw_deg = 30.0
            dust_coverage = 0.25
            "#,
        )
        .unwrap();
        assert_eq!(spec.terrain, Terrain::CfaRocks { density: 0.06 });
        assert_eq!(spec.supersample, 3);
        spec.validate().unwrap();
    }
}
