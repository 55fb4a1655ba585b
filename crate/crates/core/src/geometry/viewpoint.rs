//! Viewpoint sampling on a subdivided icosahedron.

use std::collections::HashMap;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A camera placed on the view sphere around the tube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewpoint {
    /// Camera-from-body rotation before the in-plane spin.
    pub rotation: UnitQuaternion<f64>,
    /// Camera-to-centroid range in meters.
    pub distance: f64,
    /// Rotation about the optical axis, degrees in `[0, 360)`.
    pub in_plane_deg: f64,
}

impl Viewpoint {
    /// Camera at `distance` along the unit body-frame `direction`, looking at
    /// the body origin with body +z as up.
    pub fn look_from(direction: &Vector3<f64>, distance: f64, in_plane_deg: f64) -> Self {
        Viewpoint {
            rotation: look_at_rotation(direction),
            distance,
            in_plane_deg: in_plane_deg.rem_euclid(360.0),
        }
    }

    /// Unit direction from the body origin toward the camera, body frame.
    pub fn direction(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * Vector3::z())
    }

    /// Full camera-from-body rotation including the in-plane spin.
    pub fn camera_from_body(&self) -> UnitQuaternion<f64> {
        in_plane_rotation(self.in_plane_deg) * self.rotation
    }

    /// Body origin in the camera frame.
    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, self.distance)
    }

    /// Tube long axis (body x) in the camera frame.
    pub fn axis_direction(&self) -> Vector3<f64> {
        self.camera_from_body() * Vector3::x()
    }
}

/// Rotation about the camera z axis. Positive angles turn image +x toward +y.
pub fn in_plane_rotation(deg: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), deg.to_radians())
}

fn look_at_rotation(direction: &Vector3<f64>) -> UnitQuaternion<f64> {
    let forward = -direction.normalize();
    let mut right = forward.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        right = forward.cross(&Vector3::y());
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Unit-sphere mesh from recursive icosahedron subdivision.
#[derive(Clone, Debug)]
pub struct Icosphere {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl Icosphere {
    pub fn new(level: u32) -> Self {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ];
        let mut vertices: Vec<Vector3<f64>> = raw
            .iter()
            .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
            .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Icosphere { vertices, faces }
    }

    /// Undirected mesh edges, each listed once with the smaller index first.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

pub fn elevation_deg(v: &Vector3<f64>) -> f64 {
    v.z.clamp(-1.0, 1.0).asin().to_degrees()
}

pub fn azimuth_deg(v: &Vector3<f64>) -> f64 {
    v.y.atan2(v.x).to_degrees()
}

/// Angle between a view direction and the tube axis, folded to `[0, 90]`.
pub fn axis_angle_deg(v: &Vector3<f64>) -> f64 {
    (v.x.abs() / v.norm()).clamp(0.0, 1.0).acos().to_degrees()
}

/// Icosphere vertices with elevation inside the band, ordered by
/// (elevation, azimuth).
pub fn band_directions(level: u32, elevation_band: (f64, f64)) -> Result<Vec<Vector3<f64>>> {
    if level > 5 {
        return Err(Error::invalid(format!("subdivision level {level} outside [0, 5]")));
    }
    let (lo, hi) = elevation_band;
    let mut dirs: Vec<Vector3<f64>> = Icosphere::new(level)
        .vertices
        .into_iter()
        .filter(|v| {
            let e = elevation_deg(v);
            e >= lo - 1e-9 && e <= hi + 1e-9
        })
        .collect();
    if dirs.is_empty() {
        return Err(Error::NoViewpoints);
    }
    dirs.sort_by(|a, b| {
        elevation_deg(a)
            .total_cmp(&elevation_deg(b))
            .then(azimuth_deg(a).total_cmp(&azimuth_deg(b)))
    });
    Ok(dirs)
}

/// Angles from `range.0` to `range.1` inclusive in steps of `step`. A range
/// spanning a full turn stops short of repeating its first angle.
pub fn in_plane_angles(range: (f64, f64), step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 360.0) {
        return Err(Error::invalid(format!("in-plane step {step} outside (0, 360]")));
    }
    let (lo, hi) = range;
    if !(lo <= hi && hi - lo < 360.0 + 1e-9) {
        return Err(Error::invalid(format!("in-plane range [{lo}, {hi}] is empty or exceeds a turn")));
    }
    let mut n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if (n - 1) as f64 * step >= 360.0 - 1e-9 {
        n -= 1;
    }
    Ok((0..n).map(|i| lo + i as f64 * step).collect())
}

pub fn distances(range: (f64, f64), step: f64) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo > 0.0) || lo > hi {
        return Err(Error::invalid(format!("distance range [{lo}, {hi}] is empty or non-positive")));
    }
    if !(step > 0.0) {
        return Err(Error::invalid(format!("distance step {step} must be positive")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Crosses band directions with in-plane angles and distances, ordered by
/// (elevation, azimuth, in-plane, distance).
pub fn sample_viewpoints(
    subdivision_level: u32,
    elevation_band: (f64, f64),
    in_plane: ((f64, f64), f64),
    distance_range: (f64, f64),
    distance_step: f64,
) -> Result<Vec<Viewpoint>> {
    let dirs = band_directions(subdivision_level, elevation_band)?;
    Ok(cross(&dirs, &in_plane_angles(in_plane.0, in_plane.1)?, &distances(distance_range, distance_step)?))
}

fn cross(dirs: &[Vector3<f64>], angles: &[f64], dists: &[f64]) -> Vec<Viewpoint> {
    let mut out = Vec::with_capacity(dirs.len() * angles.len() * dists.len());
    for d in dirs {
        for &a in angles {
            for &r in dists {
                out.push(Viewpoint::look_from(d, r, a));
            }
        }
    }
    out
}

/// Drops directions that duplicate another one under the tube's end-for-end
/// symmetry: viewing from `(x, y, z)` and `(-x, -y, z)` gives the same
/// image. The icosphere is closed under that map, so exactly one of each
/// pair is kept.
pub fn end_symmetric_half(dirs: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    dirs.iter()
        .copied()
        .filter(|v| v.x > 1e-12 || (v.x.abs() <= 1e-12 && v.y >= -1e-12))
        .collect()
}

/// `k` directions at evenly spaced positions of `dirs`.
pub fn thin_uniform(dirs: &[Vector3<f64>], k: usize) -> Vec<Vector3<f64>> {
    if k >= dirs.len() {
        return dirs.to_vec();
    }
    (0..k).map(|j| dirs[j * dirs.len() / k]).collect()
}

/// Viewpoint sampling configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewSampling {
    pub subdivision_level: u32,
    /// Degrees above the ground plane.
    pub elevation_band: (f64, f64),
    /// Camera roll about the optical axis, degrees, inclusive.
    pub in_plane_range: (f64, f64),
    pub in_plane_step: f64,
    pub distance_range: (f64, f64),
    pub distance_step: f64,
    /// Library size cap, reached by dropping evenly spaced directions; 0 keeps
    /// every sample.
    pub target_count: usize,
}

impl Default for ViewSampling {
    fn default() -> Self {
        ViewSampling {
            subdivision_level: 3,
            elevation_band: (15.0, 75.0),
            in_plane_range: (-10.0, 10.0),
            in_plane_step: 10.0,
            distance_range: (1.0, 3.0),
            distance_step: 0.1,
            target_count: 7000,
        }
    }
}

impl ViewSampling {
    pub fn viewpoints(&self) -> Result<Vec<Viewpoint>> {
        let dirs = end_symmetric_half(&band_directions(self.subdivision_level, self.elevation_band)?);
        let angles = in_plane_angles(self.in_plane_range, self.in_plane_step)?;
        let dists = distances(self.distance_range, self.distance_step)?;
        let per_dir = angles.len() * dists.len();
        let dirs = match self.target_count {
            target if target > 0 && dirs.len() * per_dir > target => {
                thin_uniform(&dirs, (target / per_dir).max(1))
            }
            _ => dirs,
        };
        if dirs.is_empty() {
            return Err(Error::NoViewpoints);
        }
        Ok(cross(&dirs, &angles, &dists))
    }
}
