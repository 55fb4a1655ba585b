use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Capped cylinder with its long axis along body x and origin at the centroid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TubeModel {
    /// Meters.
    pub length: f64,
    /// Meters.
    pub radius: f64,
    /// Facets around the circumference of the generated mesh.
    pub segments: usize,
}

impl Default for TubeModel {
    fn default() -> Self {
        TubeModel {
            length: 0.15,
            radius: 0.015,
            segments: 32,
        }
    }
}

/// Indexed triangle list.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// Closest ray hit against the analytic tube surface, in body coordinates.
#[derive(Clone, Copy, Debug)]
pub struct TubeHit {
    pub t: f64,
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl TubeModel {
    pub fn new(length: f64, radius: f64) -> Result<Self> {
        let m = TubeModel {
            length,
            radius,
            ..Default::default()
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.radius > 0.0) {
            return Err(Error::invalid("tube length and radius must be positive"));
        }
        if self.segments < 3 {
            return Err(Error::invalid("tube mesh needs at least 3 segments"));
        }
        Ok(())
    }

    /// Watertight mesh: two rings of side vertices plus one center vertex per cap.
    pub fn mesh(&self) -> Mesh {
        let n = self.segments;
        let h = self.length / 2.0;
        let mut vertices = Vec::with_capacity(2 * n + 2);
        for &x in &[-h, h] {
            for i in 0..n {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                vertices.push(Point3::new(x, self.radius * a.cos(), self.radius * a.sin()));
            }
        }
        let cap0 = vertices.len();
        vertices.push(Point3::new(-h, 0.0, 0.0));
        let cap1 = vertices.len();
        vertices.push(Point3::new(h, 0.0, 0.0));

        let mut triangles = Vec::with_capacity(4 * n);
        for i in 0..n {
            let j = (i + 1) % n;
            let (a0, b0, a1, b1) = (i, j, n + i, n + j);
            triangles.push([a0, b1, a1]);
            triangles.push([a0, b0, b1]);
            triangles.push([cap0, b0, a0]);
            triangles.push([cap1, a1, b1]);
        }
        Mesh {
            vertices,
            triangles,
        }
    }

    /// Intersects a body-frame ray with the exact capped cylinder.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<TubeHit> {
        let h = self.length / 2.0;
        let r2 = self.radius * self.radius;
        let mut best: Option<TubeHit> = None;
        let mut consider = |t: f64, point: Point3<f64>, normal: Vector3<f64>| {
            if t > 1e-9 && best.is_none_or(|b| t < b.t) {
                best = Some(TubeHit { t, point, normal });
            }
        };

        let a = dir.y * dir.y + dir.z * dir.z;
        if a > 1e-15 {
            let b = 2.0 * (origin.y * dir.y + origin.z * dir.z);
            let c = origin.y * origin.y + origin.z * origin.z - r2;
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                for t in [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)] {
                    let p = origin + dir * t;
                    if p.x.abs() <= h {
                        consider(t, p, Vector3::new(0.0, p.y, p.z).normalize());
                    }
                }
            }
        }
        if dir.x.abs() > 1e-15 {
            for (cap_x, nx) in [(-h, -1.0), (h, 1.0)] {
                let t = (cap_x - origin.x) / dir.x;
                let p = origin + dir * t;
                if p.y * p.y + p.z * p.z <= r2 {
                    consider(t, p, Vector3::new(nx, 0.0, 0.0));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn mesh_is_closed_and_centered() {
        let m = TubeModel::default().mesh();
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                // directed edges of a closed, consistently oriented surface pair up
                *edges.entry((a, b)).or_default() += 1;
                *edges.entry((b, a)).or_default() -= 1;
            }
        }
        assert!(edges.values().all(|&v| v == 0));
        let undirected = m.triangles.len() * 3 / 2;
        assert_eq!(edges.len(), undirected * 2);
        let c: Vector3<f64> = m.vertices.iter().map(|p| p.coords).sum::<Vector3<f64>>() / m.vertices.len() as f64;
        assert!(c.norm() < 1e-12);
    }

    #[test]
    fn mesh_triangles_face_outward() {
        let m = TubeModel::default().mesh();
        for t in &m.triangles {
            let (a, b, c) = (m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
            let n = (b - a).cross(&(c - a));
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            assert!(n.dot(&centroid) > 0.0);
        }
    }

    #[test]
    fn analytic_intersection() {
        let tube = TubeModel::default();
        let hit = tube
            .intersect(&Point3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert!((hit.t - (1.0 - tube.radius)).abs() < 1e-12);
        assert!((hit.normal - Vector3::z()).norm() < 1e-12);
        let cap = tube
            .intersect(&Point3::new(1.0, 0.0, 0.0), &Vector3::new(-1.0, 0.0, 0.0))
            .unwrap();
        assert!((cap.t - (1.0 - tube.length / 2.0)).abs() < 1e-12);
        assert!(tube
            .intersect(&Point3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 1.0, 0.0))
            .is_none());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(TubeModel::new(0.0, 0.01).is_err());
        assert!(TubeModel::new(0.1, -0.01).is_err());
    }
}
