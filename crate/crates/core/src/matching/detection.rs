use std::cmp::Ordering;

use nalgebra::{UnitQuaternion, Vector3};

use crate::mask::Mask;

/// Coarse 6D pose in the camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseEstimate {
    /// Camera-from-body rotation.
    pub rotation: UnitQuaternion<f64>,
    /// Body origin in the camera frame, meters.
    pub translation: Vector3<f64>,
    /// Tube long axis in the camera frame.
    pub axis_direction: Vector3<f64>,
}

impl PoseEstimate {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        PoseEstimate {
            rotation,
            translation,
            axis_direction: (rotation * Vector3::x()).normalize(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub image_id: String,
    /// Anchor location `c` in pixels.
    pub location: (i32, i32),
    pub score: f64,
    /// Index into the template library; absent for detectors without templates.
    pub template_id: Option<usize>,
    pub mask: Mask,
    pub pose: Option<PoseEstimate>,
}

impl Detection {
    /// Ranking order: score descending, then template id, then row-major
    /// location, then mask box and area so equal-score ties never depend on
    /// input order.
    pub fn rank_cmp(&self, other: &Detection) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| {
                self.template_id
                    .unwrap_or(usize::MAX)
                    .cmp(&other.template_id.unwrap_or(usize::MAX))
            })
            .then_with(|| (self.location.1, self.location.0).cmp(&(other.location.1, other.location.0)))
            .then_with(|| self.mask.bbox().cmp(&other.mask.bbox()))
            .then_with(|| self.mask.area().cmp(&other.mask.area()))
            .then_with(|| self.mask.pixels().cmp(other.mask.pixels()))
    }
}
