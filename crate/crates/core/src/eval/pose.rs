use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::assign::IouTable;
use super::GroundTruthSet;
use crate::error::Result;
use crate::matching::Detection;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub image_id: String,
    /// Index into the detections as evaluated.
    pub detection: usize,
    pub gt: usize,
    pub iou: f64,
    /// `|t_est - t_gt|` in meters.
    pub translation_error: f64,
    /// Ground-truth camera-to-tube range `|t_gt|` in meters.
    pub range: f64,
    /// Angle between estimated and true long axes, `[0, 180]` degrees.
    pub axis_error: f64,
    /// `min(axis_error, 180 - axis_error)`; the tube is symmetric end to end.
    pub flip_aware_axis_error: f64,
}

/// Angle between two directions in degrees.
pub fn axis_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Pose errors for detections matched at IoU 0.5 whose IoU is strictly above
/// 0.5 and where both sides carry a pose. Ordered like the ranked labels.
pub fn pose_errors(dets: &[Detection], gt: &GroundTruthSet) -> Result<Vec<PoseError>> {
    let table = IouTable::new(dets, gt)?;
    Ok(pose_errors_from(&table, dets, gt))
}

pub(crate) fn pose_errors_from(table: &IouTable, dets: &[Detection], gt: &GroundTruthSet) -> Vec<PoseError> {
    table
        .labels(dets, 0.5)
        .into_iter()
        .filter(|l| l.tp && l.iou > 0.5)
        .filter_map(|l| {
            let g = l.gt?;
            let truth = gt.instances[g].pose?;
            let est = dets[l.detection].pose?;
            let axis_error = axis_angle_deg(&est.axis_direction, &truth.axis_direction);
            Some(PoseError {
                image_id: dets[l.detection].image_id.clone(),
                detection: l.detection,
                gt: g,
                iou: l.iou,
                translation_error: (est.translation - truth.translation).norm(),
                range: truth.translation.norm(),
                axis_error,
                flip_aware_axis_error: axis_error.min(180.0 - axis_error),
            })
        })
        .collect()
}
