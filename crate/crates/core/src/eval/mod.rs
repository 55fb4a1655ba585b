//! Instance-detection metrics in the COCO style (101-point interpolated AP,
//! AR over IoU 0.50:0.05:0.95, PR curves) and pose-error statistics.

mod assign;
mod metrics;
mod pose;
mod report;

pub use assign::{match_detections, MatchLabel};
pub use metrics::{
    average_precision, average_recall, interpolated_precision, pr_curve, recall_points, IOU_THRESHOLDS, MAX_DETECTIONS,
};
pub use pose::{axis_angle_deg, pose_errors, PoseError};
pub use report::{evaluate, EvalReport, PrCurve};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::matching::PoseEstimate;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GtImage {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtInstance {
    pub image_id: String,
    pub mask: Mask,
    pub pose: Option<PoseEstimate>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruthSet {
    pub images: Vec<GtImage>,
    pub instances: Vec<GtInstance>,
}

impl GroundTruthSet {
    /// Checks unique image ids, that every instance resolves to an image
    /// and that its mask has the image's size.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for im in &self.images {
            if !seen.insert(im.id.as_str()) {
                return Err(Error::DuplicateId(im.id.clone()));
            }
        }
        for inst in &self.instances {
            let im = self.image(&inst.image_id)?;
            if inst.mask.dims() != (im.width, im.height) {
                return Err(Error::DimensionMismatch {
                    a: inst.mask.dims(),
                    b: (im.width, im.height),
                });
            }
        }
        Ok(())
    }

    pub fn image(&self, id: &str) -> Result<&GtImage> {
        self.images
            .iter()
            .find(|im| im.id == id)
            .ok_or_else(|| Error::DanglingImageId(id.to_string()))
    }

    pub fn instances_of<'a>(&'a self, image_id: &'a str) -> impl Iterator<Item = (usize, &'a GtInstance)> + 'a {
        self.instances
            .iter()
            .enumerate()
            .filter(move |(_, g)| g.image_id == image_id)
    }

    /// Merges another set, e.g. a per-scene fragment, into this one.
    pub fn extend(&mut self, other: GroundTruthSet) {
        self.images.extend(other.images);
        self.instances.extend(other.instances);
    }
}

/// `|a ∧ b| / |a ∨ b|`, 0 when both are empty.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.iou(b)
}
