//! Detection interchange files shared by every detector and the evaluator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotations::{PoseRecord, SCHEMA_VERSION};
use super::rle::{self, Rle};
use crate::error::{Error, Result};
use crate::eval::GroundTruthSet;
use crate::matching::Detection;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionHeader {
    pub detector: String,
    #[serde(default)]
    pub config_digest: String,
    #[serde(default)]
    pub library_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<usize>,
    /// Anchor `[x, y]`; defaults to the mask's bounding-box center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<[i32; 2]>,
    pub segmentation: Rle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    pub schema_version: String,
    pub header: DetectionHeader,
    pub records: Vec<DetectionRecord>,
}

impl DetectionFile {
    pub fn new(header: DetectionHeader, dets: &[Detection]) -> Self {
        DetectionFile {
            schema_version: SCHEMA_VERSION.into(),
            header,
            records: dets
                .iter()
                .map(|d| DetectionRecord {
                    image_id: d.image_id.clone(),
                    score: d.score,
                    template_id: d.template_id,
                    location: Some([d.location.0, d.location.1]),
                    segmentation: rle::encode(&d.mask),
                    pose: d.pose.as_ref().map(PoseRecord::from_pose),
                })
                .collect(),
        }
    }

    pub fn detections(&self) -> Result<Vec<Detection>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::UnsupportedSchemaVersion(self.schema_version.clone()));
        }
        self.records
            .iter()
            .map(|r| {
                if !(0.0..=1.0).contains(&r.score) {
                    return Err(Error::invalid(format!("score {} outside [0, 1]", r.score)));
                }
                let mask = rle::decode(&r.segmentation)?;
                let location = match r.location {
                    Some([x, y]) => (x, y),
                    None => mask
                        .bbox()
                        .map_or((0, 0), |b| (b.x + b.w as i32 / 2, b.y + b.h as i32 / 2)),
                };
                Ok(Detection {
                    image_id: r.image_id.clone(),
                    location,
                    score: r.score,
                    template_id: r.template_id,
                    mask,
                    pose: r.pose.as_ref().map(PoseRecord::to_pose).transpose()?,
                })
            })
            .collect()
    }

    /// Every record must name an image of `gt` and match its size.
    pub fn validate_against(&self, gt: &GroundTruthSet) -> Result<()> {
        for r in &self.records {
            let im = gt.image(&r.image_id)?;
            if r.segmentation.size != [im.height, im.width] {
                return Err(Error::DimensionMismatch {
                    a: (r.segmentation.size[1], r.segmentation.size[0]),
                    b: (im.width, im.height),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn write_detections(path: &Path, header: DetectionHeader, dets: &[Detection]) -> Result<()> {
    let body = DetectionFile::new(header, dets).to_json()?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn load_detection_file(path: &Path) -> Result<DetectionFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DetectionFile::from_json(&text)
}

pub fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    load_detection_file(path)?.detections()
}
