//! COCO-compatible annotation files.
//!
//! Standard COCO fields plus `info.schema_version` and a per-annotation
//! `tube_pose` extension that ordinary COCO readers ignore. Images are
//! identified by file name in the in-memory ground truth.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rle::{self, Rle};
use crate::error::{Error, Result};
use crate::eval::{GroundTruthSet, GtImage, GtInstance};
use crate::mask::Mask;
use crate::matching::PoseEstimate;

pub const SCHEMA_VERSION: &str = "1";
pub const TUBE_CATEGORY: &str = "tube";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Info {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

/// Pose extension: camera-from-body rotation and the body origin in the
/// camera frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation_wxyz: [f64; 4],
    pub translation: [f64; 3],
    pub units: String,
}

impl PoseRecord {
    pub fn from_pose(p: &PoseEstimate) -> Self {
        let q = p.rotation.quaternion();
        PoseRecord {
            rotation_wxyz: [q.w, q.i, q.j, q.k],
            translation: [p.translation.x, p.translation.y, p.translation.z],
            units: "m".into(),
        }
    }

    pub fn to_pose(&self) -> Result<PoseEstimate> {
        let scale = match self.units.as_str() {
            "m" => 1.0,
            "cm" => 0.01,
            "mm" => 0.001,
            u => return Err(Error::invalid(format!("unknown pose units {u:?}"))),
        };
        let [w, i, j, k] = self.rotation_wxyz;
        let q = Quaternion::new(w, i, j, k);
        let norm = q.norm();
        if !(norm.is_finite() && (norm - 1.0).abs() < 1e-6) {
            return Err(Error::invalid(format!("pose quaternion norm {norm} is not 1")));
        }
        // stored quaternions are already unit; keep them bit-exact
        let rotation = UnitQuaternion::new_unchecked(q);
        let [x, y, z] = self.translation;
        Ok(PoseEstimate::new(rotation, Vector3::new(x, y, z) * scale))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// RLE object `{size, counts}` or a list of polygons.
    pub segmentation: Value,
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub bbox: [f64; 4],
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube_pose: Option<PoseRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<Info>,
    pub images: Vec<ImageEntry>,
    pub annotations: Vec<AnnotationEntry>,
    pub categories: Vec<Category>,
}

/// Decodes a COCO segmentation value for a `width x height` image.
pub fn decode_segmentation(seg: &Value, width: u32, height: u32) -> Result<Mask> {
    match seg {
        Value::Object(_) => {
            let r: Rle = serde_json::from_value(seg.clone())
                .map_err(|e| Error::MalformedSegmentation(format!("RLE object: {e}")))?;
            if r.size != [height, width] {
                return Err(Error::DimensionMismatch {
                    a: (r.size[1], r.size[0]),
                    b: (width, height),
                });
            }
            rle::decode(&r)
        }
        Value::Array(polys) => {
            let mut rings = Vec::with_capacity(polys.len());
            for p in polys {
                let coords: Vec<f64> = serde_json::from_value(p.clone())
                    .map_err(|e| Error::MalformedSegmentation(format!("polygon: {e}")))?;
                if coords.len() < 6 || coords.len() % 2 != 0 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(Error::MalformedSegmentation(format!(
                        "polygon needs an even number (>= 6) of finite coordinates, got {}",
                        coords.len()
                    )));
                }
                rings.push(coords.chunks(2).map(|c| (c[0], c[1])).collect::<Vec<_>>());
            }
            Ok(rasterize_polygons(&rings, width, height))
        }
        _ => Err(Error::MalformedSegmentation("expected an RLE object or polygon list".into())),
    }
}

/// Union of polygon rings, each filled even-odd at pixel centers.
pub fn rasterize_polygons(rings: &[Vec<(f64, f64)>], width: u32, height: u32) -> Mask {
    let mut dense = vec![false; width as usize * height as usize];
    for ring in rings {
        for y in 0..height {
            let yc = y as f64;
            let mut xs = Vec::new();
            for i in 0..ring.len() {
                let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                if (a.1 <= yc) != (b.1 <= yc) {
                    xs.push(a.0 + (yc - a.1) * (b.0 - a.0) / (b.1 - a.1));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks(2) {
                if let [l, r] = *pair {
                    let x0 = l.ceil().max(0.0) as i64;
                    let x1 = r.floor().min(width as f64 - 1.0) as i64;
                    for x in x0..=x1 {
                        dense[y as usize * width as usize + x as usize] = true;
                    }
                }
            }
        }
    }
    Mask::from_dense(width, height, &dense)
}

fn bbox_of(mask: &Mask) -> [f64; 4] {
    mask.bbox()
        .map_or([0.0; 4], |b| [b.x as f64, b.y as f64, b.w as f64, b.h as f64])
}

impl AnnotationFile {
    /// Builds a file from ground truth; image and annotation ids count up
    /// from 1 in input order. Masks are written as RLE.
    pub fn from_ground_truth(gt: &GroundTruthSet) -> Result<Self> {
        gt.validate()?;
        let ids: HashMap<&str, u64> = gt
            .images
            .iter()
            .enumerate()
            .map(|(i, im)| (im.id.as_str(), i as u64 + 1))
            .collect();
        Ok(AnnotationFile {
            info: Some(Info {
                schema_version: SCHEMA_VERSION.into(),
                description: None,
            }),
            images: gt
                .images
                .iter()
                .enumerate()
                .map(|(i, im)| ImageEntry {
                    id: i as u64 + 1,
                    file_name: im.id.clone(),
                    width: im.width,
                    height: im.height,
                })
                .collect(),
            annotations: gt
                .instances
                .iter()
                .enumerate()
                .map(|(i, inst)| AnnotationEntry {
                    id: i as u64 + 1,
                    image_id: ids[inst.image_id.as_str()],
                    category_id: 1,
                    segmentation: serde_json::to_value(rle::encode(&inst.mask)).expect("RLE serializes"),
                    area: inst.mask.area() as f64,
                    bbox: bbox_of(&inst.mask),
                    iscrowd: 0,
                    tube_pose: inst.pose.as_ref().map(PoseRecord::from_pose),
                })
                .collect(),
            categories: vec![Category {
                id: 1,
                name: TUBE_CATEGORY.into(),
                supercategory: Some("sample".into()),
            }],
        })
    }

    /// Validates ids and decodes every segmentation. Files without
    /// `info.schema_version` are read as version 1, which keeps plain COCO
    /// exports loadable.
    pub fn to_ground_truth(&self) -> Result<GroundTruthSet> {
        if let Some(info) = &self.info {
            if info.schema_version != SCHEMA_VERSION {
                return Err(Error::UnsupportedSchemaVersion(info.schema_version.clone()));
            }
        }
        let mut images = HashMap::new();
        let mut names = HashSet::new();
        for im in &self.images {
            if images.insert(im.id, im).is_some() {
                return Err(Error::DuplicateId(format!("image id {}", im.id)));
            }
            if !names.insert(im.file_name.as_str()) {
                return Err(Error::DuplicateId(format!("image file_name {}", im.file_name)));
            }
        }
        let mut cats = HashSet::new();
        for c in &self.categories {
            if !cats.insert(c.id) {
                return Err(Error::DuplicateId(format!("category id {}", c.id)));
            }
        }
        let mut seen = HashSet::new();
        let mut instances = Vec::with_capacity(self.annotations.len());
        for a in &self.annotations {
            if !seen.insert(a.id) {
                return Err(Error::DuplicateId(format!("annotation id {}", a.id)));
            }
            let im = images
                .get(&a.image_id)
                .ok_or_else(|| Error::DanglingImageId(a.image_id.to_string()))?;
            if !cats.contains(&a.category_id) {
                return Err(Error::invalid(format!(
                    "annotation {} references unknown category {}",
                    a.id, a.category_id
                )));
            }
            instances.push(GtInstance {
                image_id: im.file_name.clone(),
                mask: decode_segmentation(&a.segmentation, im.width, im.height)?,
                pose: a.tube_pose.as_ref().map(PoseRecord::to_pose).transpose()?,
            });
        }
        Ok(GroundTruthSet {
            images: self
                .images
                .iter()
                .map(|im| GtImage {
                    id: im.file_name.clone(),
                    width: im.width,
                    height: im.height,
                })
                .collect(),
            instances,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn load_annotations(path: &Path) -> Result<GroundTruthSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AnnotationFile::from_json(&text)?.to_ground_truth()
}

pub fn write_annotations(path: &Path, gt: &GroundTruthSet) -> Result<()> {
    let body = AnnotationFile::from_ground_truth(gt)?.to_json()?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}
