use std::collections::BTreeMap;

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::LinearMemories;
use super::nms::{greedy_suppress, nms_with, Overlap};
use super::pose::pose_at;
use super::similarity::{normalize, similarity, similarity_sum};
use super::Detection;
use crate::error::{Error, Result};
use crate::features::{
    build_response_maps, compute_gradients, quantize_orientations, spread_orientations, FeatureParams,
    QuantizedOrientationImage, ResponseMaps,
};
use crate::geometry::{CameraIntrinsics, Template};
use crate::library::TemplateLibrary;
use crate::mask::BBox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    pub score_threshold: f64,
    /// Anchor spacing in pixels; must not exceed the spreading radius.
    pub stride: u32,
    pub nms_iou: f64,
    /// A detection whose box lies at least this much inside a stronger one
    /// is dropped too; above 1 disables the test.
    pub nms_containment: f64,
    pub max_detections: usize,
    /// Convert color input to luma before computing gradients.
    pub grayscale: bool,
    /// Re-rank each surviving detection's suppressed neighbours with a
    /// tighter spreading radius to pick the location and template.
    pub refine: bool,
    pub refine_spread: u32,
    /// Neighbours within this score margin of the winner are re-ranked.
    pub refine_margin: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            score_threshold: 0.80,
            stride: 2,
            nms_iou: 0.3,
            nms_containment: 0.2,
            max_detections: 100,
            grayscale: true,
            refine: true,
            refine_spread: 1,
            refine_margin: 0.05,
        }
    }
}

/// An above-threshold (template, anchor) pair before suppression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub template_id: usize,
    pub location: (i32, i32),
    pub score: f64,
}

impl Candidate {
    fn rank_cmp(&self, other: &Candidate) -> std::cmp::Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.template_id.cmp(&other.template_id))
            .then((self.location.1, self.location.0).cmp(&(other.location.1, other.location.0)))
    }
}

/// Feature maps of one input image, shared by every template.
pub struct PreparedImage {
    pub width: u32,
    pub height: u32,
    pub quantized: QuantizedOrientationImage,
    pub response: ResponseMaps,
    fine: Option<ResponseMaps>,
    linear: LinearMemories,
}

pub struct Matcher<'a> {
    templates: &'a [Template],
    features: FeatureParams,
    params: MatchParams,
    camera: CameraIntrinsics,
}

impl<'a> Matcher<'a> {
    pub fn new(
        templates: &'a [Template],
        features: FeatureParams,
        params: MatchParams,
        camera: CameraIntrinsics,
    ) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if params.stride == 0 || params.stride > features.spread.max(1) {
            return Err(Error::invalid(format!(
                "stride {} must lie in [1, {}]",
                params.stride,
                features.spread.max(1)
            )));
        }
        if !(params.nms_iou > 0.0 && params.nms_iou <= 1.0) || !(params.nms_containment > 0.0) {
            return Err(Error::invalid("nms thresholds must be positive and IoU at most 1"));
        }
        if templates.iter().any(|t| t.feature_count() > 256) {
            return Err(Error::invalid("templates may carry at most 256 features"));
        }
        Ok(Matcher {
            templates,
            features,
            params,
            camera,
        })
    }

    pub fn from_library(library: &'a TemplateLibrary, params: MatchParams) -> Result<Self> {
        Self::new(&library.templates, library.features.clone(), params, library.intrinsics)
    }

    pub fn templates(&self) -> &[Template] {
        self.templates
    }

    pub fn params(&self) -> &MatchParams {
        &self.params
    }

    pub fn prepare(&self, image: &DynamicImage) -> Result<PreparedImage> {
        let image = if self.params.grayscale {
            DynamicImage::ImageLuma8(image.to_luma8())
        } else {
            image.clone()
        };
        let grad = compute_gradients(&image)?;
        let quantized = quantize_orientations(&grad, self.features.magnitude_threshold, self.features.n0)?;
        self.prepare_quantized(quantized)
    }

    pub fn prepare_quantized(&self, quantized: QuantizedOrientationImage) -> Result<PreparedImage> {
        let response = build_response_maps(&spread_orientations(&quantized, self.features.spread)?)?;
        let fine = if self.params.refine {
            Some(build_response_maps(&spread_orientations(
                &quantized,
                self.params.refine_spread.min(self.features.spread),
            )?)?)
        } else {
            None
        };
        let linear = LinearMemories::new(&response, self.params.stride);
        Ok(PreparedImage {
            width: quantized.width,
            height: quantized.height,
            quantized,
            response,
            fine,
            linear,
        })
    }

    /// Every template at every stride-spaced anchor scoring at least the
    /// threshold, in ranking order.
    pub fn candidates(&self, img: &PreparedImage) -> Vec<Candidate> {
        let s = self.params.stride as i32;
        let gw = img.linear.grid_cols();
        let thr = self.params.score_threshold;
        let mut out: Vec<Candidate> = self
            .templates
            .par_iter()
            .enumerate()
            .map_init(Vec::new, |acc, (id, t)| {
                let n = t.feature_count();
                let min_sum = min_passing_sum(thr, n);
                let mut found = Vec::new();
                if min_sum > 255 * n as u32 {
                    return found;
                }
                img.linear.accumulate(t, acc);
                for (cell, &sum) in acc.iter().enumerate() {
                    if sum as u32 >= min_sum {
                        found.push(Candidate {
                            template_id: id,
                            location: ((cell % gw) as i32 * s, (cell / gw) as i32 * s),
                            score: normalize(sum as u32, n),
                        });
                    }
                }
                found
            })
            .flatten()
            .collect();
        out.sort_by(|a, b| a.rank_cmp(b));
        out
    }

    fn overlap(&self) -> Overlap {
        Overlap {
            iou: self.params.nms_iou,
            containment: self.params.nms_containment,
        }
    }

    pub fn detect(&self, image: &DynamicImage, image_id: &str) -> Result<Vec<Detection>> {
        let prepared = self.prepare(image)?;
        Ok(self.detect_prepared(&prepared, image_id))
    }

    /// Candidates, suppression, optional refinement, pose readout, capped at
    /// `max_detections`.
    pub fn detect_prepared(&self, img: &PreparedImage, image_id: &str) -> Vec<Detection> {
        let cands = self.candidates(img);
        let boxes: Vec<Option<BBox>> = cands
            .iter()
            .map(|c| self.templates[c.template_id].silhouette_bbox_at(c.location))
            .collect();
        let (kept, owner) = greedy_suppress(&boxes, self.overlap());

        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        if self.params.refine {
            for (i, &o) in owner.iter().enumerate() {
                if cands[i].score >= cands[o].score - self.params.refine_margin {
                    groups.entry(o).or_default().push(i);
                }
            }
        }

        let chosen: Vec<Candidate> = kept
            .iter()
            .take(self.params.max_detections)
            .map(|&k| match (&img.fine, groups.get(&k)) {
                (Some(fine), Some(members)) => self.refine(img, fine, &cands, members).unwrap_or(cands[k]),
                _ => cands[k],
            })
            .collect();

        let dets: Vec<Detection> = chosen
            .into_iter()
            .map(|c| {
                let t = &self.templates[c.template_id];
                Detection {
                    image_id: image_id.to_string(),
                    location: c.location,
                    score: c.score,
                    template_id: Some(c.template_id),
                    mask: t.mask_at(c.location, img.width, img.height),
                    pose: Some(pose_at(t, c.location, &self.camera)),
                }
            })
            .collect();
        let mut dets = nms_with(dets, self.overlap());
        dets.truncate(self.params.max_detections);
        dets
    }

    /// Re-scores a suppression group with the tight spreading radius over a
    /// `±T` window around each member and returns the best template at the
    /// centre of its tied-best positions. `None` if the result would fall
    /// below the detection threshold.
    fn refine(
        &self,
        img: &PreparedImage,
        fine: &ResponseMaps,
        cands: &[Candidate],
        members: &[usize],
    ) -> Option<Candidate> {
        let r = self.features.spread as i32;
        // template -> (fine score, best coarse score among its members, positions)
        let mut per_template: BTreeMap<usize, (u32, f64, Vec<(i32, i32)>)> = BTreeMap::new();
        for &m in members {
            let c = cands[m];
            let t = &self.templates[c.template_id];
            let entry = per_template.entry(c.template_id).or_insert((0, c.score, Vec::new()));
            entry.1 = entry.1.max(c.score);
            for dy in -r..=r {
                for dx in -r..=r {
                    let p = (c.location.0 + dx, c.location.1 + dy);
                    let sum = similarity_sum(t, fine, p);
                    if sum > entry.0 {
                        entry.0 = sum;
                        entry.2.clear();
                    }
                    if sum == entry.0 && !entry.2.contains(&p) {
                        entry.2.push(p);
                    }
                }
            }
        }
        let (&id, (_, _, positions)) = per_template.iter().max_by(|a, b| {
            let fa = normalize(a.1 .0, self.templates[*a.0].feature_count());
            let fb = normalize(b.1 .0, self.templates[*b.0].feature_count());
            fa.total_cmp(&fb)
                .then(a.1 .1.total_cmp(&b.1 .1))
                .then(b.0.cmp(a.0))
        })?;
        let n = positions.len() as f64;
        let mx = positions.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let my = positions.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let centre = ((mx + 0.5).floor() as i32, (my + 0.5).floor() as i32);
        let location = *positions
            .iter()
            .min_by_key(|p| {
                let (dx, dy) = ((p.0 - centre.0) as i64, (p.1 - centre.1) as i64);
                (dx * dx + dy * dy, p.1, p.0)
            })
            .expect("window is non-empty");
        let score = similarity(&self.templates[id], &img.response, location);
        (score >= self.params.score_threshold).then_some(Candidate {
            template_id: id,
            location,
            score,
        })
    }
}

/// Smallest integer sum whose normalized score reaches `threshold`.
fn min_passing_sum(threshold: f64, feature_count: usize) -> u32 {
    let top = 255 * feature_count as u32;
    let mut s = (threshold * top as f64).floor().max(0.0) as u32;
    while s > 0 && normalize(s - 1, feature_count) >= threshold {
        s -= 1;
    }
    while s <= top && normalize(s, feature_count) < threshold {
        s += 1;
    }
    s
}

/// Full detection pipeline with default matching parameters apart from the
/// score threshold and stride.
pub fn match_templates(
    library: &TemplateLibrary,
    image: &DynamicImage,
    image_id: &str,
    score_threshold: f64,
    stride: u32,
) -> Result<Vec<Detection>> {
    let params = MatchParams {
        score_threshold,
        stride,
        ..MatchParams::default()
    };
    Matcher::from_library(library, params)?.detect(image, image_id)
}
