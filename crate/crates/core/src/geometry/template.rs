//! Contour templates: quantized gradient orientations sampled along the
//! rendered silhouette border.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::raster::render_shaded;
use super::{CameraIntrinsics, TubeModel, ViewSampling, Viewpoint};
use crate::error::{Error, Result};
use crate::features::{gradients_interleaved, quantize_orientations, FeatureParams};
use crate::mask::{BBox, Mask};

/// One template feature: offset from the anchor and its orientation bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Feature {
    pub dx: i32,
    pub dy: i32,
    pub bin: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub features: Vec<Feature>,
    /// Projected tube centroid in the template image.
    pub anchor: (i32, i32),
    pub viewpoint: Viewpoint,
    /// Silhouette in template-image coordinates.
    pub silhouette: Mask,
}

impl Template {
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    /// Silhouette bounding box once the anchor is placed at `c`.
    pub fn silhouette_bbox_at(&self, c: (i32, i32)) -> Option<BBox> {
        self.silhouette
            .bbox()
            .map(|b| b.translated(c.0 - self.anchor.0, c.1 - self.anchor.1))
    }

    /// Silhouette moved so the anchor lands on `c`, clipped to the frame.
    pub fn mask_at(&self, c: (i32, i32), width: u32, height: u32) -> Mask {
        self.silhouette.translated(
            (c.0 - self.anchor.0) as i64,
            (c.1 - self.anchor.1) as i64,
            width,
            height,
        )
    }

    /// Inclusive extent of the feature offsets `(min_dx, min_dy, max_dx, max_dy)`.
    pub fn feature_extent(&self) -> (i32, i32, i32, i32) {
        self.features.iter().fold(
            (i32::MAX, i32::MAX, i32::MIN, i32::MIN),
            |(a, b, c, d), f| (a.min(f.dx), b.min(f.dy), c.max(f.dx), d.max(f.dy)),
        )
    }
}

/// Template construction limits plus the feature parameters they share with
/// the matcher.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateParams {
    pub max_features: usize,
    pub min_features: usize,
}

impl Default for TemplateParams {
    fn default() -> Self {
        TemplateParams {
            max_features: 63,
            min_features: 20,
        }
    }
}

/// Mask minus its 3x3 erosion, in row-major order. Pixels outside the image
/// count as background.
pub fn extract_contour(mask: &Mask) -> Result<Vec<(u32, u32)>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let eroded = |x: i64, y: i64| (-1..=1).all(|dy| (-1..=1).all(|dx| mask.get(x + dx, y + dy)));
    Ok(mask
        .pixels()
        .filter(|&(x, y)| !eroded(x as i64, y as i64))
        .collect())
}

/// Greedy farthest-point selection; starts from the point farthest from
/// `center`, ties resolved by input order.
fn farthest_point_order(points: &[(i32, i32)], center: (i32, i32), k: usize) -> Vec<usize> {
    let d2 = |a: (i32, i32), b: (i32, i32)| {
        let (dx, dy) = ((a.0 - b.0) as i64, (a.1 - b.1) as i64);
        dx * dx + dy * dy
    };
    let mut chosen = Vec::with_capacity(k.min(points.len()));
    let mut best_dist: Vec<i64> = points.iter().map(|&p| d2(p, center)).collect();
    let mut taken = vec![false; points.len()];
    for step in 0..k.min(points.len()) {
        let mut pick = None;
        for i in 0..points.len() {
            if taken[i] {
                continue;
            }
            if pick.is_none_or(|p: usize| best_dist[i] > best_dist[p]) {
                pick = Some(i);
            }
        }
        let p = pick.expect("points remain");
        taken[p] = true;
        chosen.push(p);
        if step == 0 {
            best_dist = points.iter().map(|&q| d2(q, points[p])).collect();
        } else {
            for (i, q) in points.iter().enumerate() {
                best_dist[i] = best_dist[i].min(d2(*q, points[p]));
            }
        }
    }
    chosen
}

/// Renders the tube from `vp`, quantizes the gradients of the shaded view and
/// keeps up to `max_features` well-spread contour pixels with an orientation.
pub fn build_template(
    model: &TubeModel,
    vp: &Viewpoint,
    k: &CameraIntrinsics,
    features: &FeatureParams,
    limits: &TemplateParams,
) -> Result<Template> {
    let view = render_shaded(model, vp, k, 3)?;
    let grad = gradients_interleaved(view.width, view.height, &view.pixels, 1)?;
    let quant = quantize_orientations(&grad, features.magnitude_threshold, features.n0)?;
    let anchor = (k.cx.round() as i32, k.cy.round() as i32);

    let mut strong = Vec::new();
    let mut bins = Vec::new();
    for (x, y) in extract_contour(&view.silhouette)? {
        let (lx, ly) = (x as i64 - view.x0, y as i64 - view.y0);
        if let Some(b) = quant.get(lx, ly) {
            strong.push((x as i32 - anchor.0, y as i32 - anchor.1));
            bins.push(b);
        }
    }
    if strong.len() < limits.min_features.max(1) {
        return Err(Error::DegenerateTemplate {
            found: strong.len(),
            required: limits.min_features,
        });
    }
    let order = farthest_point_order(&strong, (0, 0), limits.max_features);
    Ok(Template {
        features: order
            .into_iter()
            .map(|i| Feature {
                dx: strong[i].0,
                dy: strong[i].1,
                bin: bins[i],
            })
            .collect(),
        anchor,
        viewpoint: *vp,
        silhouette: view.silhouette,
    })
}

/// Templates for every sampled viewpoint; viewpoints whose render clips or
/// degenerates are skipped and counted.
pub fn build_library(
    model: &TubeModel,
    sampling: &ViewSampling,
    k: &CameraIntrinsics,
    features: &FeatureParams,
    limits: &TemplateParams,
) -> Result<(Vec<Template>, usize)> {
    model.validate()?;
    k.validate()?;
    let viewpoints = sampling.viewpoints()?;
    let built: Vec<Option<Template>> = viewpoints
        .par_iter()
        .map(|vp| build_template(model, vp, k, features, limits).ok())
        .collect();
    let skipped = built.iter().filter(|t| t.is_none()).count();
    Ok((built.into_iter().flatten().collect(), skipped))
}
