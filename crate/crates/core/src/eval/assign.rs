use std::collections::HashMap;

use super::metrics::MAX_DETECTIONS;
use super::GroundTruthSet;
use crate::error::{Error, Result};
use crate::matching::Detection;

/// Outcome for one ranked detection at one IoU threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchLabel {
    /// Index into the detection slice that was evaluated.
    pub detection: usize,
    pub score: f64,
    pub tp: bool,
    /// Matched ground-truth instance index, when a true positive.
    pub gt: Option<usize>,
    pub iou: f64,
}

/// Pairwise IoUs for the detections considered in each image.
pub(crate) struct IouTable {
    /// Per image, in `gt.images` order: ranked detection indices, GT indices
    /// and the `dets x gts` IoU matrix.
    images: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)>,
    pub(crate) n_gt: usize,
}

impl IouTable {
    pub(crate) fn new(dets: &[Detection], gt: &GroundTruthSet) -> Result<Self> {
        let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, d) in dets.iter().enumerate() {
            gt.image(&d.image_id)?;
            by_image.entry(d.image_id.as_str()).or_default().push(i);
        }
        let mut images = Vec::with_capacity(gt.images.len());
        for im in &gt.images {
            let mut ranked = by_image.remove(im.id.as_str()).unwrap_or_default();
            ranked.sort_by(|&a, &b| dets[a].rank_cmp(&dets[b]));
            ranked.truncate(MAX_DETECTIONS);
            let gts: Vec<usize> = gt.instances_of(&im.id).map(|(i, _)| i).collect();
            let mut ious = Vec::with_capacity(ranked.len() * gts.len());
            for &d in &ranked {
                for &g in &gts {
                    let iou = dets[d].mask.iou(&gt.instances[g].mask)?;
                    ious.push(iou);
                }
            }
            images.push((ranked, gts, ious));
        }
        if !by_image.is_empty() {
            let mut left: Vec<&str> = by_image.into_keys().collect();
            left.sort();
            return Err(Error::DanglingImageId(left[0].to_string()));
        }
        Ok(IouTable {
            images,
            n_gt: gt.instances.len(),
        })
    }

    /// Greedy matching at `threshold`, labels pooled across images and
    /// stably sorted by descending score (ties keep image order, then
    /// per-image rank).
    pub(crate) fn labels(&self, dets: &[Detection], threshold: f64) -> Vec<MatchLabel> {
        let mut out = Vec::new();
        for (ranked, gts, ious) in &self.images {
            let mut taken = vec![false; gts.len()];
            for (r, &d) in ranked.iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (j, &used) in taken.iter().enumerate() {
                    let iou = ious[r * gts.len() + j];
                    if !used && iou >= threshold && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((j, iou));
                    }
                }
                if let Some((j, _)) = best {
                    taken[j] = true;
                }
                out.push(MatchLabel {
                    detection: d,
                    score: dets[d].score,
                    tp: best.is_some(),
                    gt: best.map(|(j, _)| gts[j]),
                    iou: best.map_or_else(
                        || (0..gts.len()).map(|j| ious[r * gts.len() + j]).fold(0.0, f64::max),
                        |(_, v)| v,
                    ),
                });
            }
        }
        out.sort_by(|a, b| b.score.total_cmp(&a.score));
        out
    }
}

/// Labels every considered detection (at most 100 per image) as TP or FP.
/// Within an image, detections are processed in ranking order and each
/// claims the unmatched ground truth of highest IoU at or above
/// `iou_threshold`; ties go to the earlier instance.
pub fn match_detections(dets: &[Detection], gt: &GroundTruthSet, iou_threshold: f64) -> Result<Vec<MatchLabel>> {
    Ok(IouTable::new(dets, gt)?.labels(dets, iou_threshold))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::super::{GtImage, GtInstance};
    use super::*;
    use crate::mask::Mask;

    fn rect(x: u32, y: u32, w: u32, h: u32) -> Mask {
        Mask::from_fn(16, 16, |px, py| px >= x && px < x + w && py >= y && py < y + h)
    }

    fn det(image: &str, score: f64, mask: Mask) -> Detection {
        Detection {
            image_id: image.into(),
            location: (0, 0),
            score,
            template_id: None,
            mask,
            pose: None,
        }
    }

    fn one_image(masks: Vec<Mask>) -> GroundTruthSet {
        GroundTruthSet {
            images: vec![GtImage {
                id: "a".into(),
                width: 16,
                height: 16,
            }],
            instances: masks
                .into_iter()
                .map(|mask| GtInstance {
                    image_id: "a".into(),
                    mask,
                    pose: None,
                })
                .collect(),
        }
    }

    #[test]
    fn single_overlap_is_tp() {
        // 7x10 vs 10x10 boxes sharing 70 pixels: IoU 0.7.
        let gt = one_image(vec![rect(0, 0, 10, 10)]);
        let l = match_detections(&[det("a", 0.9, rect(0, 0, 7, 10))], &gt, 0.5).unwrap();
        assert!(l[0].tp);
        assert!((l[0].iou - 0.7).abs() < 1e-12);
    }

    #[test]
    fn second_detection_on_same_gt_is_fp() {
        let gt = one_image(vec![rect(0, 0, 10, 10)]);
        let dets = [det("a", 0.4, rect(0, 0, 10, 10)), det("a", 0.9, rect(0, 0, 9, 10))];
        let l = match_detections(&dets, &gt, 0.5).unwrap();
        assert_eq!((l[0].detection, l[0].tp), (1, true));
        assert_eq!((l[1].detection, l[1].tp), (0, false));
    }

    #[test]
    fn dangling_detection_image() {
        let gt = one_image(vec![]);
        assert!(matches!(
            match_detections(&[det("zz", 0.5, rect(0, 0, 1, 1))], &gt, 0.5),
            Err(Error::DanglingImageId(_))
        ));
    }

    #[test]
    fn only_first_hundred_per_image_count() {
        let gt = one_image(vec![rect(0, 0, 4, 4)]);
        let mut dets: Vec<Detection> = (0..120).map(|i| det("a", 1.0 - i as f64 * 1e-3, rect(8, 8, 2, 2))).collect();
        dets.push(det("a", 0.0, rect(0, 0, 4, 4)));
        let l = match_detections(&dets, &gt, 0.5).unwrap();
        assert_eq!(l.len(), 100);
        assert!(l.iter().all(|x| !x.tp));
    }

    /// Exhaustive re-implementation: for every detection in rank order, scan
    /// all GT instances of its image directly from the masks.
    fn brute(dets: &[Detection], gt: &GroundTruthSet, thr: f64) -> Vec<(usize, bool)> {
        let mut order: Vec<usize> = (0..dets.len()).collect();
        order.sort_by(|&a, &b| dets[a].rank_cmp(&dets[b]));
        let mut used = vec![false; gt.instances.len()];
        let mut out = Vec::new();
        for &d in &order {
            let mut best = None;
            let mut best_iou = -1.0;
            for (g, inst) in gt.instances.iter().enumerate() {
                if inst.image_id != dets[d].image_id || used[g] {
                    continue;
                }
                let inter = inst.mask.pixels().filter(|&(x, y)| dets[d].mask.get(x as i64, y as i64)).count();
                let union = inst.mask.area() as usize + dets[d].mask.area() as usize - inter;
                let iou = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
                if iou >= thr && iou > best_iou {
                    best = Some(g);
                    best_iou = iou;
                }
            }
            if let Some(g) = best {
                used[g] = true;
            }
            out.push((d, best.is_some()));
        }
        out.sort();
        out
    }

    #[test]
    fn greedy_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n_img = rng.random_range(1..=3);
            let ids: Vec<String> = (0..n_img).map(|i| format!("im{i}")).collect();
            let mut gt = GroundTruthSet::default();
            for id in &ids {
                gt.images.push(GtImage {
                    id: id.clone(),
                    width: 16,
                    height: 16,
                });
            }
            let r = |rng: &mut ChaCha8Rng| {
                rect(rng.random_range(0..8), rng.random_range(0..8), rng.random_range(1..9), rng.random_range(1..9))
            };
            for _ in 0..rng.random_range(0..=6) {
                let image_id = ids[rng.random_range(0..n_img)].clone();
                gt.instances.push(GtInstance {
                    image_id,
                    mask: r(&mut rng),
                    pose: None,
                });
            }
            let dets: Vec<Detection> = (0..rng.random_range(0..=10))
                .map(|_| {
                    let image = ids[rng.random_range(0..n_img)].clone();
                    det(&image, rng.random_range(0..5) as f64 / 4.0, r(&mut rng))
                })
                .collect();
            for thr in [0.3, 0.5, 0.75] {
                let mut got: Vec<(usize, bool)> =
                    match_detections(&dets, &gt, thr).unwrap().iter().map(|l| (l.detection, l.tp)).collect();
                got.sort();
                assert_eq!(got, brute(&dets, &gt, thr));
            }
        }
    }
}
