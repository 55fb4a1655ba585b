use super::Detection;
use crate::mask::BBox;

/// When to drop a box against an already kept one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    /// Drop at IoU at or above this.
    pub iou: f64,
    /// Also drop when this fraction of the box lies inside the kept box.
    /// Values above 1 disable the test.
    pub containment: f64,
}

impl Overlap {
    pub fn iou_only(iou: f64) -> Self {
        Overlap { iou, containment: f64::INFINITY }
    }

    fn suppresses(&self, kept: &BBox, b: &BBox) -> bool {
        if kept.iou(b) >= self.iou {
            return true;
        }
        let area = b.area();
        area > 0 && kept.intersection(b) as f64 >= self.containment * area as f64
    }
}

/// Greedy suppression over boxes already in priority order. Returns the kept
/// indices and, for every input, the index of the kept box that absorbed it
/// (itself when kept). Empty boxes never overlap anything.
pub fn greedy_suppress(boxes: &[Option<BBox>], overlap: Overlap) -> (Vec<usize>, Vec<usize>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut owner = Vec::with_capacity(boxes.len());
    for (i, b) in boxes.iter().enumerate() {
        let absorbed = b.and_then(|b| {
            kept.iter()
                .copied()
                .find(|&k| boxes[k].is_some_and(|kb| overlap.suppresses(&kb, &b)))
        });
        match absorbed {
            Some(k) => owner.push(k),
            None => {
                kept.push(i);
                owner.push(i);
            }
        }
    }
    (kept, owner)
}

/// Non-maximum suppression on mask bounding boxes. Input order does not
/// matter; the output is in ranking order with pairwise IoU below the
/// threshold.
pub fn nms(dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    nms_with(dets, Overlap::iou_only(iou_threshold))
}

/// [`nms`] with an additional containment test.
pub fn nms_with(mut dets: Vec<Detection>, overlap: Overlap) -> Vec<Detection> {
    dets.sort_by(|a, b| a.rank_cmp(b));
    let boxes: Vec<Option<BBox>> = dets.iter().map(|d| d.mask.bbox()).collect();
    let (kept, _) = greedy_suppress(&boxes, overlap);
    let mut keep = vec![false; dets.len()];
    for k in kept {
        keep[k] = true;
    }
    dets.into_iter()
        .zip(keep)
        .filter_map(|(d, k)| k.then_some(d))
        .collect()
}
