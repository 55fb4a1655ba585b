use super::assign::IouTable;
use super::GroundTruthSet;
use crate::error::Result;
use crate::matching::Detection;

/// Detections considered per image.
pub const MAX_DETECTIONS: usize = 100;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Recall sample points 0.00, 0.01, ..., 1.00.
pub fn recall_points() -> [f64; 101] {
    std::array::from_fn(|i| i as f64 / 100.0)
}

/// Interpolated precision at the 101 recall points for a ranked TP/FP list:
/// at recall `r`, the highest precision reached at any recall `>= r`, or 0
/// when recall `r` is never reached. `None` when there is no ground truth.
pub fn interpolated_precision(ranked_tp: &[bool], n_gt: usize) -> Option<[f64; 101]> {
    if n_gt == 0 {
        return None;
    }
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(ranked_tp.len());
    let mut recall = Vec::with_capacity(ranked_tp.len());
    for (i, &hit) in ranked_tp.iter().enumerate() {
        tp += hit as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for i in (1..precision.len()).rev() {
        precision[i - 1] = precision[i - 1].max(precision[i]);
    }
    let pts = recall_points();
    Some(std::array::from_fn(|k| {
        let first = recall.partition_point(|&r| r < pts[k]);
        precision.get(first).copied().unwrap_or(0.0)
    }))
}

/// Mean of the 101 interpolated precisions; `None` without ground truth.
pub fn average_precision(ranked_tp: &[bool], n_gt: usize) -> Option<f64> {
    interpolated_precision(ranked_tp, n_gt).map(|p| p.iter().sum::<f64>() / p.len() as f64)
}

/// `(recall, interpolated precision)` at the 101 recall points.
pub fn pr_curve(dets: &[Detection], gt: &GroundTruthSet, iou_threshold: f64) -> Result<Option<Vec<(f64, f64)>>> {
    let table = IouTable::new(dets, gt)?;
    let tp: Vec<bool> = table.labels(dets, iou_threshold).iter().map(|l| l.tp).collect();
    Ok(interpolated_precision(&tp, table.n_gt).map(|p| recall_points().into_iter().zip(p).collect()))
}

/// Recall averaged over the ten IoU thresholds; `None` without ground truth.
pub fn average_recall(dets: &[Detection], gt: &GroundTruthSet) -> Result<Option<f64>> {
    let table = IouTable::new(dets, gt)?;
    Ok(average_recall_from(&table, dets))
}

pub(crate) fn average_recall_from(table: &IouTable, dets: &[Detection]) -> Option<f64> {
    if table.n_gt == 0 {
        return None;
    }
    let total: f64 = IOU_THRESHOLDS
        .iter()
        .map(|&t| table.labels(dets, t).iter().filter(|l| l.tp).count() as f64 / table.n_gt as f64)
        .sum();
    Some(total / IOU_THRESHOLDS.len() as f64)
}
