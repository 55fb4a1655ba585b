use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::assign::IouTable;
use super::metrics::{average_recall_from, interpolated_precision, recall_points, IOU_THRESHOLDS};
use super::pose::{pose_errors_from, PoseError};
use super::GroundTruthSet;
use crate::error::{Error, Result};
use crate::matching::Detection;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub iou_threshold: f64,
    /// Mean of the interpolated precisions; `None` without ground truth.
    pub ap: Option<f64>,
    /// `[recall, interpolated precision]` at the 101 recall points.
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    pub images: usize,
    pub ground_truth: usize,
    pub pose_annotated: usize,
    pub detections: usize,
    /// AP at IoU 0.5, 101-point interpolation, up to 100 detections per image.
    pub ap50: Option<f64>,
    /// Recall averaged over IoU 0.50:0.05:0.95.
    pub ar_50_95: Option<f64>,
    pub pr_curves: Vec<PrCurve>,
    pub pose_errors: Vec<PoseError>,
    /// Conditions under which a figure is not applicable.
    pub notes: Vec<String>,
}

/// Runs the full protocol: matching at every IoU threshold, AP, AR, PR
/// curves and pose errors.
/// Detections are first put in canonical order (image id, then rank), so
/// the report, including the `detection` indices of pose errors, does not
/// depend on input order.
pub fn evaluate(dets: &[Detection], gt: &GroundTruthSet) -> Result<EvalReport> {
    gt.validate()?;
    let mut ordered = dets.to_vec();
    ordered.sort_by(|a, b| a.image_id.cmp(&b.image_id).then_with(|| a.rank_cmp(b)));
    let dets = ordered.as_slice();
    let table = IouTable::new(dets, gt)?;
    let mut pr_curves = Vec::with_capacity(IOU_THRESHOLDS.len());
    let mut considered = 0;
    for &t in &IOU_THRESHOLDS {
        let labels = table.labels(dets, t);
        considered = labels.len();
        let tp: Vec<bool> = labels.iter().map(|l| l.tp).collect();
        let interp = interpolated_precision(&tp, table.n_gt);
        pr_curves.push(PrCurve {
            iou_threshold: t,
            ap: interp.map(|p| p.iter().sum::<f64>() / p.len() as f64),
            points: recall_points()
                .into_iter()
                .zip(interp.unwrap_or([0.0; 101]))
                .map(|(r, p)| [r, p])
                .collect(),
        });
    }
    let pose_errors = pose_errors_from(&table, dets, gt);
    let pose_annotated = gt.instances.iter().filter(|g| g.pose.is_some()).count();
    let mut notes = Vec::new();
    if table.n_gt == 0 {
        notes.push("no ground-truth instances: AP and AR are not applicable".to_string());
    }
    if pose_annotated == 0 {
        notes.push("no pose-annotated ground truth: pose errors are empty".to_string());
    }
    Ok(EvalReport {
        detector: None,
        config_digest: None,
        images: gt.images.len(),
        ground_truth: table.n_gt,
        pose_annotated,
        detections: considered,
        ap50: pr_curves[0].ap,
        ar_50_95: average_recall_from(&table, dets),
        pr_curves,
        pose_errors,
        notes,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One-row table with the headline columns.
    pub fn summary_csv(&self) -> String {
        format!(
            "detector,AP [.5],AR [.5:.05:.95],images,ground_truth,detections\n{},{},{},{},{},{}\n",
            self.detector.as_deref().unwrap_or(""),
            fmt_opt(self.ap50),
            fmt_opt(self.ar_50_95),
            self.images,
            self.ground_truth,
            self.detections
        )
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("iou_threshold,recall,precision\n");
        for c in &self.pr_curves {
            for [r, p] in &c.points {
                let _ = writeln!(s, "{:.2},{r:.2},{p:.6}", c.iou_threshold);
            }
        }
        s
    }

    pub fn pose_csv(&self) -> String {
        let mut s = String::from(
            "image_id,detection,gt,iou,translation_error_m,range_m,axis_error_deg,flip_aware_axis_error_deg\n",
        );
        for e in &self.pose_errors {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{:.4},{:.4}",
                e.image_id, e.detection, e.gt, e.iou, e.translation_error, e.range, e.axis_error, e.flip_aware_axis_error
            );
        }
        s
    }

    /// Plain `recall<TAB>precision` lines for one curve.
    pub fn pr_tsv(&self, curve: &PrCurve) -> String {
        let mut s = String::from("recall\tprecision\n");
        for [r, p] in &curve.points {
            let _ = writeln!(s, "{r:.2}\t{p:.6}");
        }
        s
    }

    /// Step plot of every PR curve, the IoU 0.5 curve drawn heaviest.
    pub fn pr_svg(&self) -> String {
        let (w, h, m) = (480.0, 360.0, 48.0);
        let px = |r: f64| m + r * (w - 2.0 * m);
        let py = |p: f64| h - m - p * (h - 2.0 * m);
        let mut s = svg_frame(w, h, m, "recall", "precision");
        for (i, c) in self.pr_curves.iter().enumerate().rev() {
            let shade = 40 + (i as u32 * 18).min(180);
            let width = if i == 0 { 2.0 } else { 0.8 };
            let mut d = String::new();
            for (k, [r, p]) in c.points.iter().enumerate() {
                let _ = write!(d, "{}{:.1},{:.1} ", if k == 0 { "M" } else { "L" }, px(*r), py(*p));
            }
            let _ = writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="rgb({shade},{shade},220)" stroke-width="{width}"><title>IoU {:.2}</title></path>"#,
                c.iou_threshold
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">AP [.5] {}  AR [.5:.05:.95] {}</text>"#,
            m,
            m - 12.0,
            fmt_opt(self.ap50),
            fmt_opt(self.ar_50_95)
        );
        s.push_str("</svg>\n");
        s
    }

    /// Histogram of raw and flip-aware axis errors over `[0, 180]`.
    pub fn pose_histogram_svg(&self, bins: usize) -> String {
        let bins = bins.max(1);
        let (w, h, m) = (480.0, 360.0, 48.0);
        let count = |f: &dyn Fn(&PoseError) -> f64| {
            let mut c = vec![0usize; bins];
            for e in &self.pose_errors {
                let b = ((f(e) / 180.0 * bins as f64) as usize).min(bins - 1);
                c[b] += 1;
            }
            c
        };
        let raw = count(&|e| e.axis_error);
        let flip = count(&|e| e.flip_aware_axis_error);
        let top = raw.iter().chain(&flip).copied().max().unwrap_or(0).max(1) as f64;
        let bw = (w - 2.0 * m) / bins as f64;
        let mut s = svg_frame(w, h, m, "axis error (deg)", "count");
        for (i, (&a, &b)) in raw.iter().zip(&flip).enumerate() {
            for (k, (v, color)) in [(a, "#9aa7d8"), (b, "#d88a5a")].into_iter().enumerate() {
                let bh = v as f64 / top * (h - 2.0 * m);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}"/>"#,
                    m + i as f64 * bw + k as f64 * bw / 2.0,
                    h - m - bh,
                    bw / 2.0,
                    bh
                );
            }
        }
        let _ = writeln!(
            s,
            r##"<text x="{m}" y="{}" font-size="12"><tspan fill="#9aa7d8">raw</tspan> <tspan fill="#d88a5a">flip-aware</tspan>  n = {}</text>"##,
            m - 12.0,
            self.pose_errors.len()
        );
        s.push_str("</svg>\n");
        s
    }

    /// Writes `report.json`, `summary.csv`, `pr_curves.csv`, `pose_errors.csv`,
    /// one `pr_iouXX.tsv` per threshold, `pr_curves.svg` and
    /// `pose_errors.svg` into `dir`. Returns the written paths.
    pub fn write_dir(&self, dir: &Path, histogram_bins: usize) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            ("report.json".to_string(), self.to_json()?),
            ("summary.csv".to_string(), self.summary_csv()),
            ("pr_curves.csv".to_string(), self.pr_csv()),
            ("pose_errors.csv".to_string(), self.pose_csv()),
            ("pr_curves.svg".to_string(), self.pr_svg()),
            ("pose_errors.svg".to_string(), self.pose_histogram_svg(histogram_bins)),
        ];
        for c in &self.pr_curves {
            files.push((
                format!("pr_iou{:02}.tsv", (c.iou_threshold * 100.0).round() as u32),
                self.pr_tsv(c),
            ));
        }
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}

fn svg_frame(w: f64, h: f64, m: f64, xlabel: &str, ylabel: &str) -> String {
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r#"<path d="M{m},{m} L{m},{b} L{r},{b}" fill="none" stroke="black"/>"#,
            "\n",
            r#"<text x="{cx}" y="{lx}" font-size="12" text-anchor="middle">{xlabel}</text>"#,
            "\n",
            r#"<text x="14" y="{cy}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {cy})">{ylabel}</text>"#,
            "\n"
        ),
        w = w,
        h = h,
        m = m,
        b = h - m,
        r = w - m,
        cx = w / 2.0,
        cy = h / 2.0,
        lx = h - 14.0,
        xlabel = xlabel,
        ylabel = ylabel
    )
}
