use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, Luma};
use rayon::prelude::*;
use serde_json::json;
use tubeloc::config::RunConfig;
use tubeloc::dataset::{
    load_annotations, load_detection_file, synth_scene, write_annotations, write_detections, DetectionHeader,
    SynthPlan,
};
use tubeloc::eval::{evaluate, GroundTruthSet};
use tubeloc::features::{compute_gradients, quantize_orientations, spread_orientations, EMPTY_BIN};
use tubeloc::library::TemplateLibrary;
use tubeloc::matching::{Detection, Matcher};

use crate::frame::Frame;
use crate::overlay::{color, draw_contour};
use crate::{Cli, Command, DetectArgs, DumpFeaturesArgs, EvaluateArgs, GenTemplatesArgs, OverlayArgs, SynthArgs};

pub const OUT_DIR_ENV: &str = "TUBELOC_OUT_DIR";
pub const DETECTOR_NAME: &str = "line2d";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

impl From<tubeloc::Error> for Failure {
    fn from(e: tubeloc::Error) -> Self {
        match e {
            tubeloc::Error::Config(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

impl From<image::ImageError> for Failure {
    fn from(e: image::ImageError) -> Self {
        Failure::Data(format!("image: {e}"))
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage(msg: impl fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

/// Flag, else the environment override, else the working directory.
fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn out_file(flag: Option<PathBuf>, default_name: &str) -> Result<PathBuf> {
    let path = match flag {
        Some(p) => p,
        None => out_dir(None).join(default_name),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let body = serde_json::to_string_pretty(v).map_err(|e| Failure::Data(e.to_string()))?;
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

/// Expands directories to their PNG files, sorted by name.
fn collect_images(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Failure::Data(format!("{}: no such file or directory", p.display())));
        }
    }
    let mut names: Vec<String> = out.iter().map(|p| file_name(p)).collect();
    names.sort();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Failure::Data(format!("duplicate image name {}", w[0])));
    }
    Ok(out)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(usage)?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::GenTemplates(a) => gen_templates(&cfg, a),
        Command::Detect(a) => detect(cfg, a),
        Command::Evaluate(a) => evaluate_cmd(&cfg, a),
        Command::Synth(a) => synth(&cfg, cli.seed, a),
        Command::Overlay(a) => overlay(a),
        Command::DumpFeatures(a) => dump_features(&cfg, a),
    }
}

fn gen_templates(cfg: &RunConfig, a: GenTemplatesArgs) -> Result<()> {
    cfg.validate().map_err(usage)?;
    let (lib, skipped) =
        TemplateLibrary::generate(&cfg.tube, &cfg.sampling, &cfg.camera, &cfg.features, &cfg.templates)?;
    let path = out_file(a.out, "library.tubt")?;
    lib.save(&path)?;
    let digest = lib.digest()?;
    let manifest = PathBuf::from(format!("{}.manifest.json", path.display()));
    write_json(
        &manifest,
        &json!({
            "library": file_name(&path),
            "templates": lib.len(),
            "skipped_viewpoints": skipped,
            "library_digest": digest,
            "config_digest": cfg.digest(),
            "config": cfg,
        }),
    )?;
    println!("{} templates, {} viewpoints skipped, digest {digest}", lib.len(), skipped);
    println!("wrote {}", path.display());
    Ok(())
}

fn detect(mut cfg: RunConfig, a: DetectArgs) -> Result<()> {
    if let Some(t) = a.threshold {
        cfg.matching.score_threshold = t;
    }
    cfg.validate().map_err(usage)?;
    if !(a.scale.is_finite() && a.scale > 0.0) {
        return Err(usage("--scale must be positive"));
    }
    if a.crop == Some(0) {
        return Err(usage("--crop must be positive"));
    }
    let lib = TemplateLibrary::load(&a.library)?;
    if lib.features != cfg.features {
        eprintln!("note: using the library's feature parameters, which differ from the configuration");
    }
    let images = collect_images(&a.images)?;
    let per_image: Vec<Result<Vec<Detection>>> = images
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let img = image::open(path)?;
            let id = file_name(path);
            let (processed, frame) = Frame::apply(&img, a.scale, a.crop, cfg.seed.wrapping_add(i as u64));
            let k = frame.intrinsics(&lib.intrinsics);
            let matcher = Matcher::new(&lib.templates, lib.features.clone(), cfg.matching.clone(), k)?;
            let dets = matcher.detect(&processed, &id)?;
            Ok(dets.into_iter().map(|d| frame.detection_to_input(d)).collect())
        })
        .collect();
    let mut all = Vec::new();
    for r in per_image {
        all.extend(r?);
    }
    let header = DetectionHeader {
        detector: DETECTOR_NAME.into(),
        config_digest: cfg.digest(),
        library_digest: lib.digest()?,
    };
    let path = out_file(a.out, "detections.json")?;
    write_detections(&path, header, &all)?;
    println!("{} detections in {} images", all.len(), images.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn evaluate_cmd(cfg: &RunConfig, a: EvaluateArgs) -> Result<()> {
    let file = load_detection_file(&a.detections)?;
    let gt = load_annotations(&a.annotations)?;
    file.validate_against(&gt)?;
    let dets = file.detections()?;
    let mut report = evaluate(&dets, &gt)?;
    report.detector = Some(file.header.detector.clone()).filter(|d| !d.is_empty());
    report.config_digest = Some(file.header.config_digest.clone()).filter(|d| !d.is_empty());
    let dir = out_dir(a.out_dir);
    let written = report.write_dir(&dir, cfg.eval.histogram_bins)?;
    println!(
        "AP[.5] {}  AR[.5:.95] {}  ({} detections, {} ground truth, {} images)",
        fmt_metric(report.ap50),
        fmt_metric(report.ar_50_95),
        report.detections,
        report.ground_truth,
        report.images
    );
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

fn synth(cfg: &RunConfig, seed: Option<u64>, a: SynthArgs) -> Result<()> {
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let mut plan = SynthPlan::load(&a.spec)?;
    if let Some(s) = seed {
        plan.seed = s;
    }
    let scenes = plan.scenes(a.count)?;
    let dir = out_dir(a.out_dir);
    create_dir(&dir)?;
    let name = |i: usize| format!("scene_{i:05}.png");
    let parts: Vec<Result<GroundTruthSet>> = scenes
        .par_iter()
        .map(|s| {
            let file = name(s.index);
            let (img, gt) = synth_scene(&s.spec, &file)?;
            img.save(dir.join(&file))?;
            Ok(gt)
        })
        .collect();
    let mut gt = GroundTruthSet::default();
    for p in parts {
        gt.extend(p?);
    }
    write_annotations(&dir.join("annotations.json"), &gt)?;
    let listing: Vec<_> = scenes
        .iter()
        .map(|s| json!({ "file": name(s.index), "cell": s.cell, "spec": s.spec }))
        .collect();
    write_json(
        &dir.join("scenes.json"),
        &json!({ "config_digest": cfg.digest(), "plan": plan, "scenes": listing }),
    )?;
    println!(
        "{} scenes over {} cells, {} tube instances",
        scenes.len(),
        plan.cell_count(),
        gt.instances.len()
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn overlay(a: OverlayArgs) -> Result<()> {
    let file = load_detection_file(&a.detections)?;
    let mut dets = file.detections()?;
    dets.sort_by(|x, y| x.rank_cmp(y));
    let images = collect_images(&a.images)?;
    let dir = out_dir(a.out_dir);
    create_dir(&dir)?;
    for p in &images {
        let target = dir.join(file_name(p));
        if fs::canonicalize(&target).ok() == fs::canonicalize(p).ok() {
            return Err(usage(format!("{} would overwrite its input", target.display())));
        }
    }
    let drawn: Vec<Result<usize>> = images
        .par_iter()
        .map(|p| {
            let id = file_name(p);
            let target = dir.join(&id);
            let mine: Vec<&Detection> = dets
                .iter()
                .filter(|d| d.image_id == id && d.score >= a.min_score)
                .collect();
            if mine.is_empty() {
                fs::copy(p, &target).map_err(|e| io_err(&target, e))?;
                return Ok(0);
            }
            let mut rgb = image::open(p)?.to_rgb8();
            for (rank, d) in mine.iter().enumerate() {
                draw_contour(&mut rgb, &d.mask, color(rank));
            }
            rgb.save(&target)?;
            Ok(mine.len())
        })
        .collect();
    let mut total = 0;
    for d in drawn {
        total += d?;
    }
    println!("{total} contours over {} images", images.len());
    println!("wrote {}", dir.display());
    Ok(())
}

fn dump_features(cfg: &RunConfig, a: DumpFeaturesArgs) -> Result<()> {
    cfg.validate().map_err(usage)?;
    let f = &cfg.features;
    let img = image::open(&a.image)?;
    let img = if cfg.matching.grayscale {
        DynamicImage::ImageLuma8(img.to_luma8())
    } else {
        img
    };
    let q = quantize_orientations(&compute_gradients(&img)?, f.magnitude_threshold, f.n0)?;
    let s = spread_orientations(&q, f.spread)?;
    let (w, h) = (q.width, q.height);
    let n0 = f.n0 as u32;
    let dir = out_dir(a.out_dir);
    create_dir(&dir)?;
    let mut written = vec![("quantized.png".to_string(), GrayImage::from_fn(w, h, |x, y| {
        let b = q.bins[(y * w + x) as usize];
        Luma([if b == EMPTY_BIN { 0 } else { ((b as u32 + 1) * 255 / n0) as u8 }])
    }))];
    written.push((
        "spread_count.png".into(),
        GrayImage::from_fn(w, h, |x, y| Luma([(s.get(x, y).count_ones() * 255 / n0) as u8])),
    ));
    for b in 0..n0 {
        written.push((
            format!("spread_bin{b}.png"),
            GrayImage::from_fn(w, h, |x, y| Luma([if s.get(x, y) >> b & 1 == 1 { 255 } else { 0 }])),
        ));
    }
    for (name, im) in &written {
        im.save(dir.join(name))?;
    }
    println!("wrote {} maps to {}", written.len(), dir.display());
    Ok(())
}
