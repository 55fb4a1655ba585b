mod commands;
mod frame;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Sample-tube detection, evaluation and synthetic scene generation.
#[derive(Parser, Debug)]
#[command(name = "tubeloc", version)]
pub struct Cli {
    /// Run configuration (TOML, or JSON by extension). Flags win over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render the template library and write it with a manifest.
    GenTemplates(GenTemplatesArgs),
    /// Detect tubes in images and write a detection file.
    Detect(DetectArgs),
    /// Score detections against annotations; writes report, CSVs and plots.
    Evaluate(EvaluateArgs),
    /// Render synthetic scenes with annotations.
    Synth(SynthArgs),
    /// Draw detection contours over the images.
    Overlay(OverlayArgs),
    /// Write quantized and spread orientation maps of one image as PNGs.
    DumpFeatures(DumpFeaturesArgs),
}

#[derive(Args, Debug)]
pub struct GenTemplatesArgs {
    /// Library path; defaults to `library.tubt` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub library: PathBuf,
    /// PNG files or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub images: Vec<PathBuf>,
    /// Detection file; defaults to `detections.json` in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resize factor applied before matching.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Side of a random square crop taken after scaling.
    #[arg(long)]
    pub crop: Option<u32>,
    /// Overrides the configured score threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scene plan: a fixed scene or a sampler with a factor grid.
    #[arg(long)]
    pub spec: PathBuf,
    /// Scenes per grid cell.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OverlayArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Skip detections scoring below this.
    #[arg(long, default_value_t = 0.0)]
    pub min_score: f64,
}

#[derive(Args, Debug)]
pub struct DumpFeaturesArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
