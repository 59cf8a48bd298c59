use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "hardhat",
    version,
    about = "Zero-shot hardhat detection benchmark toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the cascaded and direct/nested manifests from VOC annotations.
    BuildDataset(BuildArgs),
    /// Sweep confidence thresholds and report PR curves and AP.
    Sweep(RunArgs),
    /// Run strategies once at a single threshold and dump predictions.
    Run(RunArgs),
    /// Record every backend response of a sweep into a replayable fixture.
    RecordFixture(RunArgs),
    /// Draw ground truth and predictions onto the images.
    Overlay(OverlayArgs),
    /// Check manifest statistics, and optionally a report, for consistency.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Hard Hat Workers annotation directory.
    #[arg(long = "hard-hat-workers", value_name = "DIR")]
    pub hard_hat_workers: Option<PathBuf>,
    /// SHEL5k annotation directory.
    #[arg(long = "shel5k", value_name = "DIR")]
    pub shel5k: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// `table1` for the published counts, or a JSON file of expected counts.
    #[arg(long, value_name = "table1|PATH")]
    pub expect: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Manifest file; repeat to give one per mode. Strategies pick the manifest
    /// of their mode.
    #[arg(long, value_name = "PATH")]
    pub manifest: Vec<PathBuf>,
    /// direct, nested, cascaded, a comma list, or all.
    #[arg(long)]
    pub strategy: Option<String>,
    /// oracle[:k=v,...], fixture:PATH or remote:URL.
    #[arg(long)]
    pub backend: Option<String>,
    /// Directory searched for image files (remote backend and overlays).
    #[arg(long = "image-root", value_name = "DIR")]
    pub image_root: Vec<PathBuf>,
    /// start:stop:step or a comma-separated list.
    #[arg(long)]
    pub grid: Option<String>,
    /// Single threshold for `run` and `overlay`.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long = "iou-cut")]
    pub iou_cut: Option<f64>,
    #[arg(long = "crop-padding")]
    pub crop_padding: Option<f64>,
    #[arg(long = "person-threshold")]
    pub person_threshold: Option<f64>,
    #[arg(long = "head-threshold")]
    pub head_threshold: Option<f64>,
    #[arg(long = "helmet-threshold")]
    pub helmet_threshold: Option<f64>,
    #[arg(long = "person-prompt")]
    pub person_prompt: Option<String>,
    #[arg(long = "head-prompt")]
    pub head_prompt: Option<String>,
    #[arg(long = "helmet-prompt")]
    pub helmet_prompt: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Flat TOML file of the same keys; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Only write images with at least one false positive or missed instance.
    #[arg(long = "only-mismatches")]
    pub only_mismatches: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: Vec<PathBuf>,
    /// `table1`, or a JSON file of expected counts.
    #[arg(long, value_name = "table1|PATH")]
    pub expect: Option<String>,
    /// report.json whose AP values are re-derived from its PR points.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}
