use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "dfm", version, about = "Dense feature matching between image pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Match one image pair and write the matches and diagnostics.
    Match(MatchArgs),
    /// Evaluate over an HPatches-layout dataset.
    Eval(EvalArgs),
    /// Same as `eval --mode mma`.
    EvalMma(EvalCommon),
    /// Same as `eval --mode homography`.
    EvalHomography(EvalCommon),
    /// Draw matches between two images as an SVG.
    Viz(VizArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractorKind {
    Builtin,
    #[value(name = "tensor_files")]
    TensorFiles,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Mma,
    Homography,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    #[arg(long)]
    pub image_a: PathBuf,
    #[arg(long)]
    pub image_b: PathBuf,
    /// s1 or s0_s1.
    #[arg(long, default_value = "s0_s1")]
    pub variant: String,
    /// Ratio schedule: r06 or r09 (0.6 and 0.9 also accepted).
    #[arg(long, default_value = "r09")]
    pub ratio: String,
    #[arg(long, value_enum, default_value = "builtin")]
    pub extractor: ExtractorKind,
    /// Weight seed of the builtin extractor.
    #[arg(long, default_value_t = 1)]
    pub builtin_seed: u64,
    #[arg(long)]
    pub manifest_a: Option<PathBuf>,
    #[arg(long)]
    pub manifest_b: Option<PathBuf>,
    /// Manifest for the warped B image (tensor_files with s0_s1).
    #[arg(long)]
    pub manifest_bw: Option<PathBuf>,
    /// Write the Stage-0 warped B image here and stop, so its features can
    /// be exported before matching (tensor_files with s0_s1).
    #[arg(long)]
    pub warped_out: Option<PathBuf>,
    /// MSAC seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Match file; diagnostics go next to it as `<stem>.diagnostics.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics path, overriding the default.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalCommon {
    /// Root holding `i_*` and `v_*` sequence directories.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "s0_s1")]
    pub variant: String,
    #[arg(long, default_value = "r09")]
    pub ratio: String,
    /// MSAC repetitions per pair (homography mode).
    #[arg(long, default_value_t = dfm::eval::DEFAULT_RUNS)]
    pub runs: usize,
    /// Base seed for every per-pair MSAC run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-pair CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub mode: EvalMode,
    #[command(flatten)]
    pub common: EvalCommon,
}

#[derive(Args, Debug)]
pub struct VizArgs {
    #[arg(long)]
    pub image_a: PathBuf,
    #[arg(long)]
    pub image_b: PathBuf,
    #[arg(long)]
    pub matches: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw a seeded uniform subsample of at most this many matches.
    #[arg(long)]
    pub max_lines: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
