//! `trace-forge`: generate forgery corpora, run the built-in probes, score
//! heatmaps and inspect individual records.

mod evaluate;
mod generate;
mod inspect;
mod probe;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trace_forge::cfa::CfaPattern;
use trace_forge::forgery::{DatasetKind, MaskKind};

#[derive(Parser, Debug)]
#[command(
    name = "trace-forge",
    version,
    about = "Camera-pipeline trace forgery corpus generator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build masks and write every requested forgery dataset.
    Generate(GenerateArgs),
    /// Run one probe on an image and optionally save its heatmap.
    Probe(ProbeArgs),
    /// Score heatmaps against a corpus with the weighted MCC.
    Evaluate(EvaluateArgs),
    /// Print a record's configuration diff and check its residual support.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "synthetic"])))]
pub struct GenerateArgs {
    /// Directory of reference images: 8-bit PPM (P6) or 16-bit raw PGM (P5).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use this many seeded synthetic scenes instead of files.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Side of the synthetic scenes.
    #[arg(long, default_value_t = trace_forge::synthetic::DEFAULT_SIDE)]
    pub size: usize,
    /// Bayer layout of raw PGM inputs.
    #[arg(long, default_value = "RGGB", value_parser = parse_pattern)]
    pub cfa: CfaPattern,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated dataset kinds, or `all`.
    #[arg(long, default_value = "all", value_parser = parse_kinds)]
    pub kinds: KindList,
    /// Comma-separated mask kinds: endo, exo.
    #[arg(long, default_value = "endo,exo", value_parser = parse_mask_kinds)]
    pub masks: MaskKindList,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Never changes the output.
    #[arg(long, env = "TRACE_FORGE_WORKERS", default_value_t = 0)]
    pub workers: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMethod {
    Zero,
    Cfa,
    Noise,
}

#[derive(Args, Debug, Clone)]
pub struct ProbeOptions {
    /// Noise-probe block side.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(2..))]
    pub block: u32,
    /// Sliding-window side for the zero and CFA probes.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(8..))]
    pub window: u32,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    pub stride: u32,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    pub method: ProbeMethod,
    /// 8-bit PPM image to analyse.
    #[arg(long)]
    pub image: PathBuf,
    /// Where to write the heatmap as PFM.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub options: ProbeOptions,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("detector").required(true).args(["heatmaps", "probe"])))]
pub struct EvaluateArgs {
    /// Corpus manifest; mask and image paths resolve against its directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding `<kind>/<image_id>_<mask>.pfm` heatmaps.
    #[arg(long)]
    pub heatmaps: Option<PathBuf>,
    /// Compute heatmaps with a built-in probe instead of reading them.
    #[arg(long, value_enum)]
    pub probe: Option<ProbeMethod>,
    /// With `--probe`, also save the computed heatmaps in this directory.
    #[arg(long, requires = "probe")]
    pub save_heatmaps: Option<PathBuf>,
    /// Output results JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-image scores as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub options: ProbeOptions,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// JSON sidecar of one forgery, inside its corpus.
    pub record: PathBuf,
}

fn parse_pattern(s: &str) -> Result<CfaPattern, String> {
    s.parse()
        .map_err(|e: trace_forge::error::Error| e.to_string())
}

#[derive(Debug, Clone)]
pub struct KindList(pub Vec<DatasetKind>);

#[derive(Debug, Clone)]
pub struct MaskKindList(pub Vec<MaskKind>);

fn parse_kinds(s: &str) -> Result<KindList, String> {
    DatasetKind::parse_list(s)
        .map(KindList)
        .map_err(|e| e.to_string())
}

fn parse_mask_kinds(s: &str) -> Result<MaskKindList, String> {
    MaskKind::parse_list(s)
        .map(MaskKindList)
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => generate::run(&args),
        Command::Probe(args) => probe::run(&args),
        Command::Evaluate(args) => evaluate::run(&args),
        Command::Inspect(args) => inspect::run(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
