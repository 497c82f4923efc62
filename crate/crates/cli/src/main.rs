//! Command-line surface for the anomaly-detection pipeline.
//!
//! Subcommands mirror the pipeline stages: `synth` generates labelled scene
//! pairs, `features`/`bank` persist intermediate artifacts, `detect` scores a
//! test cloud against a bank, `eval` re-evaluates a scores CSV, and
//! `pipeline` chains everything from one config. Failures print
//! `error[<category>]: ...` and exit with a category-specific code.

use clap::{Args, Parser, Subcommand};
use pcad::cloud::{Label, PointCloud};
use pcad::error::Error;
use pcad::eval::{evaluate, DEFAULT_KDE_GRID};
use pcad::io::{
    config::{FeatureMode, RunConfig},
    container, heatmap, report, CloudFormat, ReadOptions,
};
use pcad::patchcore::AnomalyResult;
use pcad::pipeline;
use pcad::synthgen::{self, SceneSpec};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pcad",
    about = "Point-cloud anomaly detection: multimodal descriptors scored against a reference coreset",
    version
)]
struct Cli {
    /// Worker threads for parallel stages (default: one per CPU).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled reference/test pair from a preset or scene file.
    Synth(SynthArgs),
    /// Extract a descriptor matrix from a cloud into a binary container.
    Features(FeaturesArgs),
    /// Coreset reference descriptors into a memory bank.
    Bank(BankArgs),
    /// Score a test cloud against a memory bank.
    Detect(DetectArgs),
    /// Evaluate a scores CSV that carries ground-truth labels.
    Eval(EvalArgs),
    /// Run the whole chain: synth/read, features, bank, detect, eval.
    Pipeline(PipelineArgs),
}

/// Flags shared by every stage that consumes a `RunConfig`; each one
/// overrides the corresponding config-file key.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file; missing keys take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    voxel_size: Option<f64>,
    #[arg(long)]
    normal_radius: Option<f64>,
    #[arg(long)]
    feature_radius: Option<f64>,
    #[arg(long)]
    intensity_radius: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    bank_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Classification thresholds as fractions of the max score.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// fpfh | intensity | multi
    #[arg(long)]
    feature_mode: Option<String>,
    #[arg(long)]
    intensity_weight: Option<f64>,
    /// Scanner position "x,y,z" used to orient normals.
    #[arg(long, value_delimiter = ',')]
    normal_viewpoint: Option<Vec<f64>>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.voxel_size {
            config.voxel_size = v;
        }
        if let Some(v) = self.normal_radius {
            config.normal_radius = v;
        }
        if let Some(v) = self.feature_radius {
            config.feature_radius = v;
        }
        if let Some(v) = self.intensity_radius {
            config.intensity_radius = v;
        }
        if let Some(v) = self.bins {
            config.bins = v;
        }
        if let Some(v) = self.bank_size {
            config.bank_size = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.thresholds {
            config.thresholds = v.clone();
        }
        if let Some(v) = &self.feature_mode {
            config.feature_mode = FeatureMode::parse(v)?;
        }
        if let Some(v) = self.intensity_weight {
            config.intensity_weight = v;
        }
        if let Some(v) = &self.normal_viewpoint {
            if v.len() != 3 {
                return Err(Error::Config(
                    "--normal-viewpoint takes exactly three values: x,y,z".to_string(),
                ));
            }
            config.normal_viewpoint = Some([v[0], v[1], v[2]]);
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Scene preset: arch_x_move | arch_z_move | arch_xz |
    /// tunnel_ovalization | water_only
    #[arg(long, conflicts_with = "scene")]
    preset: Option<String>,
    /// Scene description TOML (alternative to --preset).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output directory for reference.ply and test.ply.
    #[arg(long)]
    out_dir: PathBuf,
    /// ply-ascii | ply-binary-le | xyz-csv
    #[arg(long, default_value = "ply-binary-le")]
    format: String,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input cloud (.ply or .csv).
    #[arg(long)]
    input: PathBuf,
    /// Output feature container.
    #[arg(long)]
    output: PathBuf,
    /// PLY property holding the intensity signal.
    #[arg(long, default_value = "intensity")]
    intensity_property: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct BankArgs {
    /// Input feature container.
    #[arg(long)]
    input: PathBuf,
    /// Output memory-bank container.
    #[arg(long)]
    output: PathBuf,
    /// Identifier recorded as the bank's source.
    #[arg(long, default_value = "reference")]
    source_id: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct DetectArgs {
    /// Test cloud to score.
    #[arg(long)]
    test: PathBuf,
    /// Memory bank to score against.
    #[arg(long)]
    bank: PathBuf,
    /// Output directory (scores.csv, heatmap.ply, report files if labelled).
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "intensity")]
    intensity_property: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Scores CSV produced by `detect` or `pipeline`.
    #[arg(long)]
    scores: PathBuf,
    /// Output directory for the report family.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PipelineArgs {
    /// Scene preset to generate and process.
    #[arg(long, conflicts_with_all = ["reference", "test"])]
    preset: Option<String>,
    /// Scene description TOML to generate and process.
    #[arg(long, conflicts_with_all = ["reference", "test", "preset"])]
    scene: Option<PathBuf>,
    /// Reference cloud file (alternative to --preset/--scene).
    #[arg(long, requires = "test")]
    reference: Option<PathBuf>,
    /// Test cloud file.
    #[arg(long, requires = "reference")]
    test: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "intensity")]
    intensity_property: String,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error[parameter]: could not configure thread pool: {e}");
            return ExitCode::from(6);
        }
    }
    #[cfg(not(feature = "parallel"))]
    if let Some(threads) = cli.threads {
        if threads > 1 {
            eprintln!("warning: built without the 'parallel' feature; running sequentially");
        }
    }

    let outcome = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Features(args) => cmd_features(args),
        Command::Bank(args) => cmd_bank(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Stable nonzero exit code per error category (clap uses 2 for usage).
fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 3,
        "format" => 4,
        "io" => 5,
        "parameter" => 6,
        "layout-mismatch" => 7,
        "degenerate-input" => 8,
        _ => 1,
    }
}

fn parse_format(s: &str) -> Result<CloudFormat, Error> {
    match s {
        "ply-ascii" => Ok(CloudFormat::PlyAscii),
        "ply-binary-le" => Ok(CloudFormat::PlyBinaryLe),
        "xyz-csv" => Ok(CloudFormat::XyzCsv),
        other => Err(Error::Config(format!(
            "unknown cloud format '{other}' (expected ply-ascii, ply-binary-le or xyz-csv)"
        ))),
    }
}

fn load_scene(preset: Option<&str>, scene: Option<&Path>) -> Result<SceneSpec, Error> {
    match (preset, scene) {
        (Some(name), None) => synthgen::preset(name),
        (None, Some(path)) => synthgen::load_spec(path),
        _ => Err(Error::parameter("exactly one of --preset or --scene is required")),
    }
}

fn read_cloud_auto(path: &Path, intensity_property: &str) -> Result<PointCloud, Error> {
    let format = CloudFormat::from_path(path)?;
    let options = ReadOptions {
        intensity_property: intensity_property.to_string(),
    };
    pcad::io::read_cloud(path, format, &options)
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let spec = load_scene(args.preset.as_deref(), args.scene.as_deref())?;
    let format = parse_format(&args.format)?;
    let pair = synthgen::generate(&spec)?;
    ensure_dir(&args.out_dir)?;
    let ext = match format {
        CloudFormat::XyzCsv => "csv",
        _ => "ply",
    };
    pcad::io::write_cloud(&pair.reference, &args.out_dir.join(format!("reference.{ext}")), format)?;
    pcad::io::write_cloud(&pair.test, &args.out_dir.join(format!("test.{ext}")), format)?;
    println!(
        "wrote reference ({} points) and test ({} points) to {}",
        pair.reference.len(),
        pair.test.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> Result<(), Error> {
    let config = args.config.resolve()?;
    let cloud = read_cloud_auto(&args.input, &args.intensity_property)?;
    let (down, index, normals) = pipeline::prepare(&cloud, &config)?;
    let features = pipeline::extract_features(&down, &index, normals.as_ref(), &config)?;
    container::write_features(&features, &args.output)?;
    println!(
        "wrote {} descriptor rows (width {}) to {}",
        features.rows(),
        features.width,
        args.output.display()
    );
    Ok(())
}

fn cmd_bank(args: BankArgs) -> Result<(), Error> {
    let config = args.config.resolve()?;
    let features = container::read_features(&args.input)?;
    let bank = pipeline::build_bank(&features, &config, &args.source_id)?;
    container::write_bank(&bank, &args.output)?;
    println!("wrote bank of {} rows to {}", bank.len(), args.output.display());
    Ok(())
}

fn write_outputs(out_dir: &Path, out: &pipeline::PipelineOutput) -> Result<(), Error> {
    ensure_dir(out_dir)?;
    report::write_scores_csv(&out.cloud, &out.min_dists, &out.scores, &out_dir.join("scores.csv"))?;
    heatmap::write_heatmap(&out.cloud, &out.scores, &out_dir.join("heatmap.ply"))?;
    if let Some(eval_report) = &out.report {
        report::write_report(eval_report, out_dir, "eval")?;
    }
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), Error> {
    let config = args.config.resolve()?;
    let test = read_cloud_auto(&args.test, &args.intensity_property)?;
    let bank = container::read_bank(&args.bank)?;
    let out = pipeline::detect(&test, &bank, &config)?;
    write_outputs(&args.out_dir, &out)?;
    println!(
        "scored {} points against bank '{}' ({} rows); outputs in {}",
        out.cloud.len(),
        out.bank.source_id,
        out.bank.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let config = args.config.resolve()?;
    let (result, labels) = read_scores_csv(&args.scores)?;
    let eval_report = evaluate(&result, &labels, &config.thresholds, DEFAULT_KDE_GRID)?;
    ensure_dir(&args.out_dir)?;
    report::write_report(&eval_report, &args.out_dir, "eval")?;
    println!("wrote evaluation report to {}", args.out_dir.display());
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), Error> {
    let config = args.config.resolve()?;
    let (reference, test) = if args.reference.is_some() {
        (
            read_cloud_auto(args.reference.as_ref().unwrap(), &args.intensity_property)?,
            read_cloud_auto(args.test.as_ref().unwrap(), &args.intensity_property)?,
        )
    } else {
        let spec = load_scene(args.preset.as_deref(), args.scene.as_deref())?;
        let pair = synthgen::generate(&spec)?;
        (pair.reference, pair.test)
    };
    let out = pipeline::run(&reference, &test, &config)?;
    ensure_dir(&args.out_dir)?;
    container::write_bank(&out.bank, &args.out_dir.join("bank.pcmb"))?;
    write_outputs(&args.out_dir, &out)?;
    if let Some(r) = &out.report {
        for m in &r.metrics {
            println!("threshold {:.2}: f1 = {:.4}", m.threshold, m.f1);
        }
    }
    println!("pipeline outputs in {}", args.out_dir.display());
    Ok(())
}

/// Reconstruct an anomaly result and labels from a scores CSV.
fn read_scores_csv(path: &Path) -> Result<(AnomalyResult, Vec<Label>), Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, Some(1), "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> Result<usize, Error> {
        columns
            .iter()
            .position(|&c| c == name)
            .ok_or_else(|| Error::format(path, Some(1), format!("missing column '{name}'")))
    };
    let (di, si, li) = (col("min_dist")?, col("score")?, col("label")?);

    let mut min_dists = Vec::new();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::format(
                path,
                Some(lineno + 1),
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64, Error> {
            fields[idx].parse().map_err(|_| {
                Error::format(path, Some(lineno + 1), format!("'{}' is not a number", fields[idx]))
            })
        };
        min_dists.push(num(di)?);
        scores.push(num(si)?);
        let name = fields[li];
        let label = [
            Label::None,
            Label::IntradosCrack,
            Label::ExtradosCrack,
            Label::InnerCrack,
            Label::WaterPatch,
        ]
        .into_iter()
        .find(|l| l.name() == name)
        .ok_or_else(|| {
            Error::format(path, Some(lineno + 1), format!("unknown label '{name}'"))
        })?;
        labels.push(label);
    }
    if min_dists.is_empty() {
        return Err(Error::format(path, None, "no data rows"));
    }
    let n = min_dists.len();
    Ok((
        AnomalyResult {
            min_dists,
            scores,
            nearest_bank_id: vec![0; n],
            degenerate_norm: false,
            point_ids: (0..n as u32).collect(),
        },
        labels,
    ))
}
