//! The `spotcheck` command line.
//!
//! Every subcommand is a thin wrapper over `spotcheck-core` (or the
//! annotation service for `serve`). Exit codes: 0 success, 1 data or
//! validation failure, 2 usage error (bad flags, missing input files).

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use spotcheck_core::annotation::{convert_quads_to_rects, ImageAnnotation, Occupancy, Rule, VisualTag};
use spotcheck_core::decision::{decide_image, parse_detections, Decision, DecisionParams, Detection, Heuristic};
use spotcheck_core::eval::{
    evaluate, evaluate_with_splits, make_splits, parse_predictions, parse_splits, write_predictions, write_splits,
    PredictionRecord, SplitRatio,
};
use spotcheck_core::manifest::{validate_manifest, Dataset, DatasetManifest, DatasetStats};
use spotcheck_core::patch::{
    apply_augmentations, denormalize, extract_patch, AugmentationConfig, SeedSpec, DEFAULT_PATCH_SIZE,
};
use spotcheck_core::raster::ImageBuffer;

pub use config::apply_config;

#[derive(Debug, Parser)]
#[command(name = "spotcheck", version, about = "Parking-lot occupancy dataset tooling")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file of `flag = value` pairs; top-level keys apply to every
    /// subcommand that has the flag, `[subcommand]` tables to one only.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-image work (default: all cores).
    #[arg(long, short = 'j', global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// More log output on stderr (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide lot occupancy from detector boxes.
    Decide(DecideArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Rewrite quadrangle lots as circumscribing rectangles.
    Convert(ConvertArgs),
    /// Check annotation files against the schema.
    Validate(ValidateArgs),
    /// Cut lot patches out of the images.
    ExtractPatches(ExtractArgs),
    /// Generate repeated stratified train/val/test splits.
    Split(SplitArgs),
    /// Count images per visual-condition tag.
    Stats(StatsArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
}

impl Command {
    pub const NAMES: [&'static str; 8] = [
        "decide",
        "evaluate",
        "convert",
        "validate",
        "extract-patches",
        "split",
        "stats",
        "serve",
    ];
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    /// Dataset manifest, or a directory of annotation files.
    #[arg(long, value_name = "PATH")]
    pub annotations: PathBuf,
    /// Detections JSON: one `{"image", "detections"}` object or an array.
    #[arg(long, value_name = "FILE")]
    pub detections: PathBuf,
    #[arg(long, default_value = "h1")]
    pub heuristic: Heuristic,
    /// Occupancy threshold on the heuristic ratio, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Minimum detector confidence.
    #[arg(long, default_value_t = 0.5)]
    pub score_threshold: f64,
    /// Accepted detection labels.
    #[arg(long, value_delimiter = ',', default_value = "car,truck,bus")]
    pub labels: Vec<String>,
    /// Output directory for `predictions.jsonl` and predicted annotations.
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions JSON-lines file.
    #[arg(long, value_name = "FILE")]
    pub predictions: PathBuf,
    /// Ground-truth manifest or annotation directory.
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Split file from `spotcheck split`; adds one report per split.
    #[arg(long, value_name = "FILE")]
    pub splits: Option<PathBuf>,
    /// Include per-tag buckets.
    #[arg(long)]
    pub per_tag: bool,
    /// Whisker statistics of F1 over the first K splits.
    #[arg(long, value_name = "K", requires = "splits")]
    pub whiskers: Option<usize>,
    /// Probability threshold for `probability_occupied` predictions.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Report file (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Manifest or directory of quadrangle annotations.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output directory; mirrors the input layout.
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Manifest, directory, or single annotation file.
    pub path: PathBuf,
    /// Report unknown keys as warnings instead of violations.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PatchFormat {
    /// 8-bit PNG, before normalization.
    Png,
    /// Normalized float32 tensor file.
    Tensor,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "png")]
    pub format: PatchFormat,
    /// Patch side in pixels.
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE.0)]
    pub size: u32,
    /// Apply the seeded augmentation chain.
    #[arg(long)]
    pub augment: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    /// Skip lots with `occupied: null`.
    #[arg(long)]
    pub labeled_only: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Number of splits.
    #[arg(long, default_value_t = 5)]
    pub k: u32,
    #[arg(long, default_value = "6:1:3")]
    pub ratio: SplitRatio,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split file (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// One or more manifests; each becomes a column.
    #[arg(long, value_name = "PATH", required = true)]
    pub manifest: Vec<PathBuf>,
    /// JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Static files of the annotation UI, served under `/ui`.
    #[arg(long, value_name = "DIR")]
    pub ui_dir: Option<PathBuf>,
}

/// A failed run, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2: bad invocation or missing input.
    Usage(anyhow::Error),
    /// Exit 1: inputs exist but violate the schema or are inconsistent.
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Data(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn require_input(path: &Path) -> Outcome {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow!("input {} does not exist", path.display())))
    }
}

fn open_dataset(path: &Path) -> Result<Dataset, Failure> {
    require_input(path)?;
    Dataset::open(path).map_err(|e| Failure::Data(e.into()))
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Parses `args` (including the program name), applies `--config`, and
/// runs the subcommand. Human-readable output goes to `out`.
pub fn run_with_output<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = args.into_iter().map(Into::into).collect();
    let argv = match apply_config(&argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> Outcome {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Usage(anyhow!("--jobs must be at least 1")));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Data(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Decide(a) => cmd_decide(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Convert(a) => cmd_convert(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::ExtractPatches(a) => cmd_extract_patches(a, out),
        Command::Split(a) => cmd_split(a, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Serve(a) => cmd_serve(a, out),
    })
}

pub fn cmd_decide(a: &DecideArgs, out: &mut (dyn Write + Send)) -> Outcome {
    require_input(&a.detections)?;
    let dataset = open_dataset(&a.annotations)?;
    let params = DecisionParams {
        heuristic: a.heuristic,
        tau: a.tau,
        score_threshold: a.score_threshold,
        accepted_labels: a.labels.iter().cloned().collect(),
    };
    params.validate().map_err(|e| Failure::Usage(e.into()))?;
    let bytes = fs::read(&a.detections).with_context(|| format!("reading {}", a.detections.display()))?;
    let detections = parse_detections(&bytes).with_context(|| format!("in {}", a.detections.display()))?;

    let mut by_image: std::collections::HashMap<&str, &[Detection]> = detections
        .iter()
        .map(|d| (d.image.as_str(), d.detections.as_slice()))
        .collect();
    let known: std::collections::HashSet<&str> = dataset.images.iter().map(|i| i.image.as_str()).collect();
    for d in &detections {
        if !known.contains(d.image.as_str()) {
            log::warn!("detections for {} match no annotated image", d.image);
        }
    }
    let inputs: Vec<(&String, &ImageAnnotation, &[Detection])> = dataset
        .manifest
        .entries
        .iter()
        .zip(&dataset.images)
        .map(|(entry, img)| {
            let dets = by_image.remove(img.image.as_str()).unwrap_or_else(|| {
                log::warn!("no detections for {}; all its lots decide free", img.image);
                &[]
            });
            (entry, img, dets)
        })
        .collect();
    let decided = inputs
        .par_iter()
        .map(|(entry, img, dets)| {
            decide_image(img, dets, &params)
                .map(|d| (*entry, d))
                .with_context(|| format!("in {}", dataset.manifest.entry_path(entry).display()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    writeln!(out, "{:<40} {:>6} {:>9} {:>6}", "image", "lots", "occupied", "free")?;
    let (mut total_occ, mut total_free) = (0, 0);
    for (entry, d) in &decided {
        write_file(
            &a.output.join("annotations").join(entry),
            d.predicted.to_json().as_bytes(),
        )?;
        let occ = d.results.iter().filter(|r| r.decided == Decision::Occupied).count();
        let free = d.results.len() - occ;
        total_occ += occ;
        total_free += free;
        writeln!(
            out,
            "{:<40} {:>6} {:>9} {:>6}",
            d.predicted.image,
            d.results.len(),
            occ,
            free
        )?;
        records.extend(
            d.results
                .iter()
                .map(|r| PredictionRecord::from_decision(&d.predicted.image, r)),
        );
    }
    writeln!(
        out,
        "{:<40} {:>6} {:>9} {:>6}",
        "total",
        total_occ + total_free,
        total_occ,
        total_free
    )?;
    write_file(
        &a.output.join("predictions.jsonl"),
        write_predictions(&records).as_bytes(),
    )?;
    let manifest = DatasetManifest::new(
        dataset.manifest.name.clone(),
        "annotations",
        decided.iter().map(|(e, _)| (*e).clone()).collect(),
    );
    write_file(&a.output.join("manifest.json"), manifest.to_json().as_bytes())?;
    log::info!("wrote {} predictions to {}", records.len(), a.output.display());
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut (dyn Write + Send)) -> Outcome {
    require_input(&a.predictions)?;
    if let Some(s) = &a.splits {
        require_input(s)?;
    }
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(Failure::Usage(anyhow!("--threshold must lie in [0, 1]")));
    }
    if let Some(k) = a.whiskers {
        if k < 4 {
            return Err(Failure::Usage(anyhow!("--whiskers needs at least 4 splits, got {k}")));
        }
    }
    let dataset = open_dataset(&a.manifest)?;
    let text = fs::read_to_string(&a.predictions).with_context(|| format!("reading {}", a.predictions.display()))?;
    let mut predictions = parse_predictions(&text).with_context(|| format!("in {}", a.predictions.display()))?;
    // `decide` predicts every lot, labeled or not; lots without ground
    // truth cannot be scored, so they are dropped here rather than failing.
    let unlabeled: std::collections::HashSet<(&str, &str)> = dataset
        .images
        .iter()
        .flat_map(|img| {
            img.lots
                .iter()
                .filter(|l| !l.occupancy.is_labeled())
                .map(move |l| (img.image.as_str(), l.id.as_str()))
        })
        .collect();
    let before = predictions.len();
    predictions.retain(|p| !unlabeled.contains(&(p.image.as_str(), p.lot_id.as_str())));
    if predictions.len() < before {
        log::info!(
            "skipped {} prediction(s) for unlabeled lots",
            before - predictions.len()
        );
    }

    let mut report = match &a.splits {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let splits = parse_splits(&bytes).with_context(|| format!("in {}", path.display()))?;
            evaluate_with_splits(&predictions, &dataset.images, a.threshold, &splits, a.whiskers)
        }
        None => evaluate(&predictions, &dataset.images, a.threshold),
    }
    .map_err(|e| Failure::Data(e.into()))?;
    if !a.per_tag {
        report.per_tag = None;
        if let Some(splits) = &mut report.splits {
            for s in splits {
                s.per_tag.clear();
            }
        }
        if let Some(w) = &mut report.whiskers {
            w.per_tag_f1.clear();
        }
    }
    let json = report.to_json();
    match &a.output {
        Some(path) => {
            write_file(path, json.as_bytes())?;
            let f1 = report.overall.f1;
            writeln!(
                out,
                "{} lots, f1 {}",
                report.overall.n_samples,
                if f1.defined {
                    format!("{:.4}", f1.value)
                } else {
                    "undefined".into()
                }
            )?;
        }
        None => out.write_all(json.as_bytes())?,
    }
    Ok(())
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn cmd_convert(a: &ConvertArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let dataset = open_dataset(&a.input)?;
    if same_dir(&dataset.manifest.resolved_root(), &a.output) {
        return Err(Failure::Usage(anyhow!(
            "output directory must differ from the input root"
        )));
    }
    let converted = dataset
        .images
        .par_iter()
        .zip(&dataset.manifest.entries)
        .map(|(img, entry)| convert_quads_to_rects(img).with_context(|| format!("in {entry}")))
        .collect::<Result<Vec<_>, _>>()?;
    for (img, entry) in converted.iter().zip(&dataset.manifest.entries) {
        write_file(&a.output.join(entry), img.to_json().as_bytes())?;
    }
    let manifest = DatasetManifest::new(dataset.manifest.name.clone(), ".", dataset.manifest.entries.clone());
    write_file(&a.output.join("manifest.json"), manifest.to_json().as_bytes())?;
    writeln!(
        out,
        "converted {} annotation files into {}",
        converted.len(),
        a.output.display()
    )?;
    Ok(())
}

fn is_annotation_file(path: &Path) -> bool {
    path.is_file() && path.file_name().is_some_and(|n| n != "manifest.json")
}

pub fn cmd_validate(a: &ValidateArgs, out: &mut (dyn Write + Send)) -> Outcome {
    require_input(&a.path)?;
    let (files, violations) = if is_annotation_file(&a.path) {
        let bytes = fs::read(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
        let file = a.path.display().to_string();
        let found = match ImageAnnotation::from_json(&bytes) {
            Ok(_) => Vec::new(),
            Err(e) => e.violations.into_iter().map(|v| v.in_file(file.clone())).collect(),
        };
        (1, found)
    } else {
        let manifest = DatasetManifest::open(&a.path).map_err(|e| Failure::Data(e.into()))?;
        (manifest.entries.len(), validate_manifest(&manifest))
    };
    let (warnings, errors): (Vec<_>, Vec<_>) = violations
        .into_iter()
        .partition(|v| a.lenient && v.rule == Rule::UnknownField);
    for w in &warnings {
        writeln!(out, "warning: {w}")?;
    }
    for v in &errors {
        writeln!(out, "{v}")?;
    }
    writeln!(
        out,
        "{files} file(s) checked, {} violation(s), {} warning(s)",
        errors.len(),
        warnings.len()
    )?;
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(anyhow!("{} schema violation(s)", errors.len())))
    }
}

/// Keeps `[A-Za-z0-9_-]` and non-leading dots; everything else becomes
/// `%XX` per byte, so distinct ids give distinct, safe file names.
fn file_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, b) in s.bytes().enumerate() {
        let keep = b.is_ascii_alphanumeric() || b == b'_' || b == b'-' || (b == b'.' && i > 0);
        if keep {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn patch_stem(image: &str) -> PathBuf {
    let without_ext = match image.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() && !stem.ends_with('/') => stem,
        _ => image,
    };
    without_ext.split('/').map(file_component).collect()
}

fn occupancy_json(o: Occupancy) -> serde_json::Value {
    match o {
        Occupancy::Occupied => true.into(),
        Occupancy::Free => false.into(),
        Occupancy::Unlabeled => serde_json::Value::Null,
    }
}

pub fn cmd_extract_patches(a: &ExtractArgs, out: &mut (dyn Write + Send)) -> Outcome {
    if a.size == 0 {
        return Err(Failure::Usage(anyhow!("--size must be positive")));
    }
    let dataset = open_dataset(&a.manifest)?;
    let root = dataset.manifest.resolved_root();
    let cfg = AugmentationConfig {
        target_size: (a.size, a.size),
        ..if a.augment {
            AugmentationConfig::default()
        } else {
            AugmentationConfig::deterministic()
        }
    };
    let ext = match a.format {
        PatchFormat::Png => "png",
        PatchFormat::Tensor => "spt",
    };
    let per_image = dataset
        .images
        .par_iter()
        .map(|img| -> anyhow::Result<Vec<String>> {
            let path = root.join(&img.image);
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let frame = ImageBuffer::decode(&bytes).with_context(|| format!("decoding {}", path.display()))?;
            let mut index = Vec::new();
            for lot in &img.lots {
                if a.labeled_only && !lot.occupancy.is_labeled() {
                    continue;
                }
                let patch = extract_patch(&frame, lot, (a.size, a.size))
                    .with_context(|| format!("lot {:?} of {}", lot.id, img.image))?;
                let seed = SeedSpec::new(a.seed, img.image.clone(), lot.id.clone(), a.epoch);
                let rel = patch_stem(&img.image).join(format!("{}.{ext}", file_component(&lot.id)));
                let target = a.output.join(&rel);
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent)?;
                }
                match a.format {
                    PatchFormat::Png => {
                        let img_out = if a.augment {
                            let aug = apply_augmentations(&patch, &cfg, &seed)?;
                            denormalize(&aug, cfg.normalize_mean, cfg.normalize_std)
                        } else {
                            patch
                        };
                        fs::write(&target, img_out.encode_png()?)?;
                    }
                    PatchFormat::Tensor => {
                        let aug = apply_augmentations(&patch, &cfg, &seed)?;
                        let mut buf = Vec::new();
                        aug.write_tensor(&mut buf)?;
                        fs::write(&target, buf)?;
                    }
                }
                let rel_str = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                index.push(
                    serde_json::json!({
                        "image": img.image,
                        "lot_id": lot.id,
                        "file": rel_str,
                        "occupied": occupancy_json(lot.occupancy),
                    })
                    .to_string(),
                );
            }
            Ok(index)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lines: Vec<String> = per_image.into_iter().flatten().collect();
    let mut index = lines.join("\n");
    if !index.is_empty() {
        index.push('\n');
    }
    write_file(&a.output.join("patches.jsonl"), index.as_bytes())?;
    writeln!(out, "wrote {} patches to {}", lines.len(), a.output.display())?;
    Ok(())
}

pub fn cmd_split(a: &SplitArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let dataset = open_dataset(&a.manifest)?;
    let splits = make_splits(&dataset.images, a.k, a.ratio, a.seed).map_err(|e| Failure::Data(e.into()))?;
    let text = write_splits(&splits);
    match &a.output {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            let sizes = a.ratio.sizes(dataset.images.len());
            writeln!(
                out,
                "{} split(s) of {} images: train {}, val {}, test {}",
                splits.len(),
                dataset.images.len(),
                sizes[0],
                sizes[1],
                sizes[2]
            )?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let mut columns = Vec::with_capacity(a.manifest.len());
    for path in &a.manifest {
        let dataset = open_dataset(path)?;
        columns.push((
            dataset.manifest.name.clone(),
            DatasetStats::from_images(&dataset.images),
        ));
    }
    if a.json {
        let map: serde_json::Map<String, serde_json::Value> = columns
            .iter()
            .map(|(name, s)| (name.clone(), serde_json::to_value(s).expect("stats serialize")))
            .collect();
        let mut text = serde_json::to_string_pretty(&map).expect("stats serialize");
        text.push('\n');
        out.write_all(text.as_bytes())?;
        return Ok(());
    }
    write!(out, "{:<16}", "property")?;
    for (name, _) in &columns {
        write!(out, " {name:>10}")?;
    }
    writeln!(out)?;
    write!(out, "{:<16}", "total")?;
    for (_, s) in &columns {
        write!(out, " {:>10}", s.total)?;
    }
    writeln!(out)?;
    for tag in VisualTag::ALL {
        write!(out, "{:<16}", tag.as_str())?;
        for (_, s) in &columns {
            write!(out, " {:>10}", s.count(tag))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn cmd_serve(a: &ServeArgs, out: &mut (dyn Write + Send)) -> Outcome {
    require_input(&a.manifest)?;
    if let Some(ui) = &a.ui_dir {
        require_input(ui)?;
    }
    let state = spotcheck_service::ServiceState::open(&a.manifest).map_err(|e| Failure::Data(e.into()))?;
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .or_else(|_| {
            std::net::ToSocketAddrs::to_socket_addrs(&(a.host.as_str(), a.port))
                .ok()
                .and_then(|mut it| it.next())
                .ok_or(())
        })
        .map_err(|_| Failure::Usage(anyhow!("cannot resolve host {:?}", a.host)))?;
    writeln!(out, "serving {} on http://{addr}/", a.manifest.display())?;
    out.flush()?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(spotcheck_service::serve(addr, Arc::new(state), a.ui_dir.as_deref()))?;
    Ok(())
}
