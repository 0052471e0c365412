//! `pairhold` command line: validate datasets, dump candidate pairs, run
//! the rule baselines, train and apply the geometric pair classifier,
//! score predictions against ground truth, render scene overlays, and
//! generate synthetic fixtures.
//!
//! Every command is a pure function of its input files, flags, and seed:
//! identical invocations produce byte-identical outputs. `PAIRHOLD_LOG`
//! controls log verbosity (default `warn`); logs go to stderr so piped
//! stdout stays machine-readable.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or file-format
//! error, 3 configuration error, 4 numeric divergence.

mod overlay;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use pairhold_core::baselines::all_hand_keypoints;
use pairhold_core::{
    annotated_firearms, bcfd_associate, bcfd_classify, build_training_set,
    classification_accuracy, enumerate_pairs, evaluate, generate_fixture, hfpd_predict,
    hifb_classify, load_dataset, load_model, load_predictions, ohfb_associate,
    render_accuracy_table, render_eval_table, save_dataset, save_model, save_predictions,
    save_report, split_images, train, BBox, BcfdConfig, Error, FirearmClass, FirearmDetection,
    FixtureConfig, GroundTruthSet, HifbConfig, ImageRecord, OhfbConfig, OverlapMetric,
    PairPrediction, Result, Severity, TrainConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "pairhold",
    version,
    about = "Associate detected humans with detected firearms and decide who is carrying what"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset file and report every violation found
    Validate(ValidateArgs),
    /// Dump every candidate human-firearm pair as JSON lines
    Pair(PairArgs),
    /// Run a rule baseline, writing predictions and accuracy where defined
    Baseline(BaselineArgs),
    /// Train the geometric pair classifier
    Train(TrainArgs),
    /// Score candidate pairs with a trained model
    Predict(PredictArgs),
    /// Evaluate a prediction file against dataset ground truth
    Eval(EvalArgs),
    /// Render one SVG per image: humans blue, firearms green, pairs red
    Overlay(OverlayArgs),
    /// Generate a synthetic dataset with known carrier geometry
    GenFixture(GenFixtureArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset file (JSON lines)
    dataset: PathBuf,
}

#[derive(Args)]
struct PairArgs {
    /// Dataset file (JSON lines)
    dataset: PathBuf,
    /// Write the dump here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineMethod {
    /// Hand keypoints inside the firearm box
    Hifb,
    /// Per-pose in-box hand count picks the carrier
    Bcfd,
    /// Best-overlapping human per firearm
    Ohfb,
}

impl BaselineMethod {
    fn label(self) -> &'static str {
        match self {
            BaselineMethod::Hifb => "hifb",
            BaselineMethod::Bcfd => "bcfd",
            BaselineMethod::Ohfb => "ohfb",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Iou,
    Enclosure,
}

impl From<MetricArg> for OverlapMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Iou => OverlapMetric::Iou,
            MetricArg::Enclosure => OverlapMetric::Enclosure,
        }
    }
}

#[derive(Args)]
struct BaselineArgs {
    /// Which rule to run
    #[arg(value_enum)]
    method: BaselineMethod,
    /// Dataset file (JSON lines)
    dataset: PathBuf,
    /// hifb: keypoint confidence must be strictly above this
    #[arg(long, default_value_t = HifbConfig::default().alpha)]
    alpha: f64,
    /// bcfd: minimum in-box hand keypoints for a carrier
    #[arg(long, default_value_t = BcfdConfig::default().beta)]
    beta: usize,
    /// ohfb: how overlap is measured
    #[arg(long, value_enum, default_value_t = MetricArg::Enclosure)]
    overlap_metric: MetricArg,
    /// ohfb: drop associations under this overlap
    #[arg(long, default_value_t = OhfbConfig::default().min_overlap)]
    min_overlap: f64,
    /// Prediction file to write (JSON lines)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file (JSON lines)
    dataset: PathBuf,
    /// Fraction of images to train on; 1.0 uses every image
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Learning rate
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    /// Momentum coefficient
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    /// Number of passes over the training set
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    /// Samples per SGD step
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    /// Seed for the image split and batch shuffling
    #[arg(long)]
    seed: u64,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Dataset file (JSON lines)
    dataset: PathBuf,
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Keep pairs whose carried probability reaches this
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Prediction file to write (JSON lines)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction file (JSON lines)
    predictions: PathBuf,
    /// Dataset file holding the ground truth
    dataset: PathBuf,
    /// Minimum IoU on both boxes for a prediction to match
    #[arg(long, default_value_t = pairhold_core::DEFAULT_IOU_THRESH)]
    threshold: f64,
    /// Fail on predictions for images absent from the dataset (default)
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Count predictions for unknown images as false positives
    #[arg(long)]
    lenient: bool,
    /// Also write the report as one JSON line
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverlayArgs {
    /// Dataset file (JSON lines)
    dataset: PathBuf,
    /// Prediction file (JSON lines)
    predictions: PathBuf,
    /// Directory for the SVG files, created if missing
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenFixtureArgs {
    /// Number of images to generate
    #[arg(long, default_value_t = FixtureConfig::default().num_images)]
    images: usize,
    /// Frame width in pixels
    #[arg(long, default_value_t = FixtureConfig::default().frame_width)]
    width: f64,
    /// Frame height in pixels
    #[arg(long, default_value_t = FixtureConfig::default().frame_height)]
    height: f64,
    /// Carriers per image, 1 to this
    #[arg(long, default_value_t = FixtureConfig::default().max_carriers)]
    max_carriers: usize,
    /// Free-standing bystanders per image, 0 to this
    #[arg(long, default_value_t = FixtureConfig::default().max_bystanders)]
    max_bystanders: usize,
    /// Probability that a carrier gets a better-enclosing flanker
    #[arg(long, default_value_t = FixtureConfig::default().crowded_fraction)]
    crowded: f64,
    /// Detection jitter amplitude in pixels
    #[arg(long, default_value_t = FixtureConfig::default().jitter)]
    jitter: f64,
    /// Never place uncarried firearms on bystanders
    #[arg(long)]
    no_background_firearms: bool,
    /// Seed for scene layout and jitter
    #[arg(long)]
    seed: u64,
    /// Dataset file to write (JSON lines)
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PAIRHOLD_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Maps errors onto the documented exit codes: 2 for I/O and file-format
/// problems, 3 for bad configuration, 4 for numeric divergence, 1 for
/// everything the data itself can be blamed for.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format { .. } => 2,
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } => 3,
        Error::Divergence(_) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Pair(args) => cmd_pair(&args),
        Command::Baseline(args) => cmd_baseline(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Overlay(args) => cmd_overlay(&args),
        Command::GenFixture(args) => cmd_gen_fixture(&args),
    }
}

/// Loads a dataset for processing: clip warnings are logged and tolerated,
/// rejected lines abort with a validation error.
fn load_records(path: &Path) -> Result<Vec<ImageRecord>> {
    let loaded = load_dataset(path)?;
    for issue in &loaded.report.issues {
        if issue.severity == Severity::Warning {
            warn!("{}: line {}: {}", path.display(), issue.line, issue.detail);
        }
    }
    loaded.into_strict()
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8> {
    let loaded = load_dataset(&args.dataset)?;
    for issue in &loaded.report.issues {
        let severity = match issue.severity {
            Severity::Warning => "warning",
            Severity::Rejected => "rejected",
        };
        let image = issue.image_id.as_deref().unwrap_or("?");
        println!("line {:>4} [{severity}] image {image}: {}", issue.line, issue.detail);
    }
    let warnings = loaded.report.issues.len() - loaded
        .report
        .issues
        .iter()
        .filter(|i| i.severity == Severity::Rejected)
        .count();
    println!(
        "{} record(s) loaded, {} warning(s), {} rejected line(s)",
        loaded.records.len(),
        warnings,
        loaded.report.rejected_lines(),
    );
    Ok(if loaded.report.is_clean() { 0 } else { 1 })
}

/// One line of the candidate-pair dump.
#[derive(Serialize)]
struct PairRow<'a> {
    image_id: &'a str,
    human_index: usize,
    firearm_index: usize,
    human_bbox: BBox,
    firearm_bbox: BBox,
    paired_bbox: BBox,
    firearm_class: FirearmClass,
}

fn cmd_pair(args: &PairArgs) -> Result<u8> {
    let records = load_records(&args.dataset)?;
    let mut buf = Vec::new();
    let mut count = 0usize;
    for record in &records {
        for pair in enumerate_pairs(record)? {
            let row = PairRow {
                image_id: &record.image_id,
                human_index: pair.human_index,
                firearm_index: pair.firearm_index,
                human_bbox: pair.human_bbox,
                firearm_bbox: pair.firearm_bbox,
                paired_bbox: pair.paired_bbox,
                firearm_class: pair.firearm_class,
            };
            serde_json::to_writer(&mut buf, &row)
                .map_err(|e| Error::Format { path: "pair dump".into(), detail: e.to_string() })?;
            buf.push(b'\n');
            count += 1;
        }
    }
    match &args.out {
        Some(path) => {
            fs::write(path, &buf)?;
            println!("wrote {} candidate pair(s) to {}", count, path.display());
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(0)
}

fn cmd_baseline(args: &BaselineArgs) -> Result<u8> {
    let records = load_records(&args.dataset)?;

    let mut preds: Vec<PairPrediction> = Vec::new();
    match args.method {
        BaselineMethod::Ohfb => {
            let cfg = OhfbConfig { metric: args.overlap_metric.into(), min_overlap: args.min_overlap };
            cfg.validate()?;
            for record in &records {
                preds.extend(ohfb_associate(record, &cfg)?);
            }
        }
        BaselineMethod::Bcfd => {
            let cfg = BcfdConfig { beta: args.beta };
            cfg.validate()?;
            for record in &records {
                preds.extend(bcfd_associate(record, &cfg));
            }
        }
        // hifb decides carried per firearm without picking a human, so it
        // has no associations to write; the file is still produced.
        BaselineMethod::Hifb => {}
    }
    save_predictions(&preds, &args.out)?;
    println!("wrote {} prediction(s) to {}", preds.len(), args.out.display());

    // Per-firearm carried flags over the annotated firearms, for the
    // classification-accuracy view of hifb and bcfd.
    if args.method != BaselineMethod::Ohfb {
        let hifb_cfg = HifbConfig { alpha: args.alpha, ..HifbConfig::default() };
        hifb_cfg.validate()?;
        let bcfd_cfg = BcfdConfig { beta: args.beta };
        bcfd_cfg.validate()?;
        let mut pred_flags = Vec::new();
        let mut gt_flags = Vec::new();
        let mut classes = Vec::new();
        for record in &records {
            let hands = all_hand_keypoints(record);
            for af in annotated_firearms(record) {
                let det = FirearmDetection { bbox: af.bbox, class: af.class, score: 1.0 };
                let carried = match args.method {
                    BaselineMethod::Hifb => hifb_classify(&det, &hands, &hifb_cfg),
                    BaselineMethod::Bcfd => bcfd_classify(&det, &record.poses, &bcfd_cfg).0,
                    BaselineMethod::Ohfb => unreachable!(),
                };
                pred_flags.push(carried);
                gt_flags.push(af.carried);
                classes.push(af.class);
            }
        }
        let report = classification_accuracy(&pred_flags, &gt_flags, &classes)?;
        print!("{}", render_accuracy_table(args.method.label(), &report));
    }
    Ok(0)
}

fn cmd_train(args: &TrainArgs) -> Result<u8> {
    let records = load_records(&args.dataset)?;
    let train_records = if args.split == 1.0 {
        records
    } else {
        let (train_records, held_out) = split_images(&records, args.split, args.seed)?;
        info!(
            "split {} image(s) into {} train / {} held out",
            train_records.len() + held_out.len(),
            train_records.len(),
            held_out.len(),
        );
        train_records
    };
    let samples = build_training_set(&train_records)?;
    info!("training on {} pair sample(s)", samples.len());
    let cfg = TrainConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        shuffle: true,
    };
    let output = train(&samples, &cfg)?;
    for (epoch, loss) in output.epoch_loss.iter().enumerate() {
        println!("epoch {:>3}: mean loss {loss:.6}", epoch + 1);
    }
    save_model(&output.model, &args.out)?;
    println!("wrote model to {}", args.out.display());
    Ok(0)
}

fn cmd_predict(args: &PredictArgs) -> Result<u8> {
    let records = load_records(&args.dataset)?;
    let model = load_model(&args.model)?;
    let mut preds = Vec::new();
    for record in &records {
        preds.extend(hfpd_predict(record, &model, args.threshold)?);
    }
    save_predictions(&preds, &args.out)?;
    println!("wrote {} prediction(s) to {}", preds.len(), args.out.display());
    Ok(0)
}

fn cmd_eval(args: &EvalArgs) -> Result<u8> {
    let records = load_records(&args.dataset)?;
    let preds = load_predictions(&args.predictions)?;
    let gts = GroundTruthSet::from_records(&records);
    let report = evaluate(&preds, &gts, args.threshold, !args.lenient)?;
    let method = args
        .predictions
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("predictions");
    print!("{}", render_eval_table(method, &report));
    for (name, class) in [("gun", &report.gun), ("rifle", &report.rifle), ("pooled", &report.pooled)] {
        println!(
            "{name}: {} gt, {} tp, {} fp, {} fn",
            class.num_gt, class.true_positives, class.false_positives, class.false_negatives,
        );
    }
    if let Some(path) = &args.out {
        save_report(&report, path)?;
        println!("wrote report to {}", path.display());
    }
    Ok(0)
}

fn cmd_overlay(args: &OverlayArgs) -> Result<u8> {
    let records = load_records(&args.dataset)?;
    let preds = load_predictions(&args.predictions)?;
    let known: HashSet<&str> = records.iter().map(|r| r.image_id.as_str()).collect();
    let mut by_image: HashMap<&str, Vec<&PairPrediction>> = HashMap::new();
    for pred in &preds {
        if known.contains(pred.image_id.as_str()) {
            by_image.entry(pred.image_id.as_str()).or_default().push(pred);
        } else {
            warn!("prediction for unknown image {} skipped", pred.image_id);
        }
    }
    fs::create_dir_all(&args.out)?;
    let mut used: HashSet<String> = HashSet::new();
    for record in &records {
        let image_preds = by_image.get(record.image_id.as_str()).map_or(&[][..], Vec::as_slice);
        let svg = overlay::render_overlay(record, image_preds);
        let base = overlay::sanitize_stem(&record.image_id);
        let mut stem = base.clone();
        let mut n = 1usize;
        while !used.insert(stem.clone()) {
            n += 1;
            stem = format!("{base}_{n}");
        }
        fs::write(args.out.join(format!("{stem}.svg")), svg)?;
    }
    println!("wrote {} overlay(s) to {}", records.len(), args.out.display());
    Ok(0)
}

fn cmd_gen_fixture(args: &GenFixtureArgs) -> Result<u8> {
    let cfg = FixtureConfig {
        num_images: args.images,
        frame_width: args.width,
        frame_height: args.height,
        max_carriers: args.max_carriers,
        max_bystanders: args.max_bystanders,
        crowded_fraction: args.crowded,
        background_firearms: !args.no_background_firearms,
        jitter: args.jitter,
    };
    let records = generate_fixture(&cfg, args.seed)?;
    save_dataset(&records, &args.out)?;
    println!("wrote {} image record(s) to {}", records.len(), args.out.display());
    Ok(0)
}
