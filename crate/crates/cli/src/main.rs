//! `loggauge`: dataset statistics, annotation conversion, NMS, diameter
//! binning and detection evaluation for timber log detectors.
//!
//! Exit codes: 0 success, 1 an `--assert` floor was not met, 2 bad input or
//! usage.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loggauge_core::{ApMethod, BinThresholds};

use crate::commands::Assertion;
use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "loggauge", version, about = "Timber log detection evaluation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file (keys: postprocess, bin_thresholds, iou_main,
    /// strict_parsing, output_path). Flags override it.
    #[arg(long, global = true, env = "LOGGAUGE_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write the result here instead of stdout (a directory for `convert --to yolo`).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Emit machine-readable JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,

    /// Reject unknown fields and metadata lines in detection files [default].
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,

    /// Skip unknown fields (with a warning) and `#` metadata lines.
    #[arg(long, global = true)]
    pub lenient: bool,

    /// Omit the `generated_at` field so reports are byte-reproducible.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    /// Worker threads for per-image work; 0 picks the number of CPUs.
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a dataset: counts, object area share, pixel extent ranges.
    Stats {
        /// Manifest JSON (or a COCO file with --coco).
        input: PathBuf,
        /// Read `input` as a COCO-style dataset instead of a manifest.
        #[arg(long)]
        coco: bool,
    },
    /// Evaluate detections against ground truth and print an EvalReport.
    Eval {
        manifest: PathBuf,
        detections: PathBuf,
        #[command(flatten)]
        post: PostArgs,
        /// IoU threshold for precision/recall/F1 and the bin report [default: 0.5].
        #[arg(long, value_name = "IOU")]
        iou: Option<f64>,
        /// Extra AP thresholds as START:END:STEP, reported next to 0.50..0.95.
        #[arg(long, value_name = "START:END:STEP")]
        iou_range: Option<String>,
        /// Diameter bin thresholds in px as THIN_MAX,MEDIUM_MAX [default: 30,60].
        #[arg(long, value_name = "THIN,MEDIUM")]
        thresholds: Option<BinThresholds>,
        /// Use detections as given, without confidence filtering or NMS.
        #[arg(long)]
        no_postprocess: bool,
        #[arg(long, value_enum, default_value_t = ApChoice::Interp101)]
        ap_method: ApChoice,
        /// Fail with exit code 1 unless METRIC>=VALUE (or METRIC<=VALUE) holds.
        /// Metrics: precision, recall, f1, map50, map5095, bin_accuracy, ap@IOU.
        #[arg(long = "assert", value_name = "METRIC>=VALUE")]
        asserts: Vec<Assertion>,
    },
    /// Assign diameter bins from box widths; with ground truth, score them.
    Bin {
        manifest: PathBuf,
        detections: PathBuf,
        /// Diameter bin thresholds in px as THIN_MAX,MEDIUM_MAX [default: 30,60].
        #[arg(long, value_name = "THIN,MEDIUM")]
        thresholds: Option<BinThresholds>,
        /// IoU threshold used to pair detections with ground truth [default: 0.5].
        #[arg(long, value_name = "IOU")]
        iou: Option<f64>,
        /// Only print the histogram; do not read ground truth.
        #[arg(long)]
        no_gt: bool,
    },
    /// Confidence filtering and greedy NMS, written as interchange JSONL.
    Nms {
        detections: PathBuf,
        manifest: PathBuf,
        #[command(flatten)]
        post: PostArgs,
    },
    /// Convert annotations between COCO JSON and YOLO text + manifest.
    Convert {
        /// COCO JSON file, or a manifest when --from yolo.
        input: PathBuf,
        #[arg(long, value_enum)]
        from: Format,
        #[arg(long, value_enum)]
        to: Format,
    },
}

#[derive(Debug, Args)]
pub struct PostArgs {
    /// Confidence threshold [default: 0.25].
    #[arg(long, value_name = "CONF")]
    pub conf: Option<f64>,
    /// NMS IoU threshold [default: 0.45].
    #[arg(long, value_name = "IOU")]
    pub nms_iou: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Coco,
    Yolo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApChoice {
    /// 101-point interpolated envelope.
    Interp101,
    /// Exact area under the envelope.
    AllPoint,
}

impl From<ApChoice> for ApMethod {
    fn from(c: ApChoice) -> Self {
        match c {
            ApChoice::Interp101 => ApMethod::Interp101,
            ApChoice::AllPoint => ApMethod::AllPoint,
        }
    }
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            output_path: self.common.out.clone(),
            strict_parsing: match (self.common.strict, self.common.lenient) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
            ..Overrides::default()
        };
        match &self.command {
            Command::Eval {
                post, iou, thresholds, ..
            } => {
                o.conf_threshold = post.conf;
                o.nms_iou_threshold = post.nms_iou;
                o.iou_main = *iou;
                o.bin_thresholds = *thresholds;
            }
            Command::Bin { thresholds, iou, .. } => {
                o.iou_main = *iou;
                o.bin_thresholds = *thresholds;
            }
            Command::Nms { post, .. } => {
                o.conf_threshold = post.conf;
                o.nms_iou_threshold = post.nms_iou;
            }
            Command::Stats { .. } | Command::Convert { .. } => {}
        }
        o
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let outcome = RunConfig::resolve(cli.common.config.as_deref(), &cli.overrides()).and_then(|cfg| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build()?
            .install(|| commands::run(&cli, &cfg))
    });
    match outcome {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::AssertionFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
