//! Evaluation and data tooling for timber log detection.
//!
//! The crate covers everything downstream of the neural detector: reading
//! YOLO/COCO annotations and line-delimited JSON detections, confidence
//! filtering and NMS, width-based diameter binning, detection metrics
//! (precision/recall, mAP@0.5, mAP@0.5:0.95, bin accuracy) and dataset
//! statistics.

pub mod annot_io;
pub mod binning;
pub mod dataset_stats;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod postprocess;

pub use annot_io::{Dataset, DatasetManifest, Detection, GroundTruth, ManifestEntry, ParseMode};
pub use binning::{assign_bin, BinReport, BinThresholds, DiameterBin};
pub use dataset_stats::{compute_stats, DatasetStats};
pub use error::{Error, Result};
pub use geometry::{iou, ImageDims, NormBox, PixelBox};
pub use metrics::{evaluate, ApMethod, EvalOptions, EvalReport, MatchSet, PRPoint};
pub use postprocess::PostprocessParams;
