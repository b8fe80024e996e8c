use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use loggauge_core::{BinThresholds, PostprocessParams};
use serde::{Deserialize, Serialize};

/// Effective settings for one run: built-in defaults, then the config file,
/// then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub postprocess: PostprocessParams,
    pub bin_thresholds: BinThresholds,
    pub iou_main: f64,
    pub strict_parsing: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            postprocess: PostprocessParams::default(),
            bin_thresholds: BinThresholds::default(),
            iou_main: 0.5,
            strict_parsing: true,
            output_path: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialPostprocess {
    conf_threshold: Option<f64>,
    nms_iou_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialThresholds {
    thin_max: Option<f64>,
    medium_max: Option<f64>,
}

/// On-disk form; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    postprocess: Option<PartialPostprocess>,
    bin_thresholds: Option<PartialThresholds>,
    iou_main: Option<f64>,
    strict_parsing: Option<bool>,
    output_path: Option<PathBuf>,
}

/// Values given on the command line. `None` leaves the lower layer alone.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub conf_threshold: Option<f64>,
    pub nms_iou_threshold: Option<f64>,
    pub bin_thresholds: Option<BinThresholds>,
    pub iou_main: Option<f64>,
    pub strict_parsing: Option<bool>,
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(config_path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let file: FileConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            cfg.apply_file(file, path.parent().unwrap_or(Path::new(".")));
        }
        cfg.apply_flags(flags);
        cfg.postprocess.validate()?;
        cfg.bin_thresholds.validate()?;
        if !(0.0..=1.0).contains(&cfg.iou_main) {
            anyhow::bail!("iou_main = {} is outside [0, 1]", cfg.iou_main);
        }
        Ok(cfg)
    }

    fn apply_file(&mut self, file: FileConfig, base: &Path) {
        if let Some(p) = file.postprocess {
            if let Some(v) = p.conf_threshold {
                self.postprocess.conf_threshold = v;
            }
            if let Some(v) = p.nms_iou_threshold {
                self.postprocess.nms_iou_threshold = v;
            }
        }
        if let Some(t) = file.bin_thresholds {
            if let Some(v) = t.thin_max {
                self.bin_thresholds.thin_max = v;
            }
            if let Some(v) = t.medium_max {
                self.bin_thresholds.medium_max = v;
            }
        }
        if let Some(v) = file.iou_main {
            self.iou_main = v;
        }
        if let Some(v) = file.strict_parsing {
            self.strict_parsing = v;
        }
        if let Some(p) = file.output_path {
            self.output_path = Some(base.join(p));
        }
    }

    fn apply_flags(&mut self, f: &Overrides) {
        if let Some(v) = f.conf_threshold {
            self.postprocess.conf_threshold = v;
        }
        if let Some(v) = f.nms_iou_threshold {
            self.postprocess.nms_iou_threshold = v;
        }
        if let Some(t) = f.bin_thresholds {
            self.bin_thresholds = t;
        }
        if let Some(v) = f.iou_main {
            self.iou_main = v;
        }
        if let Some(v) = f.strict_parsing {
            self.strict_parsing = v;
        }
        if let Some(p) = &f.output_path {
            self.output_path = Some(p.clone());
        }
    }
}
