use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use loggauge_core::annot_io::{
    load_dataset, load_detections_file, load_manifest_file, parse_coco_dataset, read_file, write_coco_dataset,
    write_detections, write_manifest, write_yolo_gt,
};
use loggauge_core::binning::{bin_confusion, bin_detections, BinHistogram};
use loggauge_core::metrics::{evaluate, iou_key, match_image, EvalOptions, EvalReport};
use loggauge_core::postprocess::postprocess;
use loggauge_core::{compute_stats, Dataset, DatasetManifest, Detection, DiameterBin, ManifestEntry, ParseMode};
use serde_json::json;

use crate::config::RunConfig;
use crate::{Cli, Command, Format};

pub enum Outcome {
    Success,
    AssertionFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    AtLeast,
    AtMost,
}

/// `METRIC>=VALUE` or `METRIC<=VALUE`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    metric: String,
    cmp: Cmp,
    value: f64,
}

impl FromStr for Assertion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (metric, cmp, value) = if let Some((m, v)) = s.split_once(">=") {
            (m, Cmp::AtLeast, v)
        } else if let Some((m, v)) = s.split_once("<=") {
            (m, Cmp::AtMost, v)
        } else {
            return Err(format!("expected METRIC>=VALUE or METRIC<=VALUE, got {s:?}"));
        };
        let value: f64 = value.trim().parse().map_err(|_| format!("{value:?} is not a number"))?;
        Ok(Self {
            metric: metric.trim().to_string(),
            cmp,
            value,
        })
    }
}

impl Assertion {
    fn lookup(&self, r: &EvalReport) -> Result<Option<f64>> {
        Ok(match self.metric.as_str() {
            "precision" => Some(r.precision),
            "recall" => Some(r.recall),
            "f1" => Some(r.f1),
            "map50" => Some(r.map50),
            "map5095" => Some(r.map5095),
            "bin_accuracy" => r.bin_report.bin_accuracy,
            m => match m.strip_prefix("ap@") {
                Some(t) => {
                    let t: f64 = t.parse().map_err(|_| anyhow!("bad IoU in assertion metric {m:?}"))?;
                    Some(
                        *r.ap_per_iou
                            .get(&iou_key(t))
                            .ok_or_else(|| anyhow!("no AP computed at IoU {t}"))?,
                    )
                }
                None => bail!("unknown metric {m:?} in --assert"),
            },
        })
    }

    /// Undefined metrics never satisfy an assertion.
    fn holds(&self, r: &EvalReport) -> Result<bool> {
        Ok(match self.lookup(r)? {
            None => false,
            Some(v) => match self.cmp {
                Cmp::AtLeast => v >= self.value,
                Cmp::AtMost => v <= self.value,
            },
        })
    }
}

fn parse_iou_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("--iou-range expects START:END:STEP, got {s:?}"))?;
    let [start, end, step] = parts[..] else {
        bail!("--iou-range expects START:END:STEP, got {s:?}");
    };
    if step.is_nan() || step <= 0.0 || start > end || start < 0.0 || end > 1.0 {
        bail!("--iou-range {s:?} must satisfy 0 <= START <= END <= 1 and STEP > 0");
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| ((start + k as f64 * step) * 1e6).round() / 1e6)
        .collect())
}

fn parse_mode(cfg: &RunConfig) -> ParseMode {
    if cfg.strict_parsing {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output_path {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn load_ground_truth(manifest: &Path) -> Result<Dataset> {
    let m = load_manifest_file(manifest)?;
    Ok(load_dataset(m)?)
}

pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome> {
    match &cli.command {
        Command::Stats { input, coco } => {
            let dataset = if *coco {
                parse_coco_dataset(&read_file(input)?).map_err(|e| e.in_file(input.display().to_string()))?
            } else {
                load_ground_truth(input)?
            };
            let stats = compute_stats(&dataset)?;
            let text = if cli.common.json {
                serde_json::to_string_pretty(&stats)? + "\n"
            } else {
                stats.to_string()
            };
            emit(cfg, &text)?;
            Ok(Outcome::Success)
        }
        Command::Eval {
            manifest,
            detections,
            iou_range,
            no_postprocess,
            ap_method,
            asserts,
            ..
        } => {
            let dataset = load_ground_truth(manifest)?;
            let dets = load_detections_file(detections, parse_mode(cfg))?;
            let opts = EvalOptions {
                params: cfg.postprocess,
                apply_postprocess: !no_postprocess,
                bin_thresholds: cfg.bin_thresholds,
                iou_main: cfg.iou_main,
                ap_method: (*ap_method).into(),
                extra_iou_thresholds: iou_range
                    .as_deref()
                    .map(parse_iou_range)
                    .transpose()?
                    .unwrap_or_default(),
            };
            let mut report = evaluate(&dataset, &dets, &opts)?;
            if !cli.common.no_timestamp {
                report.generated_at = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
            }
            emit(cfg, &(serde_json::to_string_pretty(&report)? + "\n"))?;

            let mut failed = false;
            for a in asserts {
                if !a.holds(&report)? {
                    eprintln!("assertion failed: {} (value {:?})", a.metric, a.lookup(&report)?);
                    failed = true;
                }
            }
            Ok(if failed {
                Outcome::AssertionFailed
            } else {
                Outcome::Success
            })
        }
        Command::Bin {
            manifest,
            detections,
            no_gt,
            ..
        } => {
            let dets = load_detections_file(detections, parse_mode(cfg))?;
            let (manifest, dataset) = if *no_gt {
                (load_manifest_file(manifest)?, None)
            } else {
                let ds = load_ground_truth(manifest)?;
                (ds.manifest.clone(), Some(ds))
            };
            let binned = bin_detections(&dets, &manifest, &cfg.bin_thresholds)?;
            let histogram = BinHistogram::from_bins(binned.iter().map(|(_, b)| *b));
            let report = match &dataset {
                Some(ds) => Some(matched_bin_report(ds, &dets, cfg)?),
                None => None,
            };
            let text = if cli.common.json {
                let v = json!({
                    "bin_thresholds": cfg.bin_thresholds,
                    "histogram": histogram,
                    "detections": dets.len(),
                    "iou_main": report.as_ref().map(|_| cfg.iou_main),
                    "bin_report": report,
                });
                serde_json::to_string_pretty(&v)? + "\n"
            } else {
                bin_table(&histogram, report.as_ref(), cfg)
            };
            emit(cfg, &text)?;
            Ok(Outcome::Success)
        }
        Command::Nms {
            detections, manifest, ..
        } => {
            let manifest = load_manifest_file(manifest)?;
            let dets = load_detections_file(detections, parse_mode(cfg))?;
            let kept = postprocess(&dets, &manifest, &cfg.postprocess)?;
            log::info!("kept {} of {} detections", kept.len(), dets.len());
            emit(cfg, &write_detections(&kept))?;
            Ok(Outcome::Success)
        }
        Command::Convert { input, from, to } => {
            let dataset = match from {
                Format::Coco => {
                    parse_coco_dataset(&read_file(input)?).map_err(|e| e.in_file(input.display().to_string()))?
                }
                Format::Yolo => load_ground_truth(input)?,
            };
            match to {
                Format::Coco => emit(cfg, &(write_coco_dataset(&dataset)? + "\n"))?,
                Format::Yolo => {
                    let dir = cfg
                        .output_path
                        .as_deref()
                        .ok_or_else(|| anyhow!("--to yolo needs --out DIR"))?;
                    write_yolo_tree(&dataset, dir)?;
                }
            }
            Ok(Outcome::Success)
        }
    }
}

fn matched_bin_report(ds: &Dataset, dets: &[Detection], cfg: &RunConfig) -> Result<loggauge_core::BinReport> {
    let mut per_image: BTreeMap<&str, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        per_image.entry(d.image_id.as_str()).or_default().push(d.clone());
    }
    let mut pairs = Vec::new();
    for (entry, gt) in ds.images() {
        let image_dets = per_image.remove(entry.image_id.as_str()).unwrap_or_default();
        let m = match_image(gt, &image_dets, entry.dims, cfg.iou_main)?;
        pairs.extend(m.pairs.into_iter().map(|p| (p.gt, p.det)));
    }
    Ok(bin_confusion(&pairs, &ds.manifest, &cfg.bin_thresholds)?)
}

fn bin_table(h: &BinHistogram, report: Option<&loggauge_core::BinReport>, cfg: &RunConfig) -> String {
    let t = &cfg.bin_thresholds;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "thresholds: thin < {} px <= medium <= {} px < thick",
        t.thin_max, t.medium_max
    );
    let _ = writeln!(s, "{:<8} {:>8}", "bin", "count");
    for b in DiameterBin::ALL {
        let _ = writeln!(s, "{:<8} {:>8}", b.name(), h.get(b));
    }
    if let Some(r) = report {
        let _ = writeln!(
            s,
            "\nconfusion at IoU {} (rows ground truth, columns predicted)",
            cfg.iou_main
        );
        let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8}", "", "thin", "medium", "thick");
        for b in DiameterBin::ALL {
            let row = r.confusion[b.index()];
            let _ = writeln!(s, "{:<8} {:>8} {:>8} {:>8}", b.name(), row[0], row[1], row[2]);
        }
        match r.bin_accuracy {
            Some(a) => {
                let _ = writeln!(s, "bin accuracy: {a:.4}");
            }
            None => {
                let _ = writeln!(s, "bin accuracy: undefined (no matched pairs)");
            }
        }
    }
    s
}

fn file_stem_for(image_id: &str) -> String {
    image_id
        .chars()
        .map(|c| if matches!(c, '/' | '\\' | ':') { '_' } else { c })
        .collect()
}

/// `<dir>/<image id>.txt` per image plus `<dir>/manifest.json`.
fn write_yolo_tree(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::new();
    for (entry, gts) in dataset.images() {
        let path = dir.join(format!("{}.txt", file_stem_for(&entry.image_id)));
        if entries
            .iter()
            .any(|e: &ManifestEntry| e.gt_path.as_deref() == Some(path.as_path()))
        {
            bail!("image ids collide on file name {}", path.display());
        }
        std::fs::write(&path, write_yolo_gt(gts)?).with_context(|| format!("writing {}", path.display()))?;
        entries.push(ManifestEntry {
            gt_path: Some(path),
            image_path: entry.image_path.as_ref().map(PathBuf::from),
            ..entry.clone()
        });
    }
    let manifest = DatasetManifest::new(entries)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, write_manifest(&manifest, dir)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
