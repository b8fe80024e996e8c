//! Detection evaluation: greedy IoU matching, precision/recall sweeps,
//! interpolated average precision and the aggregate [`EvalReport`].
//!
//! Matching follows the usual COCO-family rule. Detections are visited in
//! descending confidence (ties by input index) and each one claims the
//! still-unmatched ground truth of the same class with the highest IoU,
//! provided that IoU reaches the threshold. Lower ground-truth index wins
//! IoU ties.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annot_io::{Dataset, Detection, GroundTruth};
use crate::binning::{bin_confusion, BinReport, BinThresholds};
use crate::error::{Error, Result};
use crate::geometry::{iou, norm_to_pixel, ImageDims, PixelBox};
use crate::postprocess::{confidence_order, postprocess, PostprocessParams};

/// The ten thresholds 0.50, 0.55, ..., 0.95 averaged by mAP@0.5:0.95.
pub fn coco_iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|k| (50 + 5 * k) as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPair {
    pub gt: GroundTruth,
    pub det: Detection,
    pub iou: f64,
}

/// Per-detection outcome retained for the precision/recall sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub image_id: String,
    pub det_index: usize,
    pub confidence: f64,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchSet {
    pub image_id: String,
    pub iou_threshold: f64,
    pub num_gt: usize,
    pub pairs: Vec<MatchedPair>,
    pub false_positives: Vec<Detection>,
    pub false_negatives: Vec<GroundTruth>,
    /// One entry per input detection, in input order.
    pub verdicts: Vec<Verdict>,
}

/// IoU between every detection and every ground truth of one image, or
/// `None` where the classes differ.
struct IouTable {
    rows: Vec<Vec<Option<f64>>>,
    order: Vec<usize>,
}

impl IouTable {
    fn build(gt: &[GroundTruth], dets: &[Detection], dims: ImageDims) -> Result<Self> {
        let gt_boxes: Vec<PixelBox> = gt.iter().map(|g| norm_to_pixel(&g.bbox, dims)).collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(dets.len());
        for d in dets {
            let db = norm_to_pixel(&d.bbox, dims)?;
            rows.push(
                gt.iter()
                    .zip(&gt_boxes)
                    .map(|(g, gb)| (g.class_id == d.class_id).then(|| iou(&db, gb)))
                    .collect(),
            );
        }
        Ok(Self {
            rows,
            order: confidence_order(dets.iter().map(|d| d.confidence)),
        })
    }

    /// For each detection, the matched ground-truth index and its IoU.
    fn assign(&self, num_gt: usize, threshold: f64) -> Vec<Option<(usize, f64)>> {
        let mut taken = vec![false; num_gt];
        let mut out = vec![None; self.rows.len()];
        for &d in &self.order {
            let mut best: Option<(usize, f64)> = None;
            for (g, v) in self.rows[d].iter().enumerate() {
                let Some(v) = *v else { continue };
                if taken[g] || v < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            out[d] = best;
        }
        out
    }
}

fn image_id_of(gt: &[GroundTruth], dets: &[Detection]) -> String {
    gt.first()
        .map(|g| g.image_id.clone())
        .or_else(|| dets.first().map(|d| d.image_id.clone()))
        .unwrap_or_default()
}

fn build_match_set(
    image_id: String,
    gt: &[GroundTruth],
    dets: &[Detection],
    assignment: &[Option<(usize, f64)>],
    threshold: f64,
) -> MatchSet {
    let mut matched = vec![false; gt.len()];
    let mut pairs = Vec::new();
    let mut false_positives = Vec::new();
    let mut verdicts = Vec::with_capacity(dets.len());
    for &d in &confidence_order(dets.iter().map(|d| d.confidence)) {
        match assignment[d] {
            Some((g, v)) => {
                matched[g] = true;
                pairs.push(MatchedPair {
                    gt: gt[g].clone(),
                    det: dets[d].clone(),
                    iou: v,
                });
            }
            None => false_positives.push(dets[d].clone()),
        }
    }
    for (d, det) in dets.iter().enumerate() {
        verdicts.push(Verdict {
            image_id: image_id.clone(),
            det_index: d,
            confidence: det.confidence,
            true_positive: assignment[d].is_some(),
        });
    }
    let false_negatives = gt
        .iter()
        .zip(&matched)
        .filter(|(_, &m)| !m)
        .map(|(g, _)| g.clone())
        .collect();
    MatchSet {
        image_id,
        iou_threshold: threshold,
        num_gt: gt.len(),
        pairs,
        false_positives,
        false_negatives,
        verdicts,
    }
}

/// Matches the detections of one image against its ground truth.
pub fn match_image(gt: &[GroundTruth], dets: &[Detection], dims: ImageDims, iou_threshold: f64) -> Result<MatchSet> {
    let table = IouTable::build(gt, dets, dims)?;
    let assignment = table.assign(gt.len(), iou_threshold);
    Ok(build_match_set(
        image_id_of(gt, dets),
        gt,
        dets,
        &assignment,
        iou_threshold,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub confidence: f64,
    pub cum_tp: usize,
    pub cum_fp: usize,
    pub precision: f64,
    pub recall: f64,
}

fn sweep(mut verdicts: Vec<&Verdict>, num_gt: usize) -> Result<Vec<PRPoint>> {
    if num_gt == 0 {
        return Err(Error::UndefinedRecall);
    }
    verdicts.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.image_id.cmp(&b.image_id))
            .then(a.det_index.cmp(&b.det_index))
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    Ok(verdicts
        .into_iter()
        .map(|v| {
            if v.true_positive {
                tp += 1;
            } else {
                fp += 1;
            }
            PRPoint {
                confidence: v.confidence,
                cum_tp: tp,
                cum_fp: fp,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / num_gt as f64,
            }
        })
        .collect())
}

/// Pools detections across images and accumulates one point per detection.
pub fn pr_sweep(sets: &[MatchSet]) -> Result<Vec<PRPoint>> {
    let num_gt = sets.iter().map(|s| s.num_gt).sum();
    sweep(sets.iter().flat_map(|s| &s.verdicts).collect(), num_gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMethod {
    /// Mean of the precision envelope sampled at recall 0.00, 0.01, ..., 1.00.
    #[default]
    Interp101,
    /// Exact area under the precision envelope.
    AllPoint,
}

/// `envelope[i]` is the highest precision at index `i` or later.
fn precision_envelope(curve: &[PRPoint]) -> Vec<f64> {
    let mut env: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    env
}

pub fn average_precision(curve: &[PRPoint]) -> f64 {
    average_precision_with(curve, ApMethod::Interp101)
}

pub fn average_precision_with(curve: &[PRPoint], method: ApMethod) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let env = precision_envelope(curve);
    match method {
        ApMethod::Interp101 => {
            let total: f64 = (0..=100)
                .map(|k| {
                    let r = k as f64 / 100.0;
                    let i = curve.partition_point(|p| p.recall < r);
                    env.get(i).copied().unwrap_or(0.0)
                })
                .sum();
            total / 101.0
        }
        ApMethod::AllPoint => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for (p, e) in curve.iter().zip(&env) {
                area += (p.recall - prev) * e;
                prev = p.recall;
            }
            area
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// The curve point with the highest F1; earlier (higher-confidence) points
/// win ties.
pub fn max_f1_point(curve: &[PRPoint]) -> Result<OperatingPoint> {
    let mut best: Option<OperatingPoint> = None;
    for p in curve {
        let f1 = f1_score(p.precision, p.recall);
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(OperatingPoint {
                confidence: p.confidence,
                precision: p.precision,
                recall: p.recall,
                f1,
            });
        }
    }
    best.ok_or(Error::EmptyCurve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub params: PostprocessParams,
    /// Run confidence filtering and NMS before matching.
    pub apply_postprocess: bool,
    pub bin_thresholds: BinThresholds,
    /// Threshold for the precision/recall summary and the bin report.
    pub iou_main: f64,
    pub ap_method: ApMethod,
    /// Reported in `ap_per_iou` alongside the standard ten.
    pub extra_iou_thresholds: Vec<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            params: PostprocessParams::default(),
            apply_postprocess: false,
            bin_thresholds: BinThresholds::default(),
            iou_main: 0.5,
            ap_method: ApMethod::Interp101,
            extra_iou_thresholds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub images: usize,
    pub gt: usize,
    /// Detections that entered matching (after post-processing if applied).
    pub detections: usize,
    pub detections_input: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    /// Set when there were no detections; `precision` is then reported as 0.
    pub precision_undefined: bool,
    pub recall: f64,
    pub f1: f64,
    pub conf_at_max_f1: Option<f64>,
    pub iou_main: f64,
    pub ap_method: ApMethod,
    pub ap_per_iou: BTreeMap<String, f64>,
    pub map50: f64,
    pub map5095: f64,
    pub bin_report: BinReport,
    pub bin_thresholds: BinThresholds,
    pub params: PostprocessParams,
    pub postprocess_applied: bool,
    pub counts: EvalCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

/// Key used in [`EvalReport::ap_per_iou`]: two decimals when exact.
pub fn iou_key(t: f64) -> String {
    let two = format!("{t:.2}");
    if two.parse::<f64>() == Ok(t) {
        two
    } else {
        t.to_string()
    }
}

fn check_ratio(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} = {v} is outside [0, 1]")))
    }
}

pub fn evaluate(dataset: &Dataset, dets: &[Detection], opts: &EvalOptions) -> Result<EvalReport> {
    check_ratio("iou_main", opts.iou_main)?;
    for &t in &opts.extra_iou_thresholds {
        check_ratio("iou threshold", t)?;
    }
    opts.bin_thresholds.validate()?;
    opts.params.validate()?;
    let manifest = &dataset.manifest;
    let num_gt = dataset.num_instances();
    if num_gt == 0 {
        return Err(Error::UndefinedRecall);
    }
    for d in dets {
        manifest.dims(&d.image_id)?;
    }

    let evaluated = if opts.apply_postprocess {
        postprocess(dets, manifest, &opts.params)?
    } else {
        dets.to_vec()
    };
    let mut per_image: Vec<Vec<Detection>> = vec![Vec::new(); manifest.len()];
    for d in &evaluated {
        let i = manifest.position(&d.image_id).expect("checked above");
        per_image[i].push(d.clone());
    }

    let standard = coco_iou_thresholds();
    let mut thresholds: Vec<f64> = standard.to_vec();
    for &t in std::iter::once(&opts.iou_main).chain(&opts.extra_iou_thresholds) {
        if !thresholds.contains(&t) {
            thresholds.push(t);
        }
    }
    let main_slot = thresholds
        .iter()
        .position(|&t| t == opts.iou_main)
        .expect("inserted above");

    // One MatchSet per (image, threshold); rayon keeps the output in image order.
    let per_image_sets: Vec<Vec<MatchSet>> = dataset
        .images()
        .zip(&per_image)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|((entry, gt), dets)| {
            let table = IouTable::build(gt, dets, entry.dims)?;
            Ok(thresholds
                .iter()
                .map(|&t| build_match_set(entry.image_id.clone(), gt, dets, &table.assign(gt.len(), t), t))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut ap_by_slot = Vec::with_capacity(thresholds.len());
    let mut main_curve = Vec::new();
    for slot in 0..thresholds.len() {
        let verdicts = per_image_sets.iter().flat_map(|sets| &sets[slot].verdicts).collect();
        let curve = sweep(verdicts, num_gt)?;
        ap_by_slot.push(average_precision_with(&curve, opts.ap_method));
        if slot == main_slot {
            main_curve = curve;
        }
    }
    let ap_per_iou: BTreeMap<String, f64> = thresholds
        .iter()
        .zip(&ap_by_slot)
        .map(|(&t, &ap)| (iou_key(t), ap))
        .collect();
    let map50 = ap_by_slot[0];
    let map5095 = ap_by_slot[..standard.len()].iter().sum::<f64>() / standard.len() as f64;

    let (precision, recall, f1, conf_at_max_f1) = match max_f1_point(&main_curve) {
        Ok(op) => (op.precision, op.recall, op.f1, Some(op.confidence)),
        Err(_) => (0.0, 0.0, 0.0, None),
    };

    let pairs: Vec<(GroundTruth, Detection)> = per_image_sets
        .iter()
        .flat_map(|sets| sets[main_slot].pairs.iter().map(|p| (p.gt.clone(), p.det.clone())))
        .collect();
    let bin_report = bin_confusion(&pairs, manifest, &opts.bin_thresholds)?;

    Ok(EvalReport {
        precision,
        precision_undefined: evaluated.is_empty(),
        recall,
        f1,
        conf_at_max_f1,
        iou_main: opts.iou_main,
        ap_method: opts.ap_method,
        ap_per_iou,
        map50,
        map5095,
        bin_report,
        bin_thresholds: opts.bin_thresholds,
        params: opts.params,
        postprocess_applied: opts.apply_postprocess,
        counts: EvalCounts {
            images: manifest.len(),
            gt: num_gt,
            detections: evaluated.len(),
            detections_input: dets.len(),
        },
        generated_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NormBox;

    fn gt(cx: f64) -> GroundTruth {
        GroundTruth {
            image_id: "a".into(),
            class_id: 0,
            bbox: NormBox::new(cx, 0.5, 0.1, 0.1).unwrap(),
        }
    }

    fn det(cx: f64, conf: f64) -> Detection {
        Detection {
            image_id: "a".into(),
            class_id: 0,
            bbox: NormBox::new(cx, 0.5, 0.1, 0.1).unwrap(),
            confidence: conf,
        }
    }

    fn dims() -> ImageDims {
        ImageDims::new(100, 100).unwrap()
    }

    fn point(conf: f64, tp: usize, fp: usize, num_gt: usize) -> PRPoint {
        PRPoint {
            confidence: conf,
            cum_tp: tp,
            cum_fp: fp,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / num_gt as f64,
        }
    }

    #[test]
    fn higher_confidence_wins_the_ground_truth() {
        let m = match_image(&[gt(0.5)], &[det(0.505, 0.6), det(0.5, 0.9)], dims(), 0.5).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].det.confidence, 0.9);
        assert_eq!(m.false_positives.len(), 1);
        assert_eq!(m.false_positives[0].confidence, 0.6);
        assert!(m.false_negatives.is_empty());
    }

    #[test]
    fn no_detections() {
        let m = match_image(&[gt(0.2), gt(0.5), gt(0.8)], &[], dims(), 0.5).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!(m.false_negatives.len(), 3);
    }

    #[test]
    fn class_mismatch_never_matches() {
        let mut d = det(0.5, 0.9);
        d.class_id = 3;
        let m = match_image(&[gt(0.5)], &[d], dims(), 0.5).unwrap();
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn iou_tie_prefers_lower_gt_index() {
        // two identical ground truths, one detection
        let m = match_image(&[gt(0.5), gt(0.5)], &[det(0.5, 0.9)], dims(), 0.5).unwrap();
        assert_eq!(m.false_negatives.len(), 1);
        assert_eq!(m.pairs.len(), 1);
        let m2 = match_image(&[gt(0.5), gt(0.5)], &[det(0.5, 0.9), det(0.5, 0.8)], dims(), 0.5).unwrap();
        assert_eq!(m2.pairs.len(), 2);
    }

    #[test]
    fn sweep_by_hand() {
        // conf 0.9 is a false positive, conf 0.8 a true positive, one GT
        let m = match_image(&[gt(0.5)], &[det(0.2, 0.9), det(0.5, 0.8)], dims(), 0.5).unwrap();
        let curve = pr_sweep(&[m]).unwrap();
        assert_eq!(curve.len(), 2);
        assert_eq!((curve[0].precision, curve[0].recall), (0.0, 0.0));
        assert_eq!((curve[1].precision, curve[1].recall), (0.5, 1.0));
        assert_eq!(average_precision(&curve), 0.5);
        assert_eq!(average_precision_with(&curve, ApMethod::AllPoint), 0.5);
    }

    #[test]
    fn sweep_requires_ground_truth() {
        let m = match_image(&[], &[det(0.5, 0.9)], dims(), 0.5).unwrap();
        assert!(matches!(pr_sweep(&[m]), Err(Error::UndefinedRecall)));
    }

    #[test]
    fn all_true_positives() {
        let m = match_image(
            &[gt(0.2), gt(0.5), gt(0.8)],
            &[det(0.2, 0.9), det(0.5, 0.7)],
            dims(),
            0.5,
        )
        .unwrap();
        let curve = pr_sweep(&[m]).unwrap();
        let last = curve.last().unwrap();
        assert_eq!(last.precision, 1.0);
        assert_eq!(last.recall, 2.0 / 3.0);
    }

    #[test]
    fn ap_trivial_cases() {
        assert_eq!(average_precision(&[]), 0.0);
        assert_eq!(average_precision(&[point(0.9, 1, 0, 1)]), 1.0);
    }

    #[test]
    fn max_f1_examples() {
        let a = PRPoint {
            confidence: 0.9,
            cum_tp: 1,
            cum_fp: 0,
            precision: 1.0,
            recall: 0.5,
        };
        let b = PRPoint {
            confidence: 0.5,
            cum_tp: 9,
            cum_fp: 6,
            precision: 0.6,
            recall: 0.9,
        };
        let op = max_f1_point(&[a, b]).unwrap();
        assert_eq!(op.confidence, 0.5);
        assert!((op.f1 - 0.72).abs() < 1e-12);

        let fps = [point(0.9, 0, 1, 2), point(0.8, 0, 2, 2)];
        let op = max_f1_point(&fps).unwrap();
        assert_eq!((op.confidence, op.f1), (0.9, 0.0));

        assert!(matches!(max_f1_point(&[]), Err(Error::EmptyCurve)));
        let perfect = max_f1_point(&[point(1.0, 1, 0, 1)]).unwrap();
        assert_eq!(perfect.f1, 1.0);
    }

    #[test]
    fn threshold_grid() {
        let t = coco_iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[9], 0.95);
        assert_eq!(iou_key(0.5), "0.50");
        assert_eq!(iou_key(0.95), "0.95");
        assert_eq!(iou_key(0.525), "0.525");
    }
}
