//! Straight-line reference implementations used as test oracles.
//!
//! Nothing here calls into `loggauge_core` algorithms; only the plain data
//! types are shared. Speed is irrelevant, clarity is the point.

use std::collections::BTreeMap;

use loggauge_core::{Dataset, Detection, GroundTruth, ImageDims, NormBox};

/// Pixel corners `(x0, y0, x1, y1)` clamped to the image.
pub fn corners(b: &NormBox, dims: ImageDims) -> [f64; 4] {
    let (w, h) = (dims.width as f64, dims.height as f64);
    let c = |v: f64, hi: f64| v.max(0.0).min(hi);
    [
        c((b.cx - b.w / 2.0) * w, w),
        c((b.cy - b.h / 2.0) * h, h),
        c((b.cx + b.w / 2.0) * w, w),
        c((b.cy + b.h / 2.0) * h, h),
    ]
}

pub fn ref_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = a[2].min(b[2]) - a[0].max(b[0]);
    let ih = a[3].min(b[3]) - a[1].max(b[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}

/// Rank of each detection: the number of detections that come before it
/// (higher confidence, or equal confidence and lower index).
fn ranks(confs: &[f64]) -> Vec<usize> {
    (0..confs.len())
        .map(|i| {
            (0..confs.len())
                .filter(|&j| confs[j] > confs[i] || (confs[j] == confs[i] && j < i))
                .count()
        })
        .collect()
}

fn in_rank_order(confs: &[f64]) -> Vec<usize> {
    let r = ranks(confs);
    let mut order = vec![0; confs.len()];
    for (i, &k) in r.iter().enumerate() {
        order[k] = i;
    }
    order
}

/// NMS by exhaustive search over subsets.
///
/// The greedy result is the unique subset `K` such that a detection belongs
/// to `K` exactly when no higher-ranked member of `K` with the same class
/// overlaps it by more than the threshold. Every subset is tested against
/// that fixed-point condition. Returns indices in rank order.
pub fn ref_nms_indices(dets: &[Detection], dims: ImageDims, threshold: f64) -> Vec<usize> {
    let n = dets.len();
    assert!(n <= 16, "exhaustive NMS reference is limited to 16 boxes");
    let rank = ranks(&dets.iter().map(|d| d.confidence).collect::<Vec<_>>());
    let boxes: Vec<[f64; 4]> = dets.iter().map(|d| corners(&d.bbox, dims)).collect();
    let conflicts =
        |i: usize, j: usize| dets[i].class_id == dets[j].class_id && ref_iou(boxes[i], boxes[j]) > threshold;

    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let member = |i: usize| mask & (1 << i) != 0;
        let consistent = (0..n).all(|i| {
            let blocked = (0..n).any(|j| member(j) && rank[j] < rank[i] && conflicts(i, j));
            member(i) == !blocked
        });
        if consistent {
            found.push(mask);
        }
    }
    assert_eq!(found.len(), 1, "fixed point must be unique");
    let mut kept: Vec<usize> = (0..n).filter(|&i| found[0] & (1 << i) != 0).collect();
    kept.sort_by_key(|&i| rank[i]);
    kept
}

/// Per-detection match result: `Some(gt index)` or `None` for a false positive.
pub fn ref_match(gt: &[GroundTruth], dets: &[Detection], dims: ImageDims, threshold: f64) -> Vec<Option<usize>> {
    let confs: Vec<f64> = dets.iter().map(|d| d.confidence).collect();
    let mut used = vec![false; gt.len()];
    let mut result = vec![None; dets.len()];
    for d in in_rank_order(&confs) {
        let db = corners(&dets[d].bbox, dims);
        let mut best_iou = -1.0;
        let mut best = None;
        for g in 0..gt.len() {
            if used[g] || gt[g].class_id != dets[d].class_id {
                continue;
            }
            let v = ref_iou(db, corners(&gt[g].bbox, dims));
            if v >= threshold && v > best_iou {
                best_iou = v;
                best = Some(g);
            }
        }
        if let Some(g) = best {
            used[g] = true;
        }
        result[d] = best;
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Pools `(image_id, index, confidence, is_tp)` records and accumulates.
pub fn ref_curve(mut records: Vec<(String, usize, f64, bool)>, num_gt: usize) -> Vec<RefPoint> {
    // insertion sort with the documented total order
    let before = |a: &(String, usize, f64, bool), b: &(String, usize, f64, bool)| {
        a.2 > b.2 || (a.2 == b.2 && (a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)))
    };
    for i in 1..records.len() {
        let mut j = i;
        while j > 0 && before(&records[j], &records[j - 1]) {
            records.swap(j, j - 1);
            j -= 1;
        }
    }
    let mut tp = 0;
    let mut out = Vec::new();
    for (k, r) in records.iter().enumerate() {
        if r.3 {
            tp += 1;
        }
        out.push(RefPoint {
            confidence: r.2,
            precision: tp as f64 / (k + 1) as f64,
            recall: tp as f64 / num_gt as f64,
        });
    }
    out
}

/// 101-point interpolated AP by brute-force envelope evaluation.
pub fn ref_ap101(curve: &[RefPoint]) -> f64 {
    let mut sum = 0.0;
    for k in 0..=100 {
        let r = k as f64 / 100.0;
        let mut best = 0.0f64;
        for p in curve {
            if p.recall >= r && p.precision > best {
                best = p.precision;
            }
        }
        sum += best;
    }
    sum / 101.0
}

pub fn ref_f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ref_bin(width: f64, thin_max: f64, medium_max: f64) -> usize {
    if width < thin_max {
        0
    } else if width <= medium_max {
        1
    } else {
        2
    }
}

fn ref_width(b: &NormBox, dims: ImageDims) -> f64 {
    (b.w * dims.width as f64 * 1e9).round() / 1e9
}

/// Every scalar the evaluator reports, computed the long way.
#[derive(Debug, Clone, PartialEq)]
pub struct RefReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub conf_at_max_f1: Option<f64>,
    pub ap: BTreeMap<String, f64>,
    pub map50: f64,
    pub map5095: f64,
    pub confusion: [[u64; 3]; 3],
    pub bin_accuracy: Option<f64>,
}

/// Reference evaluation of detections that are used as given (no NMS).
pub fn ref_evaluate(dataset: &Dataset, dets: &[Detection], iou_main: f64, thin_max: f64, medium_max: f64) -> RefReport {
    let entries = dataset.manifest.entries();
    let gts = dataset.ground_truth();
    let num_gt: usize = gts.iter().map(|g| g.len()).sum();
    let per_image: Vec<Vec<Detection>> = entries
        .iter()
        .map(|e| dets.iter().filter(|d| d.image_id == e.image_id).cloned().collect())
        .collect();

    let run = |t: f64| {
        let mut records = Vec::new();
        let mut pairs = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let m = ref_match(&gts[i], &per_image[i], e.dims, t);
            for (d, g) in m.iter().enumerate() {
                records.push((e.image_id.clone(), d, per_image[i][d].confidence, g.is_some()));
                if let Some(g) = g {
                    pairs.push((gts[i][*g].bbox, per_image[i][d].bbox, e.dims));
                }
            }
        }
        (ref_curve(records, num_gt), pairs)
    };

    let mut ap = BTreeMap::new();
    let mut ten = Vec::new();
    for k in 0..10 {
        let t = (50 + 5 * k) as f64 / 100.0;
        let v = ref_ap101(&run(t).0);
        ap.insert(format!("{t:.2}"), v);
        ten.push(v);
    }
    let (curve, pairs) = run(iou_main);

    let mut best: Option<(f64, RefPoint)> = None;
    for p in &curve {
        let f = ref_f1(p.precision, p.recall);
        if best.is_none() || f > best.unwrap().0 {
            best = Some((f, *p));
        }
    }

    let mut confusion = [[0u64; 3]; 3];
    for (g, d, dims) in &pairs {
        confusion[ref_bin(ref_width(g, *dims), thin_max, medium_max)]
            [ref_bin(ref_width(d, *dims), thin_max, medium_max)] += 1;
    }
    let total: u64 = confusion.iter().flatten().sum();
    let diag = confusion[0][0] + confusion[1][1] + confusion[2][2];

    RefReport {
        precision: best.map_or(0.0, |b| b.1.precision),
        recall: best.map_or(0.0, |b| b.1.recall),
        f1: best.map_or(0.0, |b| b.0),
        conf_at_max_f1: best.map(|b| b.1.confidence),
        map50: ten[0],
        map5095: ten.iter().sum::<f64>() / 10.0,
        ap,
        confusion,
        bin_accuracy: if total > 0 {
            Some(diag as f64 / total as f64)
        } else {
            None
        },
    }
}
