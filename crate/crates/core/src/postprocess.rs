//! Confidence filtering and greedy per-class non-maximum suppression.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annot_io::{DatasetManifest, Detection};
use crate::error::{Error, Result};
use crate::geometry::{iou, norm_to_pixel, ImageDims, PixelBox};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_NMS_IOU_THRESHOLD: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessParams {
    pub conf_threshold: f64,
    pub nms_iou_threshold: f64,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        Self {
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            nms_iou_threshold: DEFAULT_NMS_IOU_THRESHOLD,
        }
    }
}

impl PostprocessParams {
    pub fn new(conf_threshold: f64, nms_iou_threshold: f64) -> Result<Self> {
        let p = Self {
            conf_threshold,
            nms_iou_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("conf_threshold", self.conf_threshold),
            ("nms_iou_threshold", self.nms_iou_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Keeps detections with `confidence >= threshold`, preserving order.
pub fn filter_confidence(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.confidence >= threshold).cloned().collect()
}

/// Indices of `confidences` ordered by descending value, ties by index.
pub(crate) fn confidence_order(confidences: impl Iterator<Item = f64>) -> Vec<usize> {
    let confs: Vec<f64> = confidences.collect();
    let mut order: Vec<usize> = (0..confs.len()).collect();
    order.sort_by(|&a, &b| confs[b].total_cmp(&confs[a]).then(a.cmp(&b)));
    order
}

/// Greedy NMS over detections of a single image.
///
/// A candidate survives when its IoU with every already-kept detection of the
/// same class is at most `iou_threshold`. Output is in descending confidence.
pub fn greedy_nms(dets: &[Detection], dims: ImageDims, iou_threshold: f64) -> Result<Vec<Detection>> {
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.image_id != first.image_id) {
            return Err(Error::MixedImages(first.image_id.clone(), other.image_id.clone()));
        }
    }
    let boxes: Vec<PixelBox> = dets
        .iter()
        .map(|d| norm_to_pixel(&d.bbox, dims))
        .collect::<Result<_>>()?;

    let mut kept: Vec<usize> = Vec::new();
    for i in confidence_order(dets.iter().map(|d| d.confidence)) {
        let suppressed = kept
            .iter()
            .any(|&k| dets[k].class_id == dets[i].class_id && iou(&boxes[k], &boxes[i]) > iou_threshold);
        if !suppressed {
            kept.push(i);
        }
    }
    Ok(kept.into_iter().map(|i| dets[i].clone()).collect())
}

/// Confidence filter followed by NMS, image by image.
///
/// Output is grouped by image id in lexicographic order, each group in
/// descending confidence.
pub fn postprocess(
    dets: &[Detection],
    manifest: &DatasetManifest,
    params: &PostprocessParams,
) -> Result<Vec<Detection>> {
    params.validate()?;
    let mut by_image: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        manifest.dims(&d.image_id)?;
        if d.confidence >= params.conf_threshold {
            by_image.entry(d.image_id.clone()).or_default().push(d.clone());
        }
    }
    let mut out = Vec::new();
    for (id, group) in by_image {
        out.extend(greedy_nms(&group, manifest.dims(&id)?, params.nms_iou_threshold)?);
    }
    Ok(out)
}
