//! Diameter categories from bounding-box width in original-image pixels.
//!
//! With the default thresholds a log is Thin below 30 px, Medium from 30 px
//! up to and including 60 px, and Thick above 60 px.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annot_io::{DatasetManifest, Detection, GroundTruth};
use crate::error::{Error, Result};
use crate::geometry::NormBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinThresholds {
    /// Exclusive upper bound of Thin.
    pub thin_max: f64,
    /// Inclusive upper bound of Medium.
    pub medium_max: f64,
}

impl Default for BinThresholds {
    fn default() -> Self {
        Self {
            thin_max: 30.0,
            medium_max: 60.0,
        }
    }
}

impl BinThresholds {
    pub fn new(thin_max: f64, medium_max: f64) -> Result<Self> {
        let t = Self { thin_max, medium_max };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thin_max.is_finite()
            && self.medium_max.is_finite()
            && 0.0 < self.thin_max
            && self.thin_max <= self.medium_max)
        {
            return Err(Error::InvalidParam(format!(
                "bin thresholds must satisfy 0 < thin_max <= medium_max, got {},{}",
                self.thin_max, self.medium_max
            )));
        }
        Ok(())
    }
}

/// Parses `thin_max,medium_max`.
impl FromStr for BinThresholds {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("expected `thin_max,medium_max`, got {s:?}"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        BinThresholds::new(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiameterBin {
    Thin,
    Medium,
    Thick,
}

impl DiameterBin {
    pub const ALL: [DiameterBin; 3] = [DiameterBin::Thin, DiameterBin::Medium, DiameterBin::Thick];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DiameterBin::Thin => "thin",
            DiameterBin::Medium => "medium",
            DiameterBin::Thick => "thick",
        }
    }
}

impl fmt::Display for DiameterBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn assign_bin(width_px: f64, t: &BinThresholds) -> Result<DiameterBin> {
    if !width_px.is_finite() || width_px < 0.0 {
        return Err(Error::InvalidParam(format!(
            "width {width_px} px is not a finite non-negative number"
        )));
    }
    Ok(if width_px < t.thin_max {
        DiameterBin::Thin
    } else if width_px <= t.medium_max {
        DiameterBin::Medium
    } else {
        DiameterBin::Thick
    })
}

/// Width of a normalized box in original-image pixels.
///
/// The product is snapped to a 1e-9 px grid so decimal inputs such as
/// `0.06 * 1000` land exactly on threshold values instead of one ulp past them.
pub fn pixel_width(bbox: &NormBox, image_width: u32) -> f64 {
    let raw = bbox.w * image_width as f64;
    (raw * 1e9).round() / 1e9
}

pub fn bin_detections(
    dets: &[Detection],
    manifest: &DatasetManifest,
    t: &BinThresholds,
) -> Result<Vec<(Detection, DiameterBin)>> {
    t.validate()?;
    dets.iter()
        .map(|d| {
            let dims = manifest.dims(&d.image_id)?;
            Ok((d.clone(), assign_bin(pixel_width(&d.bbox, dims.width), t)?))
        })
        .collect()
}

/// Count of items per bin, indexed by [`DiameterBin::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinHistogram(pub [u64; 3]);

impl BinHistogram {
    pub fn from_bins(bins: impl IntoIterator<Item = DiameterBin>) -> Self {
        let mut h = Self::default();
        for b in bins {
            h.0[b.index()] += 1;
        }
        h
    }

    pub fn get(&self, bin: DiameterBin) -> u64 {
        self.0[bin.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl Serialize for BinHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(3))?;
        for b in DiameterBin::ALL {
            m.serialize_entry(b.name(), &self.get(b))?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinReport {
    /// Predicted-bin counts over all matched detections.
    pub histogram: BinHistogram,
    /// `confusion[gt_bin][predicted_bin]`, order thin, medium, thick.
    pub confusion: [[u64; 3]; 3],
    /// `None` when there are no matched pairs.
    pub bin_accuracy: Option<f64>,
}

pub fn bin_confusion(
    pairs: &[(GroundTruth, Detection)],
    manifest: &DatasetManifest,
    t: &BinThresholds,
) -> Result<BinReport> {
    t.validate()?;
    let mut confusion = [[0u64; 3]; 3];
    let mut predicted = Vec::with_capacity(pairs.len());
    for (gt, det) in pairs {
        let gt_w = pixel_width(&gt.bbox, manifest.dims(&gt.image_id)?.width);
        let det_w = pixel_width(&det.bbox, manifest.dims(&det.image_id)?.width);
        let (g, p) = (assign_bin(gt_w, t)?, assign_bin(det_w, t)?);
        confusion[g.index()][p.index()] += 1;
        predicted.push(p);
    }
    let total: u64 = confusion.iter().flatten().sum();
    let diagonal: u64 = (0..3).map(|i| confusion[i][i]).sum();
    Ok(BinReport {
        histogram: BinHistogram::from_bins(predicted),
        confusion,
        bin_accuracy: (total > 0).then(|| diagonal as f64 / total as f64),
    })
}
