//! Annotation-level dataset summary: image and instance counts, object area
//! as a share of the image, and pixel extent ranges.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::annot_io::Dataset;
use crate::error::{Error, Result};
use crate::geometry::norm_to_pixel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(mut values: impl Iterator<Item = f64>) -> Option<Range> {
        let first = values.next()?;
        Some(values.fold(Range { min: first, max: first }, |r, v| Range {
            min: r.min.min(v),
            max: r.max.max(v),
        }))
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub num_images: usize,
    pub num_instances: usize,
    pub avg_per_image: f64,
    /// Mean over instances of box area as a percent of image area.
    pub avg_area_pct: Option<f64>,
    /// Mean over images (that have instances) of their mean instance area
    /// percent.
    pub avg_area_pct_per_image: Option<f64>,
    pub area_pct_range: Option<Range>,
    pub width_range_px: Option<Range>,
    pub height_range_px: Option<Range>,
    pub per_class_counts: BTreeMap<u32, usize>,
}

/// Pixel measurements of one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceMeasure {
    pub width_px: f64,
    pub height_px: f64,
    pub area_pct: f64,
}

/// Per-image lists of instance measurements, in dataset order.
pub fn measure_instances(dataset: &Dataset) -> Result<Vec<Vec<InstanceMeasure>>> {
    dataset
        .images()
        .map(|(entry, gts)| {
            let image_area = entry.dims.area();
            gts.iter()
                .map(|g| {
                    let p = norm_to_pixel(&g.bbox, entry.dims)?;
                    Ok(InstanceMeasure {
                        width_px: p.width(),
                        height_px: p.height(),
                        area_pct: 100.0 * p.area() / image_area,
                    })
                })
                .collect()
        })
        .collect()
}

pub fn compute_stats(dataset: &Dataset) -> Result<DatasetStats> {
    let num_images = dataset.manifest.len();
    if num_images == 0 {
        return Err(Error::EmptyDataset);
    }
    let measures = measure_instances(dataset)?;
    let all = || measures.iter().flatten();
    let num_instances = all().count();

    let mean = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
    let per_image_means: Vec<f64> = measures
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| m.iter().map(|i| i.area_pct).sum::<f64>() / m.len() as f64)
        .collect();

    let mut per_class_counts = BTreeMap::new();
    for g in dataset.ground_truth().iter().flatten() {
        *per_class_counts.entry(g.class_id).or_insert(0) += 1;
    }

    Ok(DatasetStats {
        num_images,
        num_instances,
        avg_per_image: num_instances as f64 / num_images as f64,
        avg_area_pct: mean(all().map(|i| i.area_pct).sum(), num_instances),
        avg_area_pct_per_image: mean(per_image_means.iter().sum(), per_image_means.len()),
        area_pct_range: Range::of(all().map(|i| i.area_pct)),
        width_range_px: Range::of(all().map(|i| i.width_px)),
        height_range_px: Range::of(all().map(|i| i.height_px)),
        per_class_counts,
    })
}

fn fmt_range(r: Option<Range>, unit: &str, decimals: usize) -> String {
    match r {
        Some(r) => format!("{:.*}{unit} to {:.*}{unit}", decimals, r.min, decimals, r.max),
        None => "n/a".into(),
    }
}

/// Two-column attribute/value table. Pixel ranges are rounded to integers.
impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}% of image area"));
        let classes = self
            .per_class_counts
            .iter()
            .map(|(c, n)| format!("{c}: {n}"))
            .collect::<Vec<_>>()
            .join(", ");
        let rows = [
            ("Total Images", self.num_images.to_string()),
            ("Total Annotated Instances", self.num_instances.to_string()),
            ("Average Instances per Image", format!("{:.2}", self.avg_per_image)),
            (
                "Number of Classes",
                format!("{} ({classes})", self.per_class_counts.len()),
            ),
            ("Average Object Area", pct(self.avg_area_pct)),
            ("Average Object Area (per image)", pct(self.avg_area_pct_per_image)),
            ("Object Area Range", fmt_range(self.area_pct_range, "%", 2)),
            ("Object Width Range", fmt_range(self.width_range_px, " px", 0)),
            ("Object Height Range", fmt_range(self.height_range_px, " px", 0)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v}")?;
        }
        Ok(())
    }
}
