//! Ground-truth and detection file formats.
//!
//! * YOLO text: one file per image, lines `class cx cy w h`, normalized.
//! * Detections: line-delimited JSON, one record per detection.
//! * COCO-style JSON with pixel `bbox` and/or polygon `segmentation`.
//! * Manifest: JSON array binding image ids to dimensions and YOLO files.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{norm_to_pixel, pixel_to_norm, polygon_bbox, ImageDims, NormBox, PixelBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: NormBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: NormBox,
    pub confidence: f64,
}

/// How parsers treat records that are readable but not canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub dims: ImageDims,
    /// YOLO ground-truth file. Always set for manifests read from disk;
    /// datasets built from COCO JSON carry their boxes inline instead.
    pub gt_path: Option<PathBuf>,
    pub image_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    index: HashMap<String, usize>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.image_id.clone(), i).is_some() {
                return Err(Error::DuplicateImage(e.image_id.clone()));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.index.get(image_id).copied()
    }

    pub fn get(&self, image_id: &str) -> Option<&ManifestEntry> {
        self.position(image_id).map(|i| &self.entries[i])
    }

    pub fn dims(&self, image_id: &str) -> Result<ImageDims> {
        self.get(image_id)
            .map(|e| e.dims)
            .ok_or_else(|| Error::UnknownImage(image_id.to_string()))
    }
}

/// A manifest plus the ground truth of every image, aligned by position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    ground_truth: Vec<Vec<GroundTruth>>,
}

impl Dataset {
    /// Groups `records` by image. Every record must name a manifest image.
    pub fn new(manifest: DatasetManifest, records: Vec<GroundTruth>) -> Result<Self> {
        let mut ground_truth = vec![Vec::new(); manifest.len()];
        for r in records {
            let i = manifest
                .position(&r.image_id)
                .ok_or_else(|| Error::UnknownImage(r.image_id.clone()))?;
            ground_truth[i].push(r);
        }
        Ok(Self { manifest, ground_truth })
    }

    /// Per-image ground truth, in manifest order.
    pub fn ground_truth(&self) -> &[Vec<GroundTruth>] {
        &self.ground_truth
    }

    pub fn images(&self) -> impl Iterator<Item = (&ManifestEntry, &[GroundTruth])> {
        self.manifest
            .entries()
            .iter()
            .zip(self.ground_truth.iter().map(Vec::as_slice))
    }

    pub fn num_instances(&self) -> usize {
        self.ground_truth.iter().map(Vec::len).sum()
    }
}

pub fn parse_yolo_gt(content: &str, image_id: &str) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::parse(
                lineno,
                format!("expected 5 fields `class cx cy w h`, found {}", fields.len()),
            ));
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("class {:?} is not a non-negative integer", fields[0])))?;
        let mut coords = [0.0f64; 4];
        for (slot, raw) in coords.iter_mut().zip(&fields[1..]) {
            *slot = raw
                .parse()
                .map_err(|_| Error::parse(lineno, format!("{raw:?} is not a number")))?;
        }
        let bbox = NormBox::new(coords[0], coords[1], coords[2], coords[3])
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        out.push(GroundTruth {
            image_id: image_id.to_string(),
            class_id,
            bbox,
        });
    }
    Ok(out)
}

/// Serializes records of a single image as YOLO text with six decimals.
///
/// Boxes sitting in the tolerance band outside `[0, 1]` are pulled inside
/// first so the output always re-parses.
pub fn write_yolo_gt(records: &[GroundTruth]) -> Result<String> {
    let mut out = String::new();
    if let Some(first) = records.first() {
        if let Some(other) = records.iter().find(|r| r.image_id != first.image_id) {
            return Err(Error::MixedImages(first.image_id.clone(), other.image_id.clone()));
        }
    }
    for r in records {
        let b = if r.bbox.validate().is_ok() && in_unit_square(&r.bbox) {
            r.bbox
        } else {
            r.bbox.clamped()
        };
        writeln!(out, "{} {:.6} {:.6} {:.6} {:.6}", r.class_id, b.cx, b.cy, b.w, b.h)
            .expect("writing to a String cannot fail");
    }
    Ok(out)
}

fn in_unit_square(b: &NormBox) -> bool {
    b.cx - b.w / 2.0 >= 0.0 && b.cx + b.w / 2.0 <= 1.0 && b.cy - b.h / 2.0 >= 0.0 && b.cy + b.h / 2.0 <= 1.0
}

const DETECTION_FIELDS: [&str; 7] = ["image_id", "class_id", "cx", "cy", "w", "h", "confidence"];

/// Parses line-delimited JSON detections.
///
/// Blank lines are skipped. Lines starting with `#` carry exporter metadata;
/// lenient mode skips them, strict mode rejects them along with any unknown
/// field.
pub fn parse_detections(content: &str, mode: ParseMode) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            match mode {
                ParseMode::Lenient => {
                    log::debug!("skipping metadata line {lineno}");
                    continue;
                }
                ParseMode::Strict => {
                    return Err(Error::parse(lineno, "comment lines are only accepted in lenient mode"))
                }
            }
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, format!("invalid JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(Error::parse(lineno, "expected a JSON object"));
        };
        out.push(detection_from_object(&obj, mode).map_err(|msg| Error::parse(lineno, msg))?);
    }
    Ok(out)
}

fn detection_from_object(obj: &Map<String, Value>, mode: ParseMode) -> std::result::Result<Detection, String> {
    let unknown: Vec<&str> = obj
        .keys()
        .map(String::as_str)
        .filter(|k| !DETECTION_FIELDS.contains(k))
        .collect();
    if !unknown.is_empty() {
        match mode {
            ParseMode::Strict => return Err(format!("unknown field(s) {unknown:?}")),
            ParseMode::Lenient => log::warn!("ignoring unknown detection field(s) {unknown:?}"),
        }
    }
    let field = |k: &str| obj.get(k).ok_or_else(|| format!("missing field `{k}`"));
    let number = |k: &str| -> std::result::Result<f64, String> {
        field(k)?
            .as_f64()
            .ok_or_else(|| format!("field `{k}` must be a number"))
    };
    let image_id = field("image_id")?
        .as_str()
        .ok_or("field `image_id` must be a string")?
        .to_string();
    let class_id = field("class_id")?
        .as_u64()
        .and_then(|c| u32::try_from(c).ok())
        .ok_or("field `class_id` must be a non-negative integer")?;
    let confidence = number("confidence")?;
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("confidence {confidence} outside [0, 1]"));
    }
    let bbox = NormBox::new(number("cx")?, number("cy")?, number("w")?, number("h")?).map_err(|e| e.to_string())?;
    Ok(Detection {
        image_id,
        class_id,
        bbox,
        confidence,
    })
}

#[derive(Serialize)]
struct DetectionRecord<'a> {
    image_id: &'a str,
    class_id: u32,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    confidence: f64,
}

/// One JSON object per line, fields in canonical order, shortest
/// round-tripping float representation.
pub fn write_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        let rec = DetectionRecord {
            image_id: &d.image_id,
            class_id: d.class_id,
            cx: d.bbox.cx,
            cy: d.bbox.cy,
            w: d.bbox.w,
            h: d.bbox.h,
            confidence: d.confidence,
        };
        out.push_str(&serde_json::to_string(&rec).expect("detection record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CocoId {
    Int(i64),
    Str(String),
}

impl CocoId {
    fn key(&self) -> String {
        match self {
            CocoId::Int(i) => i.to_string(),
            CocoId::Str(s) => s.clone(),
        }
    }
}

#[derive(Deserialize)]
struct CocoImage {
    id: CocoId,
    width: i64,
    height: i64,
    #[serde(default)]
    file_name: Option<String>,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: CocoId,
    category_id: i64,
    #[serde(default)]
    bbox: Option<Vec<f64>>,
    #[serde(default)]
    segmentation: Option<Value>,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: i64,
}

#[derive(Deserialize)]
struct CocoDoc {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

/// Reads a COCO-style document into a [`Dataset`].
///
/// Category ids are mapped to dense class ids: by position in `categories`
/// when that list is present, otherwise by ascending category id. Boxes come
/// from `bbox` when present, else from the bounding box of every polygon
/// vertex in `segmentation`.
pub fn parse_coco_dataset(content: &str) -> Result<Dataset> {
    let doc: CocoDoc = serde_json::from_str(content)?;

    let mut entries = Vec::with_capacity(doc.images.len());
    for (i, img) in doc.images.iter().enumerate() {
        let dims = ImageDims::new(img.width, img.height).map_err(|e| Error::record(i, format!("images: {e}")))?;
        entries.push(ManifestEntry {
            image_id: img.id.key(),
            dims,
            gt_path: None,
            image_path: img.file_name.as_ref().map(PathBuf::from),
        });
    }
    let manifest = DatasetManifest::new(entries)?;

    let class_of: HashMap<i64, u32> = if doc.categories.is_empty() {
        let ids: BTreeSet<i64> = doc.annotations.iter().map(|a| a.category_id).collect();
        ids.into_iter().zip(0..).collect()
    } else {
        doc.categories.iter().map(|c| c.id).zip(0..).collect()
    };

    let mut records = Vec::with_capacity(doc.annotations.len());
    for (i, ann) in doc.annotations.iter().enumerate() {
        let image_id = ann.image_id.key();
        let dims = manifest
            .dims(&image_id)
            .map_err(|_| Error::record(i, format!("annotation references unknown image {image_id:?}")))?;
        let class_id = *class_of
            .get(&ann.category_id)
            .ok_or_else(|| Error::record(i, format!("unknown category {}", ann.category_id)))?;
        let pixel = coco_annotation_box(ann).map_err(|e| Error::record(i, e.to_string()))?;
        let bbox = pixel_to_norm(&pixel, dims).map_err(|e| Error::record(i, e.to_string()))?;
        records.push(GroundTruth {
            image_id,
            class_id,
            bbox,
        });
    }
    Dataset::new(manifest, records)
}

fn coco_annotation_box(ann: &CocoAnnotation) -> Result<PixelBox> {
    if let Some(b) = &ann.bbox {
        if b.len() != 4 {
            return Err(Error::MalformedBox(format!("bbox needs 4 values, got {}", b.len())));
        }
        if !(b[2] > 0.0 && b[3] > 0.0) {
            return Err(Error::DegenerateBox(format!("bbox {b:?} has non-positive extent")));
        }
        return PixelBox::from_xywh(b[0], b[1], b[2], b[3]);
    }
    let polygons = match &ann.segmentation {
        Some(Value::Array(polys)) if !polys.is_empty() => polys,
        Some(_) => {
            return Err(Error::MalformedPolygon(
                "segmentation is not a polygon list and no bbox is given".into(),
            ))
        }
        None => {
            return Err(Error::MalformedBox(
                "annotation has neither bbox nor segmentation".into(),
            ))
        }
    };
    let mut points = Vec::new();
    for poly in polygons {
        let coords = poly
            .as_array()
            .ok_or_else(|| Error::MalformedPolygon("polygon must be a flat coordinate array".into()))?;
        if coords.len() % 2 != 0 {
            return Err(Error::MalformedPolygon("odd number of polygon coordinates".into()));
        }
        let flat: Option<Vec<f64>> = coords.iter().map(Value::as_f64).collect();
        let flat = flat.ok_or_else(|| Error::MalformedPolygon("non-numeric polygon coordinate".into()))?;
        let pts: Vec<(f64, f64)> = flat.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        if pts.len() < 3 {
            return Err(Error::MalformedPolygon(format!("polygon with {} points", pts.len())));
        }
        points.extend(pts);
    }
    let b = polygon_bbox(&points)?;
    if !(b.width() > 0.0 && b.height() > 0.0) {
        return Err(Error::DegenerateBox("polygon has zero width or height".into()));
    }
    Ok(b)
}

/// Writes a dataset as COCO-style JSON with pixel boxes. Numeric image ids
/// are emitted as integers; category ids are `class_id + 1`.
pub fn write_coco_dataset(dataset: &Dataset) -> Result<String> {
    let coco_id = |id: &str| -> Value {
        match id.parse::<i64>() {
            Ok(n) if n.to_string() == id => json!(n),
            _ => json!(id),
        }
    };
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    let mut classes = BTreeSet::new();
    for (entry, gts) in dataset.images() {
        let file_name = entry
            .image_path
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.image_id.clone());
        images.push(json!({
            "id": coco_id(&entry.image_id),
            "width": entry.dims.width,
            "height": entry.dims.height,
            "file_name": file_name,
        }));
        for gt in gts {
            let p = norm_to_pixel(&gt.bbox, entry.dims)?;
            classes.insert(gt.class_id);
            annotations.push(json!({
                "id": annotations.len() + 1,
                "image_id": coco_id(&entry.image_id),
                "category_id": gt.class_id as i64 + 1,
                "bbox": [p.x_min, p.y_min, p.width(), p.height()],
                "area": p.area(),
                "iscrowd": 0,
            }));
        }
    }
    let categories: Vec<Value> = classes
        .iter()
        .map(|&c| {
            let name = if c == 0 {
                "log".to_string()
            } else {
                format!("class_{c}")
            };
            json!({ "id": c as i64 + 1, "name": name })
        })
        .collect();
    let doc = json!({ "images": images, "annotations": annotations, "categories": categories });
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    image_id: String,
    width: i64,
    height: i64,
    gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<PathBuf>,
}

/// Parses a manifest, resolving relative paths against `base_dir`.
pub fn load_manifest(content: &str, base_dir: &Path) -> Result<DatasetManifest> {
    let records: Vec<ManifestRecord> = serde_json::from_str(content)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        if !seen.insert(r.image_id.clone()) {
            return Err(Error::DuplicateImage(r.image_id));
        }
        let dims =
            ImageDims::new(r.width, r.height).map_err(|e| Error::record(i, format!("image {:?}: {e}", r.image_id)))?;
        let gt_path = base_dir.join(&r.gt);
        if !gt_path.is_file() {
            return Err(Error::MissingFile {
                image_id: r.image_id,
                path: gt_path,
            });
        }
        entries.push(ManifestEntry {
            image_id: r.image_id,
            dims,
            gt_path: Some(gt_path),
            image_path: r.image.map(|p| base_dir.join(p)),
        });
    }
    DatasetManifest::new(entries)
}

/// Serializes a manifest. Paths under `base_dir` are written relative to it.
pub fn write_manifest(manifest: &DatasetManifest, base_dir: &Path) -> Result<String> {
    let rel = |p: &Path| p.strip_prefix(base_dir).unwrap_or(p).to_path_buf();
    let mut records = Vec::with_capacity(manifest.len());
    for e in manifest.entries() {
        let gt = e
            .gt_path
            .as_deref()
            .ok_or_else(|| Error::InvalidParam(format!("image {:?} has no ground-truth path", e.image_id)))?;
        records.push(ManifestRecord {
            image_id: e.image_id.clone(),
            width: e.dims.width as i64,
            height: e.dims.height as i64,
            gt: rel(gt),
            image: e.image_path.as_deref().map(rel),
        });
    }
    Ok(serde_json::to_string_pretty(&records)?)
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a manifest file; relative paths resolve against its directory.
pub fn load_manifest_file(path: &Path) -> Result<DatasetManifest> {
    let content = read_file(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_manifest(&content, base).map_err(|e| e.in_file(path.display().to_string()))
}

/// Loads every YOLO file named by the manifest.
pub fn load_dataset(manifest: DatasetManifest) -> Result<Dataset> {
    let mut records = Vec::new();
    for e in manifest.entries() {
        let path = e
            .gt_path
            .as_deref()
            .ok_or_else(|| Error::InvalidParam(format!("image {:?} has no ground-truth path", e.image_id)))?;
        let content = read_file(path)?;
        records.extend(parse_yolo_gt(&content, &e.image_id).map_err(|err| err.in_file(path.display().to_string()))?);
    }
    Dataset::new(manifest, records)
}

pub fn load_detections_file(path: &Path, mode: ParseMode) -> Result<Vec<Detection>> {
    let content = read_file(path)?;
    parse_detections(&content, mode).map_err(|e| e.in_file(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn yolo_single_line() {
        let gt = parse_yolo_gt("0 0.5 0.5 0.2 0.4\n", "img").unwrap();
        assert_eq!(gt.len(), 1);
        assert_eq!(gt[0].class_id, 0);
        assert_eq!(
            gt[0].bbox,
            NormBox {
                cx: 0.5,
                cy: 0.5,
                w: 0.2,
                h: 0.4
            }
        );
        assert_eq!(gt[0].image_id, "img");
    }

    #[test]
    fn yolo_empty_and_errors() {
        assert!(parse_yolo_gt("", "a").unwrap().is_empty());
        assert!(parse_yolo_gt("\n  \n", "a").unwrap().is_empty());
        assert_eq!(line_of(parse_yolo_gt("0 0.5 0.5 0.2\n", "a").unwrap_err()), 1);
        assert_eq!(
            line_of(parse_yolo_gt("0 0.5 0.5 0.2 0.2\n0 x 0.5 0.1 0.1", "a").unwrap_err()),
            2
        );
        assert_eq!(line_of(parse_yolo_gt("-1 0.5 0.5 0.2 0.2", "a").unwrap_err()), 1);
        assert_eq!(line_of(parse_yolo_gt("0 0.95 0.5 0.2 0.2", "a").unwrap_err()), 1);
        assert_eq!(line_of(parse_yolo_gt("0 0.5 0.5 0 0.2", "a").unwrap_err()), 1);
    }

    #[test]
    fn yolo_write_format() {
        assert_eq!(write_yolo_gt(&[]).unwrap(), "");
        let r = GroundTruth {
            image_id: "a".into(),
            class_id: 0,
            bbox: NormBox::new(1.0 / 3.0, 0.5, 0.2, 0.1).unwrap(),
        };
        let text = write_yolo_gt(std::slice::from_ref(&r)).unwrap();
        assert_eq!(text, "0 0.333333 0.500000 0.200000 0.100000\n");
        let mut other = r.clone();
        other.image_id = "b".into();
        assert!(matches!(write_yolo_gt(&[r, other]), Err(Error::MixedImages(..))));
    }

    #[test]
    fn detections_well_formed() {
        let line = r#"{"image_id":"a","class_id":0,"cx":0.5,"cy":0.5,"w":0.1,"h":0.1,"confidence":0.9}"#;
        let d = parse_detections(line, ParseMode::Strict).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].confidence, 0.9);
        assert_eq!(parse_detections(&write_detections(&d), ParseMode::Strict).unwrap(), d);
    }

    #[test]
    fn detections_errors_name_lines() {
        let bad_conf = r#"{"image_id":"a","class_id":0,"cx":0.5,"cy":0.5,"w":0.1,"h":0.1,"confidence":1.5}"#;
        assert_eq!(line_of(parse_detections(bad_conf, ParseMode::Strict).unwrap_err()), 1);

        let good = r#"{"image_id":"a","class_id":0,"cx":0.5,"cy":0.5,"w":0.1,"h":0.1,"confidence":0.5}"#;
        let missing = r#"{"image_id":"a","class_id":0,"cx":0.5,"cy":0.5,"w":0.1,"confidence":0.5}"#;
        let text = format!("{good}\n{missing}\n");
        let err = parse_detections(&text, ParseMode::Strict).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("`h`"), "{err}");
    }

    #[test]
    fn detections_strict_vs_lenient() {
        let extra = r#"{"image_id":"a","class_id":0,"cx":0.5,"cy":0.5,"w":0.1,"h":0.1,"confidence":0.5,"label":"log"}"#;
        assert!(parse_detections(extra, ParseMode::Strict).is_err());
        assert_eq!(parse_detections(extra, ParseMode::Lenient).unwrap().len(), 1);

        let meta = "# {\"conf\":0.25}\n";
        assert!(parse_detections(meta, ParseMode::Strict).is_err());
        assert!(parse_detections(meta, ParseMode::Lenient).unwrap().is_empty());
    }

    #[test]
    fn coco_bbox_to_norm() {
        let doc = r#"{"images":[{"id":1,"width":100,"height":100,"file_name":"a.jpg"}],
            "annotations":[{"image_id":1,"category_id":1,"bbox":[10,20,30,40]}]}"#;
        let ds = parse_coco_dataset(doc).unwrap();
        let b = ds.ground_truth()[0][0].bbox;
        assert!((b.cx - 0.25).abs() < 1e-12);
        assert!((b.cy - 0.40).abs() < 1e-12);
        assert!((b.w - 0.30).abs() < 1e-12);
        assert!((b.h - 0.40).abs() < 1e-12);
        assert_eq!(ds.ground_truth()[0][0].class_id, 0);
        assert_eq!(ds.manifest.entries()[0].image_id, "1");
    }

    #[test]
    fn coco_polygon_only() {
        let doc = r#"{"images":[{"id":"x","width":10,"height":20}],
            "annotations":[{"image_id":"x","category_id":7,"segmentation":[[0,0,4,0,2,3]]}]}"#;
        let ds = parse_coco_dataset(doc).unwrap();
        let want = pixel_to_norm(
            &polygon_bbox(&[(0.0, 0.0), (4.0, 0.0), (2.0, 3.0)]).unwrap(),
            ImageDims::new(10, 20).unwrap(),
        )
        .unwrap();
        assert_eq!(ds.ground_truth()[0][0].bbox, want);
    }

    #[test]
    fn coco_multi_polygon_union() {
        let doc = r#"{"images":[{"id":1,"width":10,"height":10}],
            "annotations":[{"image_id":1,"category_id":1,"segmentation":[[0,0,2,0,1,1],[5,5,8,5,6,9]]}]}"#;
        let ds = parse_coco_dataset(doc).unwrap();
        let b = ds.ground_truth()[0][0].bbox;
        assert!((b.w - 0.8).abs() < 1e-12 && (b.h - 0.9).abs() < 1e-12);
    }

    #[test]
    fn coco_errors() {
        let unknown = r#"{"images":[{"id":1,"width":10,"height":10}],
            "annotations":[{"image_id":2,"category_id":1,"bbox":[0,0,1,1]}]}"#;
        let err = parse_coco_dataset(unknown).unwrap_err();
        assert!(err.to_string().contains("unknown image"), "{err}");

        let flat = r#"{"images":[{"id":1,"width":10,"height":10}],
            "annotations":[{"image_id":1,"category_id":1,"bbox":[0,0,0,1]}]}"#;
        assert!(parse_coco_dataset(flat).is_err());

        let bare = r#"{"images":[{"id":1,"width":10,"height":10}],
            "annotations":[{"image_id":1,"category_id":1}]}"#;
        assert!(parse_coco_dataset(bare).is_err());
    }

    #[test]
    fn manifest_loading() {
        let dir = std::env::temp_dir().join(format!("loggauge-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.txt"), "").unwrap();
        std::fs::write(dir.join("b.txt"), "").unwrap();

        let ok = r#"[{"image_id":"a","width":10,"height":10,"gt":"a.txt"},
                     {"image_id":"b","width":20,"height":10,"gt":"b.txt","image":"b.jpg"}]"#;
        let m = load_manifest(ok, &dir).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.dims("b").unwrap(), ImageDims { width: 20, height: 10 });
        assert_eq!(
            m.get("a").unwrap().gt_path.as_deref(),
            Some(dir.join("a.txt").as_path())
        );

        let dup = r#"[{"image_id":"a","width":10,"height":10,"gt":"a.txt"},
                      {"image_id":"a","width":10,"height":10,"gt":"b.txt"}]"#;
        let err = load_manifest(dup, &dir).unwrap_err();
        assert!(err.to_string().contains("\"a\""), "{err}");

        let zero = r#"[{"image_id":"a","width":0,"height":100,"gt":"a.txt"}]"#;
        assert!(load_manifest(zero, &dir).is_err());

        let missing = r#"[{"image_id":"a","width":10,"height":10,"gt":"nope.txt"}]"#;
        assert!(matches!(load_manifest(missing, &dir), Err(Error::MissingFile { .. })));

        let written = write_manifest(&m, &dir).unwrap();
        assert_eq!(load_manifest(&written, &dir).unwrap(), m);
        std::fs::remove_dir_all(&dir).ok();
    }
}
