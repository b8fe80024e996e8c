//! Seeded synthetic scenes: ground truth plus noisy detections.

use std::path::{Path, PathBuf};

use loggauge_core::annot_io::{write_detections, write_manifest, write_yolo_gt};
use loggauge_core::{Dataset, DatasetManifest, Detection, GroundTruth, ImageDims, ManifestEntry, NormBox};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub max_images: usize,
    pub max_gt_per_image: usize,
    pub max_dets_per_image: usize,
    /// Box jitter as a fraction of box size.
    pub jitter: f64,
    pub drop_prob: f64,
    pub spurious_max: usize,
    /// Probability of rounding confidences to one decimal, which creates ties.
    pub tie_prob: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            max_images: 5,
            max_gt_per_image: 10,
            max_dets_per_image: 10,
            jitter: 0.3,
            drop_prob: 0.2,
            spurious_max: 3,
            tie_prob: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub dataset: Dataset,
    pub detections: Vec<Detection>,
}

/// A random normalized box with pixel extents of at least 2 px.
pub fn random_box(rng: &mut impl Rng, dims: ImageDims, max_frac: f64) -> NormBox {
    let (w, h) = (dims.width as f64, dims.height as f64);
    let bw = rng.gen_range(2.0..(w * max_frac).max(3.0)).min(w);
    let bh = rng.gen_range(2.0..(h * max_frac).max(3.0)).min(h);
    let x0 = rng.gen_range(0.0..=(w - bw));
    let y0 = rng.gen_range(0.0..=(h - bh));
    NormBox::new((x0 + bw / 2.0) / w, (y0 + bh / 2.0) / h, bw / w, bh / h).expect("box inside image")
}

fn jittered(rng: &mut impl Rng, b: &NormBox, amount: f64) -> NormBox {
    let dx = rng.gen_range(-amount..=amount) * b.w;
    let dy = rng.gen_range(-amount..=amount) * b.h;
    let sw = 1.0 + rng.gen_range(-amount..=amount);
    let sh = 1.0 + rng.gen_range(-amount..=amount);
    let x0 = (b.cx + dx - b.w * sw / 2.0).max(0.0);
    let x1 = (b.cx + dx + b.w * sw / 2.0).min(1.0);
    let y0 = (b.cy + dy - b.h * sh / 2.0).max(0.0);
    let y1 = (b.cy + dy + b.h * sh / 2.0).min(1.0);
    if x1 - x0 < 1e-4 || y1 - y0 < 1e-4 {
        return *b;
    }
    NormBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0).expect("jittered box inside image")
}

fn confidence(rng: &mut impl Rng, tie_prob: f64) -> f64 {
    let c: f64 = rng.gen_range(0.0..=1.0);
    if rng.gen_bool(tie_prob) {
        (c * 10.0).round() / 10.0
    } else {
        c
    }
}

pub fn manifest_of(dims: &[(String, ImageDims)]) -> DatasetManifest {
    DatasetManifest::new(
        dims.iter()
            .map(|(id, d)| ManifestEntry {
                image_id: id.clone(),
                dims: *d,
                gt_path: None,
                image_path: None,
            })
            .collect(),
    )
    .expect("unique ids")
}

/// Ground truth with jitter/drop/spurious noise applied to form detections.
/// Always yields at least one ground-truth instance.
pub fn random_scene(rng: &mut impl Rng, cfg: &SceneConfig) -> Scene {
    let n_images = rng.gen_range(1..=cfg.max_images.min(1009));
    let images: Vec<(String, ImageDims)> = (0..n_images)
        .map(|i| {
            let dims = ImageDims::new(rng.gen_range(40..=2000), rng.gen_range(40..=2000)).unwrap();
            (format!("img{:04}", (i * 389) % 1009), dims)
        })
        .collect();
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for (k, (id, dims)) in images.iter().enumerate() {
        let lo = usize::from(k == 0);
        let n_gt = rng.gen_range(lo..=cfg.max_gt_per_image);
        let mut image_dets = Vec::new();
        for _ in 0..n_gt {
            let class_id = if rng.gen_bool(0.1) { 1 } else { 0 };
            let bbox = random_box(rng, *dims, 0.4);
            gts.push(GroundTruth {
                image_id: id.clone(),
                class_id,
                bbox,
            });
            if !rng.gen_bool(cfg.drop_prob) {
                image_dets.push(Detection {
                    image_id: id.clone(),
                    class_id,
                    bbox: jittered(rng, &bbox, cfg.jitter),
                    confidence: confidence(rng, cfg.tie_prob),
                });
            }
        }
        for _ in 0..rng.gen_range(0..=cfg.spurious_max) {
            image_dets.push(Detection {
                image_id: id.clone(),
                class_id: 0,
                bbox: random_box(rng, *dims, 0.4),
                confidence: confidence(rng, cfg.tie_prob),
            });
        }
        image_dets.truncate(cfg.max_dets_per_image);
        dets.extend(image_dets);
    }
    // interleave images so nothing relies on grouped input
    let mut order: Vec<usize> = (0..dets.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let detections = order.into_iter().map(|i| dets[i].clone()).collect();
    Scene {
        dataset: Dataset::new(manifest_of(&images), gts).unwrap(),
        detections,
    }
}

/// `n` random detections on one image.
pub fn random_detections(rng: &mut impl Rng, image_id: &str, dims: ImageDims, n: usize) -> Vec<Detection> {
    (0..n)
        .map(|_| Detection {
            image_id: image_id.to_string(),
            class_id: if rng.gen_bool(0.2) { 1 } else { 0 },
            bbox: random_box(rng, dims, 0.6),
            confidence: confidence(rng, 0.3),
        })
        .collect()
}

type ImageSpec = (u32, u32, &'static [(f64, f64, f64, f64)]);

/// Ten hand-built images whose box widths straddle the bin thresholds.
pub fn perfect_fixture() -> Dataset {
    let specs: [ImageSpec; 10] = [
        (640, 480, &[(100.0, 100.0, 20.0, 40.0), (300.0, 200.0, 45.0, 45.0)]),
        (640, 480, &[(320.0, 240.0, 80.0, 60.0)]),
        (
            1024,
            768,
            &[
                (50.0, 50.0, 29.0, 30.0),
                (200.0, 300.0, 30.0, 30.0),
                (700.0, 400.0, 60.0, 50.0),
            ],
        ),
        (1024, 768, &[(500.0, 500.0, 61.0, 70.0)]),
        (
            4608,
            3456,
            &[(1000.0, 1000.0, 120.0, 300.0), (3000.0, 2000.0, 25.0, 25.0)],
        ),
        (800, 600, &[(400.0, 300.0, 400.0, 300.0)]),
        (
            800,
            600,
            &[
                (10.0, 10.0, 12.0, 12.0),
                (60.0, 10.0, 12.0, 12.0),
                (110.0, 10.0, 12.0, 12.0),
            ],
        ),
        (320, 320, &[(160.0, 160.0, 35.0, 90.0)]),
        (1920, 1080, &[(960.0, 540.0, 55.0, 200.0), (100.0, 900.0, 15.0, 40.0)]),
        (1920, 1080, &[(1500.0, 300.0, 90.0, 90.0)]),
    ];
    let mut images = Vec::new();
    let mut gts = Vec::new();
    for (i, (w, h, boxes)) in specs.iter().enumerate() {
        let id = format!("log_{i:02}");
        let dims = ImageDims::new(*w as i64, *h as i64).unwrap();
        for &(cx, cy, bw, bh) in boxes.iter() {
            let (fw, fh) = (*w as f64, *h as f64);
            gts.push(GroundTruth {
                image_id: id.clone(),
                class_id: 0,
                bbox: NormBox::new(cx / fw, cy / fh, bw / fw, bh / fh).unwrap(),
            });
        }
        images.push((id, dims));
    }
    Dataset::new(manifest_of(&images), gts).unwrap()
}

/// Ground truth replayed as detections with confidence 1.
pub fn replay(dataset: &Dataset) -> Vec<Detection> {
    dataset
        .ground_truth()
        .iter()
        .flatten()
        .map(|g| Detection {
            image_id: g.image_id.clone(),
            class_id: g.class_id,
            bbox: g.bbox,
            confidence: 1.0,
        })
        .collect()
}

/// Writes `labels/<id>.txt`, `manifest.json` and, if given, `dets.jsonl`.
/// Returns the manifest path.
pub fn write_fixture(dir: &Path, dataset: &Dataset, dets: Option<&[Detection]>) -> PathBuf {
    std::fs::create_dir_all(dir.join("labels")).unwrap();
    let mut entries = Vec::new();
    for (entry, gts) in dataset.images() {
        let path = dir.join("labels").join(format!("{}.txt", entry.image_id));
        std::fs::write(&path, write_yolo_gt(gts).unwrap()).unwrap();
        entries.push(ManifestEntry {
            gt_path: Some(path),
            ..entry.clone()
        });
    }
    let manifest = DatasetManifest::new(entries).unwrap();
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, write_manifest(&manifest, dir).unwrap()).unwrap();
    if let Some(dets) = dets {
        std::fs::write(dir.join("dets.jsonl"), write_detections(dets)).unwrap();
    }
    manifest_path
}
