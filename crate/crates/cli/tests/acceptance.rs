//! Acceptance suite. Each criterion runs against its time budget and prints
//! one status line; the test fails if any criterion fails.
//!
//! Run with `cargo test -p loggauge-cli --test acceptance -- --nocapture` to
//! see the per-criterion lines. Set `TIMBERSEG_ANNOTATIONS` to a manifest or
//! COCO file of the full TimberSeg 1.0 annotations to enable the dataset
//! statistics reproduction check.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use loggauge_core::annot_io::{
    load_dataset, load_manifest_file, parse_coco_dataset, parse_yolo_gt, read_file, write_detections, write_yolo_gt,
};
use loggauge_core::binning::{assign_bin, BinThresholds, DiameterBin};
use loggauge_core::geometry::{pixel_to_norm, polygon_bbox, ImageDims};
use loggauge_core::metrics::{evaluate, EvalOptions};
use loggauge_core::postprocess::greedy_nms;
use loggauge_core::{compute_stats, Dataset, DatasetStats, GroundTruth, NormBox};
use loggauge_testkit::fixtures::{
    perfect_fixture, random_box, random_detections, random_scene, replay, rng, write_fixture, SceneConfig,
};
use loggauge_testkit::reference::{ref_evaluate, ref_nms_indices};
use rand::Rng;
use serde_json::Value;
use tempfile::TempDir;

enum Status {
    Pass(String),
    Skip(String),
}

type Check = fn() -> Result<Status, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{name}: got {got}, want {want} (tol {tol})")
    })
}

fn loggauge(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_loggauge"))
        .args(args)
        .env_remove("LOGGAUGE_CONFIG")
        .output()
        .expect("binary runs")
}

fn reported_numbers_define_schema() -> Result<Status, String> {
    // The published test-set figures need the original weights and split;
    // only the report shape is checked here.
    let ds = perfect_fixture();
    let report = evaluate(&ds, &replay(&ds), &EvalOptions::default()).map_err(|e| e.to_string())?;
    let v = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    for key in [
        "precision",
        "recall",
        "f1",
        "conf_at_max_f1",
        "ap_per_iou",
        "map50",
        "map5095",
        "bin_report",
        "params",
        "counts",
    ] {
        ensure(v.get(key).is_some(), || format!("report lacks `{key}`"))?;
    }
    ensure(v["ap_per_iou"].as_object().map(|m| m.len()) == Some(10), || {
        "ap_per_iou must hold ten thresholds".into()
    })?;
    Ok(Status::Pass(
        "report schema carries precision/recall/mAP@0.5/mAP@0.5:0.95; reported values not reproducible".into(),
    ))
}

fn perfect_detector() -> Result<Status, String> {
    let ds = perfect_fixture();
    ensure(ds.manifest.len() == 10, || "fixture must have 10 images".into())?;
    let r = evaluate(&ds, &replay(&ds), &EvalOptions::default()).map_err(|e| e.to_string())?;
    let got = [
        r.precision,
        r.recall,
        r.f1,
        r.map50,
        r.map5095,
        r.bin_report.bin_accuracy.unwrap_or(f64::NAN),
    ];
    ensure(got == [1.0; 6], || format!("expected all 1.0, got {got:?}"))?;
    Ok(Status::Pass(format!(
        "{} instances, all six metrics exactly 1.0",
        r.counts.gt
    )))
}

fn oracle_equivalence() -> Result<Status, String> {
    const TOL: f64 = 1e-9;
    let mut r = rng(0xACCE97);
    let cfg = SceneConfig::default();
    let cases = 220;
    for case in 0..cases {
        let scene = random_scene(&mut r, &cfg);
        let got = evaluate(&scene.dataset, &scene.detections, &EvalOptions::default()).map_err(|e| e.to_string())?;
        let want = ref_evaluate(&scene.dataset, &scene.detections, 0.5, 30.0, 60.0);
        let ctx = |n: &str| format!("case {case} {n}");
        close(&ctx("precision"), got.precision, want.precision, TOL)?;
        close(&ctx("recall"), got.recall, want.recall, TOL)?;
        close(&ctx("f1"), got.f1, want.f1, TOL)?;
        close(&ctx("map50"), got.map50, want.map50, TOL)?;
        close(&ctx("map5095"), got.map5095, want.map5095, TOL)?;
        ensure(got.conf_at_max_f1 == want.conf_at_max_f1, || ctx("conf_at_max_f1"))?;
        for (k, v) in &want.ap {
            close(&ctx(&format!("ap@{k}")), got.ap_per_iou[k], *v, TOL)?;
        }
        ensure(got.bin_report.confusion == want.confusion, || ctx("confusion"))?;
        match (got.bin_report.bin_accuracy, want.bin_accuracy) {
            (Some(a), Some(b)) => close(&ctx("bin_accuracy"), a, b, TOL)?,
            (a, b) => ensure(a == b, || ctx("bin_accuracy definedness"))?,
        }
    }
    Ok(Status::Pass(format!(
        "{cases} seeded scenes agree with the reference evaluator within {TOL:e}"
    )))
}

fn nms_oracle() -> Result<Status, String> {
    let mut r = rng(0x9A5);
    let cases = 600;
    for case in 0..cases {
        let dims = ImageDims::new(r.gen_range(16..640), r.gen_range(16..640)).unwrap();
        let n = r.gen_range(0..=6);
        let dets = random_detections(&mut r, "img", dims, n);
        let thr = r.gen_range(0.0..=1.0);
        let got = greedy_nms(&dets, dims, thr).map_err(|e| e.to_string())?;
        let want: Vec<_> = ref_nms_indices(&dets, dims, thr)
            .into_iter()
            .map(|i| dets[i].clone())
            .collect();
        ensure(got == want, || format!("case {case}: kept sets differ"))?;
    }
    Ok(Status::Pass(format!(
        "{cases} cases of <= 6 boxes equal the exhaustive reference"
    )))
}

fn binning_boundaries() -> Result<Status, String> {
    let t = BinThresholds::default();
    let expect = [
        (29.9, DiameterBin::Thin),
        (30.0, DiameterBin::Medium),
        (60.0, DiameterBin::Medium),
        (60.1, DiameterBin::Thick),
    ];
    for (w, bin) in expect {
        let got = assign_bin(w, &t).map_err(|e| e.to_string())?;
        ensure(got == bin, || format!("{w} px -> {got}, want {bin}"))?;
    }
    let mut r = rng(10_000);
    let mut widths: Vec<f64> = (0..10_000).map(|_| r.gen_range(0.0..200.0)).collect();
    widths.sort_by(f64::total_cmp);
    let bins: Vec<DiameterBin> = widths.iter().map(|&w| assign_bin(w, &t).unwrap()).collect();
    ensure(bins.windows(2).all(|p| p[0] <= p[1]), || {
        "assign_bin is not monotone".into()
    })?;
    Ok(Status::Pass(
        "29.9/30/60/60.1 px boundaries and monotone over 10000 widths".into(),
    ))
}

/// Five images with hand-picked pixel boxes, including 2 px and 4608 px wide
/// instances and a 3489 px tall one.
type PixelSpec = (u32, u32, &'static [(f64, f64, f64, f64)]);

const SYNTHETIC: [PixelSpec; 5] = [
    (4608, 3456, &[(0.0, 0.0, 4608.0, 100.0), (10.0, 10.0, 2.0, 2.0)]),
    (3000, 3489, &[(100.0, 0.0, 50.0, 3489.0)]),
    (
        640,
        480,
        &[
            (0.0, 0.0, 64.0, 48.0),
            (100.0, 100.0, 32.0, 24.0),
            (300.0, 300.0, 10.0, 10.0),
        ],
    ),
    (800, 600, &[]),
    (1024, 768, &[(512.0, 384.0, 128.0, 96.0)]),
];

fn synthetic_dataset(dir: &Path) -> std::path::PathBuf {
    let mut images = Vec::new();
    let mut gts = Vec::new();
    for (i, (w, h, boxes)) in SYNTHETIC.iter().enumerate() {
        let id = format!("syn{i}");
        let dims = ImageDims::new(*w as i64, *h as i64).unwrap();
        for &(x, y, bw, bh) in boxes.iter() {
            let (fw, fh) = (*w as f64, *h as f64);
            gts.push(GroundTruth {
                image_id: id.clone(),
                class_id: 0,
                bbox: NormBox::new((x + bw / 2.0) / fw, (y + bh / 2.0) / fh, bw / fw, bh / fh).unwrap(),
            });
        }
        images.push((id, dims));
    }
    let ds = Dataset::new(loggauge_testkit::fixtures::manifest_of(&images), gts).unwrap();
    write_fixture(dir, &ds, None)
}

struct Expected {
    images: usize,
    instances: usize,
    avg: f64,
    width: (f64, f64),
    height: (f64, f64),
    area: f64,
    area_tol: f64,
}

fn check_table_like(stats: &Value, e: &Expected) -> Result<(), String> {
    let Expected {
        images,
        instances,
        avg,
        width,
        height,
        area,
        area_tol,
    } = *e;
    let num = |k: &str| stats[k].as_f64().ok_or_else(|| format!("missing {k}"));
    ensure(stats["num_images"] == images, || {
        format!("num_images {} != {images}", stats["num_images"])
    })?;
    ensure(stats["num_instances"] == instances, || {
        format!("num_instances {} != {instances}", stats["num_instances"])
    })?;
    close("avg_per_image", num("avg_per_image")?, avg, 0.05)?;
    let range = |k: &str| -> Result<(f64, f64), String> {
        let r = &stats[k];
        Ok((
            r["min"].as_f64().ok_or(k.to_string())?.round(),
            r["max"].as_f64().ok_or(k.to_string())?.round(),
        ))
    };
    ensure(range("width_range_px")? == width, || {
        format!("width range {:?} != {width:?}", range("width_range_px"))
    })?;
    ensure(range("height_range_px")? == height, || {
        format!("height range {:?} != {height:?}", range("height_range_px"))
    })?;
    let a = num("avg_area_pct")?;
    let b = num("avg_area_pct_per_image")?;
    ensure((a - area).abs() <= area_tol || (b - area).abs() <= area_tol, || {
        format!("area percent {a} / {b} not within {area_tol} of {area}")
    })
}

fn dataset_statistics() -> Result<Status, String> {
    // Unconditional: a synthetic manifest through the `stats` command.
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let manifest = synthetic_dataset(tmp.path());
    let o = loggauge(&["stats", manifest.to_str().unwrap(), "--json"]);
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let stats: Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;

    // independent expectation straight from the pixel specs
    let mut pcts = Vec::new();
    let mut per_image = Vec::new();
    for (w, h, boxes) in SYNTHETIC {
        let img: Vec<f64> = boxes
            .iter()
            .map(|b| 100.0 * b.2 * b.3 / (w as f64 * h as f64))
            .collect();
        if !img.is_empty() {
            per_image.push(img.iter().sum::<f64>() / img.len() as f64);
        }
        pcts.extend(img);
    }
    let per_instance = pcts.iter().sum::<f64>() / pcts.len() as f64;
    let per_image_mean = per_image.iter().sum::<f64>() / per_image.len() as f64;
    close(
        "synthetic avg_area_pct",
        stats["avg_area_pct"].as_f64().unwrap_or(f64::NAN),
        per_instance,
        1e-4,
    )?;
    close(
        "synthetic avg_area_pct_per_image",
        stats["avg_area_pct_per_image"].as_f64().unwrap_or(f64::NAN),
        per_image_mean,
        1e-4,
    )?;
    check_table_like(
        &stats,
        &Expected {
            images: 5,
            instances: 7,
            avg: 7.0 / 5.0,
            width: (2.0, 4608.0),
            height: (2.0, 3489.0),
            area: per_instance,
            area_tol: 1e-4,
        },
    )?;

    // Conditional: the real annotations.
    let Some(path) = std::env::var_os("TIMBERSEG_ANNOTATIONS") else {
        return Ok(Status::Skip(
            "synthetic 5-image path passed; TIMBERSEG_ANNOTATIONS unset, full dataset check skipped".into(),
        ));
    };
    let path = Path::new(&path);
    let dataset = match load_manifest_file(path).and_then(load_dataset) {
        Ok(ds) => ds,
        Err(_) => parse_coco_dataset(&read_file(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?,
    };
    let stats: DatasetStats = compute_stats(&dataset).map_err(|e| e.to_string())?;
    let stats = serde_json::to_value(&stats).map_err(|e| e.to_string())?;
    check_table_like(
        &stats,
        &Expected {
            images: 440,
            instances: 10_735,
            avg: 24.4,
            width: (2.0, 4608.0),
            height: (2.0, 3489.0),
            area: 2.85,
            area_tol: 0.3,
        },
    )?;
    Ok(Status::Pass(
        "synthetic path and full TimberSeg 1.0 statistics match".into(),
    ))
}

fn format_round_trips() -> Result<Status, String> {
    let mut r = rng(0xF0F0);
    let dims = ImageDims::new(4608, 3456).unwrap();
    let records: Vec<GroundTruth> = (0..1000)
        .map(|_| GroundTruth {
            image_id: "img".into(),
            class_id: 0,
            bbox: random_box(&mut r, dims, 0.9),
        })
        .collect();
    let back = parse_yolo_gt(&write_yolo_gt(&records).map_err(|e| e.to_string())?, "img").map_err(|e| e.to_string())?;
    ensure(back.len() == 1000, || "record count changed".into())?;
    for (a, b) in records.iter().zip(&back) {
        for (p, q) in [
            (a.bbox.cx, b.bbox.cx),
            (a.bbox.cy, b.bbox.cy),
            (a.bbox.w, b.bbox.w),
            (a.bbox.h, b.bbox.h),
        ] {
            close("yolo coordinate", q, p, 1e-6)?;
        }
    }

    // COCO polygons -> YOLO via the CLI, against direct normalization.
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let mut polys = Vec::new();
    let mut annotations = Vec::new();
    for k in 0..50 {
        let pts: Vec<(f64, f64)> = (0..r.gen_range(3..8))
            .map(|_| (r.gen_range(0.0..1920.0), r.gen_range(0.0..1080.0)))
            .collect();
        let flat: Vec<f64> = pts.iter().flat_map(|&(x, y)| [x, y]).collect();
        annotations.push(serde_json::json!({"id": k, "image_id": 1, "category_id": 1, "segmentation": [flat]}));
        polys.push(pts);
    }
    let doc = serde_json::json!({
        "images": [{"id": 1, "width": 1920, "height": 1080, "file_name": "frame.jpg"}],
        "annotations": annotations,
        "categories": [{"id": 1, "name": "log"}],
    });
    let coco = tmp.path().join("coco.json");
    std::fs::write(&coco, doc.to_string()).map_err(|e| e.to_string())?;
    let out = tmp.path().join("yolo");
    let o = loggauge(&[
        "convert",
        coco.to_str().unwrap(),
        "--from",
        "coco",
        "--to",
        "yolo",
        "--out",
        out.to_str().unwrap(),
    ]);
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let converted = parse_yolo_gt(
        &std::fs::read_to_string(out.join("1.txt")).map_err(|e| e.to_string())?,
        "1",
    )
    .map_err(|e| e.to_string())?;
    ensure(converted.len() == polys.len(), || {
        format!("{} boxes converted, want {}", converted.len(), polys.len())
    })?;
    let dims = ImageDims::new(1920, 1080).unwrap();
    for (pts, got) in polys.iter().zip(&converted) {
        let want = pixel_to_norm(&polygon_bbox(pts).unwrap(), dims).unwrap();
        for (p, q) in [
            (want.cx, got.bbox.cx),
            (want.cy, got.bbox.cy),
            (want.w, got.bbox.w),
            (want.h, got.bbox.h),
        ] {
            close("polygon box", q, p, 1e-6)?;
        }
    }
    Ok(Status::Pass(
        "1000-record YOLO identity and 50 COCO polygons within 1e-6".into(),
    ))
}

fn determinism() -> Result<Status, String> {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let mut r = rng(0xD37);
    let scene = random_scene(
        &mut r,
        &SceneConfig {
            max_images: 8,
            max_gt_per_image: 30,
            max_dets_per_image: 40,
            spurious_max: 10,
            ..SceneConfig::default()
        },
    );
    let manifest = write_fixture(tmp.path(), &scene.dataset, Some(&scene.detections));
    let dets = tmp.path().join("dets.jsonl");
    std::fs::write(&dets, write_detections(&scene.detections)).map_err(|e| e.to_string())?;
    let run = |threads: &str| {
        let o = loggauge(&[
            "eval",
            manifest.to_str().unwrap(),
            dets.to_str().unwrap(),
            "--no-timestamp",
            "--threads",
            threads,
        ]);
        (o.status.code(), o.stdout)
    };
    let first = run("1");
    ensure(first.0 == Some(0), || "eval failed".into())?;
    for threads in ["1", "4", "8"] {
        ensure(run(threads) == first, || {
            format!("report differs with --threads {threads}")
        })?;
    }
    Ok(Status::Pass(
        "four eval runs (1, 1, 4, 8 threads) byte-identical".into(),
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check, Duration); 8] = [
        (
            "reported figures define the schema",
            reported_numbers_define_schema,
            Duration::from_secs(1),
        ),
        ("perfect detector fixture", perfect_detector, Duration::from_secs(1)),
        ("oracle equivalence", oracle_equivalence, Duration::from_secs(30)),
        ("NMS oracle", nms_oracle, Duration::from_secs(5)),
        ("binning boundaries", binning_boundaries, Duration::from_secs(1)),
        (
            "dataset statistics reproduction",
            dataset_statistics,
            Duration::from_secs(30),
        ),
        ("format round-trips", format_round_trips, Duration::from_secs(30)),
        ("determinism", determinism, Duration::from_secs(60)),
    ];
    let mut failures = Vec::new();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let line = match result {
            Ok(_) if elapsed > budget => {
                failures.push(name);
                format!("[FAIL] {name}: took {elapsed:.2?}, budget {budget:?}")
            }
            Ok(Status::Pass(detail)) => format!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Ok(Status::Skip(detail)) => format!("[SKIP] {name}: {detail} ({elapsed:.2?})"),
            Err(msg) => {
                failures.push(name);
                format!("[FAIL] {name}: {msg}")
            }
        };
        println!("{line}");
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
