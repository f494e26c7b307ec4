//! Analytic fixture: four 640x480 frames with 100x100 square lots and
//! hand-placed detector boxes, so every H1 decision and every confusion
//! count is known in advance.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use spotcheck_core::raster::ImageBuffer;

/// Planned outcome of one labeled lot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Detection covers 80% of the lot; truth occupied.
    Tp,
    /// Detection covers 80%; truth free.
    Fp,
    /// Detection covers 20%; truth occupied.
    FnLow,
    /// No detection at all; truth occupied.
    FnNone,
    /// Detection covers 20%; truth free.
    TnLow,
    /// Full cover by a box below the score threshold; truth free.
    TnLowScore,
    /// Full cover by a non-vehicle label; truth free.
    TnPerson,
    /// No detection; truth free.
    TnNone,
}

/// Lot layout per image; 16 labeled lots in total.
pub const PLAN: [[Case; 4]; 4] = [
    [Case::Tp, Case::Tp, Case::Fp, Case::TnNone],
    [Case::Tp, Case::FnLow, Case::TnLow, Case::TnLowScore],
    [Case::Tp, Case::Fp, Case::FnNone, Case::TnPerson],
    [Case::Tp, Case::FnLow, Case::TnLow, Case::TnNone],
];

pub const TAGS: [&[&str]; 4] = [&["sunny"], &["sunny", "winter"], &["night", "infrared"], &["overcast"]];

/// (tp, fp, fn, tn) over all labeled lots.
pub const EXPECTED: (u64, u64, u64, u64) = (5, 2, 3, 6);

pub fn expected_f1() -> f64 {
    let (tp, fp, fn_, _) = EXPECTED;
    2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64)
}

/// Expected H1 ratio of every lot in image order, the unlabeled extra lot
/// of image 0 included.
pub fn expected_ratios(image: usize) -> Vec<f64> {
    let mut out: Vec<f64> = PLAN[image]
        .iter()
        .map(|c| match c {
            Case::Tp | Case::Fp => 0.8,
            Case::FnLow | Case::TnLow => 0.2,
            _ => 0.0,
        })
        .collect();
    if image == 0 {
        out.push(1.0);
    }
    out
}

fn lot_origin(j: usize) -> (f64, f64) {
    (20.0 + 150.0 * j as f64, 100.0)
}

pub fn image_name(i: usize) -> String {
    format!("cam/{i:04}.png")
}

pub struct Fixture {
    pub root: PathBuf,
    pub manifest: PathBuf,
    pub detections: PathBuf,
}

/// Writes annotations, frames, a manifest and a detections file under `dir`.
pub fn write_fixture(dir: &Path) -> Fixture {
    let root = dir.join("scene");
    std::fs::create_dir_all(root.join("cam")).unwrap();
    std::fs::create_dir_all(root.join("ann")).unwrap();
    let mut entries = Vec::new();
    let mut dets = Vec::new();
    for (i, row) in PLAN.iter().enumerate() {
        let mut lots = Vec::new();
        let mut boxes = Vec::new();
        for (j, case) in row.iter().enumerate() {
            let (x, y) = lot_origin(j);
            let truth = matches!(case, Case::Tp | Case::FnLow | Case::FnNone);
            lots.push(json!({
                "id": format!("L{j}"),
                "quad": [[x, y], [x + 100.0, y], [x + 100.0, y + 100.0], [x, y + 100.0]],
                "occupied": truth,
            }));
            let det = |w: f64, score: f64, label: &str| json!({"bbox": [x, y, x + w, y + 100.0], "score": score, "label": label});
            match case {
                Case::Tp | Case::Fp => boxes.push(det(80.0, 0.9, "car")),
                Case::FnLow | Case::TnLow => boxes.push(det(20.0, 0.9, "truck")),
                Case::TnLowScore => boxes.push(det(100.0, 0.3, "car")),
                Case::TnPerson => boxes.push(det(100.0, 0.99, "person")),
                Case::FnNone | Case::TnNone => {}
            }
        }
        if i == 0 {
            lots.push(json!({
                "id": "X",
                "quad": [[20, 300], [120, 300], [120, 400], [20, 400]],
                "occupied": null,
            }));
            boxes.push(json!({"bbox": [10, 290, 130, 410], "score": 0.8, "label": "bus"}));
        }
        let ann = json!({
            "image": image_name(i),
            "width": 640,
            "height": 480,
            "tags": TAGS[i],
            "lots": lots,
        });
        let entry = format!("ann/{i:04}.json");
        std::fs::write(root.join(&entry), serde_json::to_vec_pretty(&ann).unwrap()).unwrap();
        entries.push(entry);
        dets.push(json!({"image": image_name(i), "detections": boxes}));

        let frame = ImageBuffer::from_fn(640, 480, |x, y| {
            let v = ((x / 16 + y / 16 + i as u32) % 2) as f32;
            [v, 0.5 * v, 1.0 - v]
        });
        std::fs::write(root.join(image_name(i)), frame.encode_png().unwrap()).unwrap();
    }
    let manifest = root.join("manifest.json");
    let m: Value = json!({"name": "analytic", "root": ".", "entries": entries});
    std::fs::write(&manifest, serde_json::to_vec_pretty(&m).unwrap()).unwrap();
    let detections = dir.join("detections.json");
    std::fs::write(&detections, serde_json::to_vec_pretty(&Value::Array(dets)).unwrap()).unwrap();
    Fixture {
        root,
        manifest,
        detections,
    }
}

/// Runs the CLI in-process, returning (exit code, stdout).
pub fn run(args: &[&str]) -> (i32, String) {
    let mut argv = vec!["spotcheck".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let code = spotcheck_cli::run_with_output(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
