//! Occupancy decisions from detector boxes.
//!
//! A lot is scored against each accepted detection by one of two overlap
//! ratios and marked occupied when the best ratio reaches `tau`:
//!
//! * [`Heuristic::H1`]: intersection area over lot area. Depends only on how
//!   much of the lot is covered.
//! * [`Heuristic::H2`]: intersection area over detection-box area. Sensitive
//!   to the box shape: an elongated box that covers the whole lot still
//!   scores low, so it tends to miss lots seen from steep angles. Large lots
//!   covered by a comparatively small car box score low under H1 but high
//!   under H2.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{ImageAnnotation, Occupancy};
use crate::geometry::{intersection_area, AxisAlignedBox, ConvexQuad};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error("detection score {0} is outside [0, 1]")]
    InvalidScore(f64),
    #[error("tau must lie in (0, 1], got {0}")]
    InvalidTau(f64),
    #[error("score threshold must lie in [0, 1], got {0}")]
    InvalidScoreThreshold(f64),
    #[error("lot {lot_id:?} in {image} has rect geometry; decisions need quadrangles")]
    RectLot { image: String, lot_id: String },
    #[error("invalid detections file: {0}")]
    Detections(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    #[default]
    H1,
    H2,
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "h1" => Ok(Heuristic::H1),
            "h2" => Ok(Heuristic::H2),
            _ => Err(format!("unknown heuristic {s:?} (expected h1 or h2)")),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::H1 => "h1",
            Heuristic::H2 => "h2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: AxisAlignedBox,
    pub score: f64,
    pub label: String,
}

impl Detection {
    pub fn new(bbox: AxisAlignedBox, score: f64, label: impl Into<String>) -> Result<Self, DecisionError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(DecisionError::InvalidScore(score));
        }
        Ok(Self {
            bbox,
            score,
            label: label.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionParams {
    pub heuristic: Heuristic,
    pub tau: f64,
    pub score_threshold: f64,
    pub accepted_labels: BTreeSet<String>,
}

impl Default for DecisionParams {
    fn default() -> Self {
        Self {
            heuristic: Heuristic::H1,
            tau: 0.5,
            score_threshold: 0.5,
            accepted_labels: ["car", "truck", "bus"].into_iter().map(String::from).collect(),
        }
    }
}

impl DecisionParams {
    pub fn validate(&self) -> Result<(), DecisionError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(DecisionError::InvalidTau(self.tau));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(DecisionError::InvalidScoreThreshold(self.score_threshold));
        }
        Ok(())
    }

    fn accepts(&self, det: &Detection) -> bool {
        det.score >= self.score_threshold && self.accepted_labels.contains(&det.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Occupied,
    Free,
}

impl From<Decision> for Occupancy {
    fn from(d: Decision) -> Self {
        match d {
            Decision::Occupied => Occupancy::Occupied,
            Decision::Free => Occupancy::Free,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionResult {
    pub lot_id: String,
    pub ratio: f64,
    pub decided: Decision,
    /// Index into the detection list of the best-scoring accepted box;
    /// `None` when no accepted box overlaps the lot.
    pub supporting_detection: Option<usize>,
}

/// Overlap ratio of one detection against one lot, in `[0, 1]`.
pub fn heuristic_score(quad: &ConvexQuad, det: &Detection, heuristic: Heuristic) -> f64 {
    let overlap = intersection_area(quad, &det.bbox);
    let denom = match heuristic {
        Heuristic::H1 => quad.area(),
        Heuristic::H2 => det.bbox.area(),
    };
    (overlap / denom).clamp(0.0, 1.0)
}

/// Best ratio over the accepted detections; ties go to the lowest index.
pub fn decide_lot(
    lot_id: &str,
    quad: &ConvexQuad,
    detections: &[Detection],
    params: &DecisionParams,
) -> DecisionResult {
    let mut best: Option<(usize, f64)> = None;
    for (i, det) in detections.iter().enumerate() {
        if !params.accepts(det) {
            continue;
        }
        let r = heuristic_score(quad, det, params.heuristic);
        if r > 0.0 && best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    let ratio = best.map_or(0.0, |(_, r)| r);
    DecisionResult {
        lot_id: lot_id.to_owned(),
        ratio,
        decided: if ratio >= params.tau {
            Decision::Occupied
        } else {
            Decision::Free
        },
        supporting_detection: best.map(|(i, _)| i),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDecision {
    /// One result per lot, in the annotation's lot order.
    pub results: Vec<DecisionResult>,
    /// The input annotation with `occupied` replaced by the decisions.
    pub predicted: ImageAnnotation,
}

pub fn decide_image(
    annotation: &ImageAnnotation,
    detections: &[Detection],
    params: &DecisionParams,
) -> Result<ImageDecision, DecisionError> {
    let mut predicted = annotation.clone();
    let mut results = Vec::with_capacity(annotation.lots.len());
    for lot in &mut predicted.lots {
        let quad = lot.geometry.as_quad().ok_or_else(|| DecisionError::RectLot {
            image: annotation.image.clone(),
            lot_id: lot.id.clone(),
        })?;
        let r = decide_lot(&lot.id, quad, detections, params);
        lot.occupancy = r.decided.into();
        results.push(r);
    }
    Ok(ImageDecision { results, predicted })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImageDetections {
    image: String,
    detections: Vec<RawDetection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    bbox: [f64; 4],
    score: f64,
    label: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDetectionsFile {
    One(RawImageDetections),
    Many(Vec<RawImageDetections>),
}

/// Detector output for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDetections {
    pub image: String,
    pub detections: Vec<Detection>,
}

/// Parses a detections file: one
/// `{"image": str, "detections": [{"bbox": [xmin, ymin, xmax, ymax], "score": f, "label": str}]}`
/// object, or an array of them.
pub fn parse_detections(bytes: &[u8]) -> Result<Vec<ImageDetections>, DecisionError> {
    let raw: RawDetectionsFile = serde_json::from_slice(bytes).map_err(|e| DecisionError::Detections(e.to_string()))?;
    let images = match raw {
        RawDetectionsFile::One(one) => vec![one],
        RawDetectionsFile::Many(many) => many,
    };
    let mut seen = BTreeSet::new();
    images
        .into_iter()
        .map(|img| {
            if !seen.insert(img.image.clone()) {
                return Err(DecisionError::Detections(format!("image {:?} listed twice", img.image)));
            }
            let detections = img
                .detections
                .into_iter()
                .enumerate()
                .map(|(i, d)| {
                    let [x0, y0, x1, y1] = d.bbox;
                    let bbox = AxisAlignedBox::from_coords(x0, y0, x1, y1)
                        .map_err(|e| DecisionError::Detections(format!("{}: detections[{i}].bbox: {e}", img.image)))?;
                    Detection::new(bbox, d.score, d.label)
                        .map_err(|e| DecisionError::Detections(format!("{}: detections[{i}]: {e}", img.image)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ImageDetections {
                image: img.image,
                detections,
            })
        })
        .collect()
}
