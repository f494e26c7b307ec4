//! Per-lot prediction records, stored as JSON lines:
//!
//! ```text
//! {"image": "cam/1.jpg", "lot_id": "A1", "probability_occupied": 0.93}
//! {"image": "cam/1.jpg", "lot_id": "A2", "decided": "free", "ratio": 0.12}
//! ```
//!
//! Exactly one of `probability_occupied` and `decided` is present. `ratio`
//! is informational output of the decision engine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{Decision, DecisionResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Probability(f64),
    Decided(Decision),
}

impl Prediction {
    pub fn is_occupied(&self, threshold: f64) -> bool {
        match *self {
            Prediction::Probability(p) => p >= threshold,
            Prediction::Decided(d) => d == Decision::Occupied,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub image: String,
    pub lot_id: String,
    pub prediction: Prediction,
    pub ratio: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
#[error("predictions line {line}: {message}")]
pub struct PredictionParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    image: String,
    lot_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probability_occupied: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decided: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
}

impl PredictionRecord {
    pub fn from_decision(image: &str, r: &DecisionResult) -> Self {
        Self {
            image: image.to_owned(),
            lot_id: r.lot_id.clone(),
            prediction: Prediction::Decided(r.decided),
            ratio: Some(r.ratio),
        }
    }

    /// One JSON line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        let (probability_occupied, decided) = match self.prediction {
            Prediction::Probability(p) => (Some(p), None),
            Prediction::Decided(d) => (None, Some(d)),
        };
        let raw = RawRecord {
            image: self.image.clone(),
            lot_id: self.lot_id.clone(),
            probability_occupied,
            decided,
            ratio: self.ratio,
        };
        serde_json::to_string(&raw).expect("finite values serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let prediction = match (raw.probability_occupied, raw.decided) {
            (Some(p), None) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("probability_occupied {p} is outside [0, 1]"));
                }
                Prediction::Probability(p)
            }
            (None, Some(d)) => Prediction::Decided(d),
            _ => return Err("exactly one of probability_occupied and decided is required".into()),
        };
        Ok(Self {
            image: raw.image,
            lot_id: raw.lot_id,
            prediction,
            ratio: raw.ratio,
        })
    }
}

/// Parses a JSON-lines predictions file; blank lines are skipped.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, PredictionParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            PredictionRecord::from_json_line(l).map_err(|message| PredictionParseError { line: i + 1, message })
        })
        .collect()
}

pub fn write_predictions(records: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}
