//! Occupancy metrics: confusion tallies, per-condition breakdowns, split
//! generation and whisker summaries across splits.

mod metrics;
mod predictions;
mod splits;
mod whiskers;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{ImageAnnotation, Occupancy, VisualTag};

pub use metrics::{compute_metrics, ConfusionCounts, Metric, Scores};
pub use predictions::{parse_predictions, write_predictions, Prediction, PredictionParseError, PredictionRecord};
pub use splits::{make_splits, parse_splits, write_splits, Partition, SplitError, SplitRatio, SplitSpec};
pub use whiskers::{quantile_sorted, whisker_stats, WhiskerError, WhiskerStats};

pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{} prediction(s) do not match an annotated lot: {}", .0.len(), .0.join(", "))]
    Unmatched(Vec<String>),
    #[error("prediction for {image} lot {lot_id:?} targets an unlabeled ground-truth lot")]
    UnlabeledTruth { image: String, lot_id: String },
    #[error("duplicate prediction for {image} lot {lot_id:?}")]
    Duplicate { image: String, lot_id: String },
    #[error("decision threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("split {split} references image {image} missing from the dataset")]
    SplitImage { split: u32, image: String },
    #[error("whiskers need at least 4 splits, got {0}")]
    TooFewSplits(usize),
}

/// Confusion counts for each image that has at least one prediction,
/// keyed by image path.
pub fn per_image_counts(
    predictions: &[PredictionRecord],
    truth: &[ImageAnnotation],
    threshold: f64,
) -> Result<BTreeMap<String, ConfusionCounts>, EvalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::Threshold(threshold));
    }
    let mut lots: HashMap<(&str, &str), Occupancy> = HashMap::new();
    for img in truth {
        for lot in &img.lots {
            lots.insert((img.image.as_str(), lot.id.as_str()), lot.occupancy);
        }
    }
    let mut unmatched = Vec::new();
    let mut seen = BTreeSet::new();
    let mut out: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for p in predictions {
        let key = (p.image.as_str(), p.lot_id.as_str());
        match lots.get(&key) {
            None => unmatched.push(format!("{}#{}", p.image, p.lot_id)),
            Some(Occupancy::Unlabeled) => {
                return Err(EvalError::UnlabeledTruth {
                    image: p.image.clone(),
                    lot_id: p.lot_id.clone(),
                })
            }
            Some(truth) => {
                if !seen.insert(key) {
                    return Err(EvalError::Duplicate {
                        image: p.image.clone(),
                        lot_id: p.lot_id.clone(),
                    });
                }
                out.entry(p.image.clone())
                    .or_default()
                    .record(*truth == Occupancy::Occupied, p.prediction.is_occupied(threshold));
            }
        }
    }
    if !unmatched.is_empty() {
        return Err(EvalError::Unmatched(unmatched));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub counts: ConfusionCounts,
    pub n_samples: u64,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

impl Bucket {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let s = compute_metrics(&counts);
        Self {
            counts,
            n_samples: counts.total(),
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub split_index: u32,
    pub overall: Bucket,
    pub per_tag: BTreeMap<VisualTag, Bucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhiskerSection {
    pub n_splits: usize,
    pub overall_f1: Option<WhiskerStats>,
    /// `None` for tags with fewer than 4 splits where F1 is defined.
    pub per_tag_f1: BTreeMap<VisualTag, Option<WhiskerStats>>,
}

/// Canonical evaluation report. Serialized key order is fixed by field
/// order; maps are ordered by key.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub overall: Bucket,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_tag: Option<BTreeMap<VisualTag, Bucket>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<Vec<SplitReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub whiskers: Option<WhiskerSection>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn tag_buckets(
    counts: &BTreeMap<String, ConfusionCounts>,
    tags_of: &HashMap<&str, &BTreeSet<VisualTag>>,
    include: impl Fn(&str) -> bool,
) -> (ConfusionCounts, BTreeMap<VisualTag, ConfusionCounts>) {
    let mut overall = ConfusionCounts::default();
    let mut per_tag: BTreeMap<VisualTag, ConfusionCounts> = VisualTag::ALL
        .iter()
        .map(|t| (*t, ConfusionCounts::default()))
        .collect();
    for (image, c) in counts.iter().filter(|(k, _)| include(k)) {
        overall += *c;
        if let Some(tags) = tags_of.get(image.as_str()) {
            for t in tags.iter() {
                *per_tag.entry(*t).or_default() += *c;
            }
        }
    }
    (overall, per_tag)
}

/// Overall and per-tag metrics. A lot counts towards every tag carried by
/// its image; all 11 tags appear in `per_tag`, empty ones with undefined
/// metrics.
pub fn evaluate(
    predictions: &[PredictionRecord],
    truth: &[ImageAnnotation],
    threshold: f64,
) -> Result<MetricsReport, EvalError> {
    let counts = per_image_counts(predictions, truth, threshold)?;
    let tags_of: HashMap<&str, &BTreeSet<VisualTag>> = truth.iter().map(|a| (a.image.as_str(), &a.tags)).collect();
    let (overall, per_tag) = tag_buckets(&counts, &tags_of, |_| true);
    Ok(MetricsReport {
        overall: Bucket::from_counts(overall),
        per_tag: Some(per_tag.into_iter().map(|(t, c)| (t, Bucket::from_counts(c))).collect()),
        splits: None,
        whiskers: None,
    })
}

/// Like [`evaluate`], plus one report per split over its test partition
/// and, when `whisker_splits` is given, whisker statistics of the F1
/// values over the first that many splits.
pub fn evaluate_with_splits(
    predictions: &[PredictionRecord],
    truth: &[ImageAnnotation],
    threshold: f64,
    splits: &[SplitSpec],
    whisker_splits: Option<usize>,
) -> Result<MetricsReport, EvalError> {
    let mut report = evaluate(predictions, truth, threshold)?;
    let counts = per_image_counts(predictions, truth, threshold)?;
    let tags_of: HashMap<&str, &BTreeSet<VisualTag>> = truth.iter().map(|a| (a.image.as_str(), &a.tags)).collect();

    let mut split_reports = Vec::with_capacity(splits.len());
    for s in splits {
        if let Some(missing) = s.assignment.keys().find(|k| !tags_of.contains_key(k.as_str())) {
            return Err(EvalError::SplitImage {
                split: s.split_index,
                image: missing.clone(),
            });
        }
        let (overall, per_tag) = tag_buckets(&counts, &tags_of, |img| s.assignment.get(img) == Some(&Partition::Test));
        split_reports.push(SplitReport {
            split_index: s.split_index,
            overall: Bucket::from_counts(overall),
            per_tag: per_tag.into_iter().map(|(t, c)| (t, Bucket::from_counts(c))).collect(),
        });
    }

    if let Some(k) = whisker_splits {
        if k < 4 || split_reports.len() < k {
            return Err(EvalError::TooFewSplits(k.min(split_reports.len())));
        }
        let used = &split_reports[..k];
        let defined = |vals: Vec<Option<f64>>| -> Option<WhiskerStats> {
            let vals: Vec<f64> = vals.into_iter().flatten().collect();
            whisker_stats(&vals).ok()
        };
        let overall_f1 = defined(used.iter().map(|r| r.overall.f1.get()).collect());
        let per_tag_f1 = VisualTag::ALL
            .iter()
            .map(|t| (*t, defined(used.iter().map(|r| r.per_tag[t].f1.get()).collect())))
            .collect();
        report.whiskers = Some(WhiskerSection {
            n_splits: k,
            overall_f1,
            per_tag_f1,
        });
    }
    report.splits = Some(split_reports);
    Ok(report)
}
