use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Binary confusion counts with "occupied" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, truth_occupied: bool, predicted_occupied: bool) {
        match (truth_occupied, predicted_occupied) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// A metric value that may be undefined because of a zero denominator.
/// Undefined metrics carry `value == 0.0` and `defined == false`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub defined: bool,
}

impl Metric {
    pub const UNDEFINED: Metric = Metric {
        value: 0.0,
        defined: false,
    };

    pub fn defined(value: f64) -> Self {
        Self { value, defined: true }
    }

    pub fn get(&self) -> Option<f64> {
        self.defined.then_some(self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

fn ratio(num: u64, den: u64) -> Metric {
    if den == 0 {
        Metric::UNDEFINED
    } else {
        Metric::defined(num as f64 / den as f64)
    }
}

/// Precision `tp/(tp+fp)`, recall `tp/(tp+fn)` and
/// `F1 = 2·P·R / (P + R)`.
///
/// F1 is undefined when either precision or recall is; when both are
/// defined and zero, F1 is 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Scores {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision.get(), recall.get()) {
        (Some(p), Some(r)) if p + r > 0.0 => Metric::defined(2.0 * (p * r) / (p + r)),
        (Some(_), Some(_)) => Metric::defined(0.0),
        _ => Metric::UNDEFINED,
    };
    Scores { precision, recall, f1 }
}
