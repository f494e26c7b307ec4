//! Repeated random train/val/test splits at a fixed ratio, stratified by
//! each image's share of occupied lots.
//!
//! Images are the split unit, so lots of one frame never straddle
//! partitions. For split `i` the stream is
//! `DetRng::derive("split", seed, [i as u64 LE])`, and the assignment is
//! built as follows:
//!
//! 1. partition sizes: `floor(n·r_p / Σr)`, with the leftover images going
//!    to the largest fractional remainders (ties to the earlier partition);
//! 2. a label sequence of length `n` is laid out so that every prefix
//!    tracks the target proportions (at each position the partition with
//!    the largest deficit `(m+1)·t_p − n·assigned_p` wins, ties to the
//!    earlier partition), then shuffled within consecutive blocks of `Σr`
//!    positions;
//! 3. images (in manifest order) are shuffled, stably sorted by occupied
//!    fraction (images without labelled lots first), and zipped with the
//!    label sequence.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{ImageAnnotation, Occupancy};
use crate::seed::DetRng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("need at least {needed} images for ratio {ratio}, got {got}")]
    TooSmall { needed: u64, got: usize, ratio: SplitRatio },
    #[error("number of splits must be at least 1")]
    NoSplits,
    #[error("invalid split ratio: {0}")]
    Ratio(String),
    #[error("duplicate image path {0}")]
    DuplicateImage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u32; 3]", try_from = "[u32; 3]")]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatio {
    pub const DEFAULT: SplitRatio = SplitRatio {
        train: 6,
        val: 1,
        test: 3,
    };

    pub fn new(train: u32, val: u32, test: u32) -> Result<Self, SplitError> {
        if train == 0 || test == 0 {
            return Err(SplitError::Ratio("train and test parts must be positive".into()));
        }
        Ok(Self { train, val, test })
    }

    pub fn parts(&self) -> [u32; 3] {
        [self.train, self.val, self.test]
    }

    pub fn sum(&self) -> u64 {
        self.parts().iter().map(|&p| p as u64).sum()
    }

    /// Partition sizes for `n` images by the largest-remainder rule.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let total = self.sum() as u128;
        let n128 = n as u128;
        let parts = self.parts();
        let mut sizes = parts.map(|p| (n128 * p as u128 / total) as usize);
        let mut left = n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(n128 * parts[i] as u128 % total));
        for i in order {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl From<SplitRatio> for [u32; 3] {
    fn from(r: SplitRatio) -> Self {
        r.parts()
    }
}

impl TryFrom<[u32; 3]> for SplitRatio {
    type Error = SplitError;

    fn try_from(p: [u32; 3]) -> Result<Self, Self::Error> {
        Self::new(p[0], p[1], p[2])
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.val, self.test)
    }
}

impl FromStr for SplitRatio {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let parsed: Result<Vec<u32>, _> = parts.iter().map(|p| p.trim().parse::<u32>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => Self::new(v[0], v[1], v[2]),
            _ => Err(SplitError::Ratio(format!("{s:?} is not of the form train:val:test"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub split_index: u32,
    pub seed: u64,
    pub ratio: SplitRatio,
    pub assignment: BTreeMap<String, Partition>,
}

impl SplitSpec {
    pub fn images_in(&self, p: Partition) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |(_, q)| **q == p)
            .map(|(k, _)| k.as_str())
    }

    pub fn count(&self, p: Partition) -> usize {
        self.images_in(p).count()
    }
}

/// Occupied share of labelled lots, or -1 for images with none.
fn stratum_key(a: &ImageAnnotation) -> f64 {
    let labeled = a.labeled_count();
    if labeled == 0 {
        return -1.0;
    }
    let occupied = a.lots.iter().filter(|l| l.occupancy == Occupancy::Occupied).count();
    occupied as f64 / labeled as f64
}

fn label_sequence(sizes: [usize; 3], block: usize, rng: &mut DetRng) -> Vec<Partition> {
    let n: usize = sizes.iter().sum();
    let mut assigned = [0usize; 3];
    let mut seq = Vec::with_capacity(n);
    for m in 1..=n {
        let pick = (0..3)
            .filter(|&p| assigned[p] < sizes[p])
            .max_by(|&a, &b| {
                let da = (m * sizes[a]) as i128 - (n * assigned[a]) as i128;
                let db = (m * sizes[b]) as i128 - (n * assigned[b]) as i128;
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("sizes sum to n");
        assigned[pick] += 1;
        seq.push(Partition::ALL[pick]);
    }
    for chunk in seq.chunks_mut(block.max(1)) {
        rng.shuffle(chunk);
    }
    seq
}

/// `k` independent stratified splits of the images at `ratio`.
pub fn make_splits(
    images: &[ImageAnnotation],
    k: u32,
    ratio: SplitRatio,
    seed: u64,
) -> Result<Vec<SplitSpec>, SplitError> {
    if k == 0 {
        return Err(SplitError::NoSplits);
    }
    let needed = ratio.sum();
    if (images.len() as u64) < needed {
        return Err(SplitError::TooSmall {
            needed,
            got: images.len(),
            ratio,
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for a in images {
        if !seen.insert(a.image.as_str()) {
            return Err(SplitError::DuplicateImage(a.image.clone()));
        }
    }
    let keys: Vec<f64> = images.iter().map(stratum_key).collect();
    let sizes = ratio.sizes(images.len());

    Ok((0..k)
        .map(|split_index| {
            let mut rng = DetRng::derive("split", seed, &[&(split_index as u64).to_le_bytes()]);
            let labels = label_sequence(sizes, needed as usize, &mut rng);
            let mut order: Vec<usize> = (0..images.len()).collect();
            rng.shuffle(&mut order);
            order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
            let assignment = order
                .iter()
                .zip(labels)
                .map(|(&i, p)| (images[i].image.clone(), p))
                .collect();
            SplitSpec {
                split_index,
                seed,
                ratio,
                assignment,
            }
        })
        .collect())
}

pub fn write_splits(splits: &[SplitSpec]) -> String {
    let mut s = serde_json::to_string_pretty(splits).expect("splits serialize");
    s.push('\n');
    s
}

pub fn parse_splits(bytes: &[u8]) -> Result<Vec<SplitSpec>, serde_json::Error> {
    serde_json::from_slice(bytes)
}
