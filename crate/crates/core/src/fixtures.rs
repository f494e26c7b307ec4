//! Synthetic datasets reproducing the per-condition image counts of the
//! public parking-lot datasets, for exercising manifests, statistics and
//! splits at realistic scale.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::annotation::{ImageAnnotation, LotAnnotation, LotGeometry, Occupancy, VisualTag};
use crate::geometry::{ConvexQuad, Point2D};
use crate::manifest::DatasetManifest;

/// Image counts of one dataset, overall and per visual-condition tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetProfile {
    pub name: &'static str,
    pub total: usize,
    /// Counts in [`VisualTag::ALL`] order.
    pub per_tag: [usize; 11],
}

impl DatasetProfile {
    pub fn count(&self, tag: VisualTag) -> usize {
        let i = VisualTag::ALL.iter().position(|t| *t == tag).unwrap_or_default();
        self.per_tag[i]
    }
}

// sunny, overcast, rainy, winter, fog, glare, night, infrared,
// occlusion_car, occlusion_tree, distortion
pub const PKLOT: DatasetProfile = DatasetProfile {
    name: "pklot",
    total: 12417,
    per_tag: [6913, 4162, 1342, 0, 0, 0, 0, 0, 7, 10, 0],
};
pub const CNRPARK: DatasetProfile = DatasetProfile {
    name: "cnrpark",
    total: 3119,
    per_tag: [1075, 915, 576, 0, 33, 26, 27, 0, 54, 3119, 0],
};
pub const ACPDS: DatasetProfile = DatasetProfile {
    name: "acpds",
    total: 293,
    per_tag: [134, 132, 13, 0, 34, 1, 13, 0, 87, 35, 293],
};
pub const ACMPS: DatasetProfile = DatasetProfile {
    name: "acmps",
    total: 13126,
    per_tag: [2231, 312, 275, 0, 0, 20, 4, 4, 0, 0, 0],
};
pub const SPKL: DatasetProfile = DatasetProfile {
    name: "spkl",
    total: 1203,
    per_tag: [187, 76, 87, 440, 0, 27, 507, 495, 1203, 0, 400],
};

pub const PROFILES: [DatasetProfile; 5] = [PKLOT, CNRPARK, ACPDS, ACMPS, SPKL];

/// Tag sets for each image of a profile. Tag `t` covers a contiguous run
/// of `count(t)` images starting where the previous tag's run ended,
/// wrapping around, so every count is reproduced exactly.
pub fn profile_tag_sets(profile: &DatasetProfile) -> Vec<Vec<VisualTag>> {
    let mut sets = vec![Vec::new(); profile.total];
    let mut start = 0;
    for (tag, &count) in VisualTag::ALL.iter().zip(profile.per_tag.iter()) {
        for k in 0..count {
            sets[(start + k) % profile.total].push(*tag);
        }
        start = (start + count) % profile.total.max(1);
    }
    sets
}

/// Writes one annotation per image (a single quad lot each) plus a
/// `manifest.json` into `dir`, and returns the manifest path.
pub fn write_profile_dataset(profile: &DatasetProfile, dir: &Path) -> io::Result<PathBuf> {
    let ann_dir = dir.join("annotations");
    fs::create_dir_all(&ann_dir)?;
    let quad = ConvexQuad::new([
        Point2D::new(100.0, 120.0),
        Point2D::new(220.0, 110.0),
        Point2D::new(240.0, 260.0),
        Point2D::new(90.0, 270.0),
    ])
    .expect("fixture quad is convex");
    let mut entries = Vec::with_capacity(profile.total);
    for (i, tags) in profile_tag_sets(profile).into_iter().enumerate() {
        let a = ImageAnnotation {
            image: format!("images/{:06}.jpg", i),
            width: 640,
            height: 480,
            tags: tags.into_iter().collect(),
            lots: vec![LotAnnotation {
                id: "1".into(),
                geometry: LotGeometry::Quad(quad),
                occupancy: if i % 2 == 0 {
                    Occupancy::Occupied
                } else {
                    Occupancy::Free
                },
            }],
        };
        let rel = format!("annotations/{:06}.json", i);
        fs::write(dir.join(&rel), a.to_json())?;
        entries.push(rel);
    }
    let manifest = DatasetManifest::new(profile.name, ".", entries);
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json())?;
    Ok(path)
}
