//! Dataset manifests: a named list of annotation files under one root.
//!
//! ```json
//! {"name": "spkl", "root": ".", "entries": ["cam1/0001.json", "cam1/0002.json"]}
//! ```
//!
//! `root` is resolved against the manifest's own directory when relative;
//! entries and the `image` fields inside annotations are relative to it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{ImageAnnotation, ParseError, Rule, Violation, VisualTag};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("invalid annotation {path}: {source}")]
    Annotation {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub root: PathBuf,
    pub entries: Vec<String>,
    /// Directory the manifest was loaded from; `root` is relative to it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, root: impl Into<PathBuf>, entries: Vec<String>) -> Self {
        Self {
            name: name.into(),
            root: root.into(),
            entries,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let bytes = fs::read(path).map_err(|source| ManifestError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut m: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| ManifestError::Invalid {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        if let Some(bad) = m.entries.iter().find(|e| !is_relative_entry(e)) {
            return Err(ManifestError::Invalid {
                path: path.to_owned(),
                message: format!("entry {bad:?} must be a relative path inside the root"),
            });
        }
        m.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(m)
    }

    /// Builds a manifest listing every `*.json` annotation below `dir`,
    /// sorted, skipping files named `manifest.json`.
    pub fn from_directory(dir: &Path) -> Result<Self, ManifestError> {
        let mut entries = Vec::new();
        collect_json(dir, dir, &mut entries)?;
        entries.sort();
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_owned());
        Ok(Self {
            name,
            root: PathBuf::from("."),
            entries,
            base_dir: dir.to_owned(),
        })
    }

    /// Loads a manifest file, or scans a directory when given one.
    pub fn open(path: &Path) -> Result<Self, ManifestError> {
        if path.is_dir() {
            Self::from_directory(path)
        } else {
            Self::load(path)
        }
    }

    pub fn resolved_root(&self) -> PathBuf {
        self.base_dir.join(&self.root)
    }

    pub fn entry_path(&self, entry: &str) -> PathBuf {
        self.resolved_root().join(entry)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap_or_default();
        s.push('\n');
        s
    }

    pub fn read_entry(&self, entry: &str) -> Result<ImageAnnotation, ManifestError> {
        let path = self.entry_path(entry);
        let bytes = fs::read(&path).map_err(|source| ManifestError::Io {
            path: path.clone(),
            source,
        })?;
        ImageAnnotation::from_json(&bytes).map_err(|source| ManifestError::Annotation { path, source })
    }
}

fn is_relative_entry(entry: &str) -> bool {
    !entry.is_empty()
        && !entry.starts_with('/')
        && !entry.contains('\\')
        && entry.split('/').all(|c| !c.is_empty() && c != "..")
}

fn collect_json(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), ManifestError> {
    let read = fs::read_dir(dir).map_err(|source| ManifestError::Io {
        path: dir.to_owned(),
        source,
    })?;
    for item in read {
        let item = item.map_err(|source| ManifestError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let path = item.path();
        if path.is_dir() {
            collect_json(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "json")
            && path.file_name().is_some_and(|n| n != "manifest.json")
        {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let parts: Vec<String> = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            out.push(parts.join("/"));
        }
    }
    Ok(())
}

/// A manifest together with its parsed annotations, in entry order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub images: Vec<ImageAnnotation>,
}

impl Dataset {
    pub fn load(manifest: DatasetManifest) -> Result<Self, ManifestError> {
        let images = manifest
            .entries
            .iter()
            .map(|e| manifest.read_entry(e))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { manifest, images })
    }

    pub fn open(path: &Path) -> Result<Self, ManifestError> {
        Self::load(DatasetManifest::open(path)?)
    }
}

/// Every rule broken by the manifest or its annotation files. Empty means
/// the dataset is valid.
pub fn validate_manifest(m: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut entries_seen = BTreeSet::new();
    let mut images_seen: BTreeMap<String, String> = BTreeMap::new();
    for entry in &m.entries {
        if !entries_seen.insert(entry.as_str()) {
            out.push(
                Violation::new(Rule::DuplicateEntry, "entries", format!("entry {entry:?} listed twice"))
                    .in_file(entry.clone()),
            );
            continue;
        }
        if !is_relative_entry(entry) {
            out.push(
                Violation::new(
                    Rule::UnsafeImagePath,
                    "entries",
                    "entry must be a relative path inside the root",
                )
                .in_file(entry.clone()),
            );
            continue;
        }
        let bytes = match fs::read(m.entry_path(entry)) {
            Ok(b) => b,
            Err(e) => {
                out.push(Violation::new(Rule::UnreadableFile, "", e.to_string()).in_file(entry.clone()));
                continue;
            }
        };
        match ImageAnnotation::from_json(&bytes) {
            Ok(a) => {
                if let Some(first) = images_seen.get(&a.image) {
                    out.push(
                        Violation::new(
                            Rule::DuplicateImagePath,
                            "image",
                            format!("image path {:?} is already annotated by {first}", a.image),
                        )
                        .in_file(entry.clone()),
                    );
                } else {
                    images_seen.insert(a.image.clone(), entry.clone());
                }
            }
            Err(e) => out.extend(e.violations.into_iter().map(|v| v.in_file(entry.clone()))),
        }
    }
    out
}

/// Image counts per visual-condition tag. Tags are not exclusive, so the
/// per-tag counts may sum to more than `total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub per_tag: BTreeMap<VisualTag, usize>,
}

impl DatasetStats {
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a ImageAnnotation>) -> Self {
        let mut per_tag: BTreeMap<VisualTag, usize> = VisualTag::ALL.iter().map(|t| (*t, 0)).collect();
        let mut total = 0;
        for img in images {
            total += 1;
            for tag in &img.tags {
                *per_tag.entry(*tag).or_default() += 1;
            }
        }
        Self { total, per_tag }
    }

    pub fn count(&self, tag: VisualTag) -> usize {
        self.per_tag.get(&tag).copied().unwrap_or_default()
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>8}", "property", "images")?;
        writeln!(f, "{:<16} {:>8}", "total", self.total)?;
        for tag in VisualTag::ALL {
            writeln!(f, "{:<16} {:>8}", tag.as_str(), self.count(tag))?;
        }
        Ok(())
    }
}

pub fn dataset_stats(m: &DatasetManifest) -> Result<DatasetStats, ManifestError> {
    let mut images = Vec::with_capacity(m.entries.len());
    for entry in &m.entries {
        images.push(m.read_entry(entry)?);
    }
    Ok(DatasetStats::from_images(&images))
}
