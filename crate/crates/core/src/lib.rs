//! Parking-lot occupancy dataset tooling: lot geometry, the annotation
//! schema, intersection-based occupancy decisions, patch extraction and
//! augmentation, and evaluation.

pub mod annotation;
pub mod decision;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod manifest;
pub mod patch;
pub mod raster;
pub mod seed;

pub use annotation::{ImageAnnotation, LotAnnotation, LotGeometry, Occupancy, VisualTag};
pub use decision::{Decision, DecisionParams, Detection, Heuristic};
pub use geometry::{AxisAlignedBox, ConvexQuad, Point2D};
pub use manifest::{Dataset, DatasetManifest};
