//! Image-level annotation files.
//!
//! One JSON document per image:
//!
//! ```json
//! {
//!   "image": "cam1/0001.jpg",
//!   "width": 1280,
//!   "height": 720,
//!   "tags": ["sunny", "occlusion_car"],
//!   "lots": [
//!     {"id": "A1", "quad": [[10.0, 20.0], [30.0, 20.0], [30.0, 40.0], [10.0, 40.0]], "occupied": true},
//!     {"id": "A2", "rect": [[40.0, 20.0], [60.0, 40.0]], "occupied": null}
//!   ]
//! }
//! ```
//!
//! A lot carries exactly one of `quad` (four corners, detector-intersection
//! form) or `rect` (`[[xmin, ymin], [xmax, ymax]]`, patch form). `occupied`
//! is `true`, `false` or `null` for a lot that has not been labelled yet.
//!
//! [`write_image_annotation`] produces the canonical byte form: fixed key
//! order, lots sorted by id, quadrangle corners in canonical order and
//! numbers in shortest round-trip notation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{circumscribe, AxisAlignedBox, ConvexQuad, GeometryError, Point2D};

/// Geometry may overhang the image frame by this many pixels.
pub const BOUNDS_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualTag {
    Sunny,
    Overcast,
    Rainy,
    Winter,
    Fog,
    Glare,
    Night,
    Infrared,
    OcclusionCar,
    OcclusionTree,
    Distortion,
}

impl VisualTag {
    pub const ALL: [VisualTag; 11] = [
        VisualTag::Sunny,
        VisualTag::Overcast,
        VisualTag::Rainy,
        VisualTag::Winter,
        VisualTag::Fog,
        VisualTag::Glare,
        VisualTag::Night,
        VisualTag::Infrared,
        VisualTag::OcclusionCar,
        VisualTag::OcclusionTree,
        VisualTag::Distortion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VisualTag::Sunny => "sunny",
            VisualTag::Overcast => "overcast",
            VisualTag::Rainy => "rainy",
            VisualTag::Winter => "winter",
            VisualTag::Fog => "fog",
            VisualTag::Glare => "glare",
            VisualTag::Night => "night",
            VisualTag::Infrared => "infrared",
            VisualTag::OcclusionCar => "occlusion_car",
            VisualTag::OcclusionTree => "occlusion_tree",
            VisualTag::Distortion => "distortion",
        }
    }
}

impl fmt::Display for VisualTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VisualTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VisualTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown visual tag {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Occupancy {
    Occupied,
    Free,
    Unlabeled,
}

impl Occupancy {
    pub fn is_labeled(self) -> bool {
        self != Occupancy::Unlabeled
    }

    fn to_json(self) -> &'static str {
        match self {
            Occupancy::Occupied => "true",
            Occupancy::Free => "false",
            Occupancy::Unlabeled => "null",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LotGeometry {
    Quad(ConvexQuad),
    Rect(AxisAlignedBox),
}

impl LotGeometry {
    pub fn bounding_box(&self) -> AxisAlignedBox {
        match self {
            LotGeometry::Quad(q) => circumscribe(q),
            LotGeometry::Rect(r) => *r,
        }
    }

    pub fn as_quad(&self) -> Option<&ConvexQuad> {
        match self {
            LotGeometry::Quad(q) => Some(q),
            LotGeometry::Rect(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LotAnnotation {
    pub id: String,
    pub geometry: LotGeometry,
    pub occupancy: Occupancy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnnotation {
    /// Image path relative to the dataset root, `/`-separated.
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub tags: BTreeSet<VisualTag>,
    pub lots: Vec<LotAnnotation>,
}

impl ImageAnnotation {
    /// Strict parse of one annotation document.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ParseError> {
        parse_image_annotation(bytes, ParseMode::Strict).map(|p| p.annotation)
    }

    pub fn to_json(&self) -> String {
        write_image_annotation(self)
    }

    /// Sorts lots by id, the order used by the canonical form.
    pub fn canonicalize(&mut self) {
        self.lots.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn lot(&self, id: &str) -> Option<&LotAnnotation> {
        self.lots.iter().find(|l| l.id == id)
    }

    pub fn labeled_count(&self) -> usize {
        self.lots.iter().filter(|l| l.occupancy.is_labeled()).count()
    }

    /// Checks the invariants a constructed (rather than parsed) value must
    /// satisfy. Returns every violation found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if let Err(v) = check_image_path(&self.image) {
            out.push(v);
        }
        if self.width == 0 || self.height == 0 {
            out.push(Violation::new(
                Rule::NonPositiveDimension,
                "width",
                "image dimensions must be positive",
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, lot) in self.lots.iter().enumerate() {
            let loc = format!("lots[{i}]");
            if lot.id.is_empty() {
                out.push(Violation::new(Rule::EmptyLotId, &loc, "lot id must be non-empty"));
            } else if !seen.insert(lot.id.as_str()) {
                out.push(
                    Violation::new(Rule::DuplicateLotId, &loc, format!("duplicate lot id {:?}", lot.id))
                        .with_lot(&lot.id),
                );
            }
            if let Some(v) = check_bounds(&lot.geometry, self.width, self.height, &loc) {
                out.push(v.with_lot(&lot.id));
            }
        }
        out
    }
}

/// Named schema rules; every rejection carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    MalformedJson,
    NotAnObject,
    MissingField,
    UnknownField,
    WrongType,
    EmptyImagePath,
    UnsafeImagePath,
    NonPositiveDimension,
    UnknownTag,
    DuplicateTag,
    EmptyLotId,
    DuplicateLotId,
    GeometryMissing,
    GeometryConflict,
    QuadArity,
    RectArity,
    PointArity,
    NonFiniteCoordinate,
    DegenerateQuad,
    NonConvexQuad,
    DegenerateRect,
    OutOfBounds,
    DuplicateImagePath,
    DuplicateEntry,
    UnreadableFile,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::MalformedJson => "malformed_json",
            Rule::NotAnObject => "not_an_object",
            Rule::MissingField => "missing_field",
            Rule::UnknownField => "unknown_field",
            Rule::WrongType => "wrong_type",
            Rule::EmptyImagePath => "empty_image_path",
            Rule::UnsafeImagePath => "unsafe_image_path",
            Rule::NonPositiveDimension => "non_positive_dimension",
            Rule::UnknownTag => "unknown_tag",
            Rule::DuplicateTag => "duplicate_tag",
            Rule::EmptyLotId => "empty_lot_id",
            Rule::DuplicateLotId => "duplicate_lot_id",
            Rule::GeometryMissing => "geometry_missing",
            Rule::GeometryConflict => "geometry_conflict",
            Rule::QuadArity => "quad_arity",
            Rule::RectArity => "rect_arity",
            Rule::PointArity => "point_arity",
            Rule::NonFiniteCoordinate => "non_finite_coordinate",
            Rule::DegenerateQuad => "degenerate_quad",
            Rule::NonConvexQuad => "non_convex_quad",
            Rule::DegenerateRect => "degenerate_rect",
            Rule::OutOfBounds => "out_of_bounds",
            Rule::DuplicateImagePath => "duplicate_image_path",
            Rule::DuplicateEntry => "duplicate_entry",
            Rule::UnreadableFile => "unreadable_file",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// JSON location inside the document, e.g. `lots[2].quad`.
    pub location: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lot_id: Option<String>,
    pub message: String,
}

impl Violation {
    pub fn new(rule: Rule, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule,
            file: None,
            location: location.into(),
            lot_id: None,
            message: message.into(),
        }
    }

    pub fn with_lot(mut self, lot_id: &str) -> Self {
        self.lot_id = Some(lot_id.to_owned());
        self
    }

    pub fn in_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}: ")?;
        }
        if !self.location.is_empty() {
            write!(f, "{}: ", self.location)?;
        }
        if let Some(id) = &self.lot_id {
            write!(f, "lot {id:?}: ")?;
        }
        write!(f, "{} [{}]", self.message, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", format_violations(.violations))]
pub struct ParseError {
    pub violations: Vec<Violation>,
}

impl ParseError {
    pub fn rules(&self) -> Vec<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown keys are violations.
    #[default]
    Strict,
    /// Unknown keys are reported as warnings and ignored.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub annotation: ImageAnnotation,
    pub warnings: Vec<Violation>,
}

struct Walker {
    mode: ParseMode,
    violations: Vec<Violation>,
    warnings: Vec<Violation>,
}

impl Walker {
    fn fail(&mut self, v: Violation) {
        self.violations.push(v);
    }

    fn unknown_keys(&mut self, obj: &Map<String, Value>, allowed: &[&str], loc: &str) {
        for key in obj.keys().filter(|k| !allowed.contains(&k.as_str())) {
            let at = if loc.is_empty() {
                key.clone()
            } else {
                format!("{loc}.{key}")
            };
            let v = Violation::new(Rule::UnknownField, at, format!("unknown key {key:?}"));
            match self.mode {
                ParseMode::Strict => self.violations.push(v),
                ParseMode::Lenient => {
                    log::warn!("ignoring {v}");
                    self.warnings.push(v);
                }
            }
        }
    }

    fn required<'a>(&mut self, obj: &'a Map<String, Value>, key: &str, loc: &str) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            let at = if loc.is_empty() {
                key.to_owned()
            } else {
                format!("{loc}.{key}")
            };
            self.fail(Violation::new(
                Rule::MissingField,
                at,
                format!("missing required key {key:?}"),
            ));
        }
        v
    }

    fn dimension(&mut self, obj: &Map<String, Value>, key: &str) -> Option<u32> {
        let value = self.required(obj, key, "")?;
        match value {
            Value::Number(n) if n.as_u64().is_some() => {
                let n = n.as_u64().unwrap_or_default();
                if n == 0 {
                    self.fail(Violation::new(
                        Rule::NonPositiveDimension,
                        key,
                        format!("{key} must be positive"),
                    ));
                    None
                } else if n > u32::MAX as u64 {
                    self.fail(Violation::new(Rule::WrongType, key, format!("{key} is too large")));
                    None
                } else {
                    Some(n as u32)
                }
            }
            Value::Number(n) if n.as_i64().is_some() => {
                self.fail(Violation::new(
                    Rule::NonPositiveDimension,
                    key,
                    format!("{key} must be positive"),
                ));
                None
            }
            _ => {
                self.fail(Violation::new(
                    Rule::WrongType,
                    key,
                    format!("{key} must be a positive integer"),
                ));
                None
            }
        }
    }

    fn point(&mut self, value: &Value, loc: &str) -> Option<Point2D> {
        let Value::Array(xy) = value else {
            self.fail(Violation::new(Rule::WrongType, loc, "point must be an [x, y] array"));
            return None;
        };
        if xy.len() != 2 {
            self.fail(Violation::new(
                Rule::PointArity,
                loc,
                format!("point must have 2 coordinates, got {}", xy.len()),
            ));
            return None;
        }
        match (xy[0].as_f64(), xy[1].as_f64()) {
            (Some(x), Some(y)) if xy[0].is_number() && xy[1].is_number() => {
                let p = Point2D::new(x, y);
                if p.is_finite() {
                    Some(p)
                } else {
                    self.fail(Violation::new(
                        Rule::NonFiniteCoordinate,
                        loc,
                        "coordinate is not finite",
                    ));
                    None
                }
            }
            _ => {
                self.fail(Violation::new(Rule::WrongType, loc, "coordinates must be numbers"));
                None
            }
        }
    }

    fn points(&mut self, value: &Value, expected: usize, rule: Rule, loc: &str) -> Option<Vec<Point2D>> {
        let Value::Array(items) = value else {
            self.fail(Violation::new(Rule::WrongType, loc, "expected an array of points"));
            return None;
        };
        if items.len() != expected {
            let what = if rule == Rule::QuadArity { "quad" } else { "rect" };
            self.fail(Violation::new(
                rule,
                loc,
                format!("{what} must have {expected} points, got {}", items.len()),
            ));
            return None;
        }
        let mut out = Vec::with_capacity(expected);
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match self.point(item, &format!("{loc}[{i}]")) {
                Some(p) => out.push(p),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn lot(&mut self, value: &Value, loc: &str) -> Option<LotAnnotation> {
        let Value::Object(obj) = value else {
            self.fail(Violation::new(Rule::WrongType, loc, "lot must be an object"));
            return None;
        };
        let before = self.violations.len();
        self.unknown_keys(obj, &["id", "quad", "rect", "occupied"], loc);

        let id = match self.required(obj, "id", loc) {
            Some(Value::String(s)) if s.is_empty() => {
                self.fail(Violation::new(
                    Rule::EmptyLotId,
                    format!("{loc}.id"),
                    "lot id must be non-empty",
                ));
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.fail(Violation::new(
                    Rule::WrongType,
                    format!("{loc}.id"),
                    "lot id must be a string",
                ));
                None
            }
            None => None,
        };

        let occupancy = match self.required(obj, "occupied", loc) {
            Some(Value::Bool(true)) => Some(Occupancy::Occupied),
            Some(Value::Bool(false)) => Some(Occupancy::Free),
            Some(Value::Null) => Some(Occupancy::Unlabeled),
            Some(_) => {
                self.fail(Violation::new(
                    Rule::WrongType,
                    format!("{loc}.occupied"),
                    "occupied must be true, false or null",
                ));
                None
            }
            None => None,
        };

        let geometry = match (obj.get("quad"), obj.get("rect")) {
            (Some(_), Some(_)) => {
                self.fail(Violation::new(
                    Rule::GeometryConflict,
                    loc,
                    "lot has both quad and rect geometry",
                ));
                None
            }
            (None, None) => {
                self.fail(Violation::new(Rule::GeometryMissing, loc, "lot needs a quad or a rect"));
                None
            }
            (Some(q), None) => {
                let at = format!("{loc}.quad");
                self.points(q, 4, Rule::QuadArity, &at).and_then(|pts| {
                    match ConvexQuad::new([pts[0], pts[1], pts[2], pts[3]]) {
                        Ok(quad) => Some(LotGeometry::Quad(quad)),
                        Err(e) => {
                            let rule = match e {
                                GeometryError::NonConvex | GeometryError::SelfIntersecting => Rule::NonConvexQuad,
                                GeometryError::NonFinite => Rule::NonFiniteCoordinate,
                                _ => Rule::DegenerateQuad,
                            };
                            self.fail(Violation::new(rule, at, e.to_string()));
                            None
                        }
                    }
                })
            }
            (None, Some(r)) => {
                let at = format!("{loc}.rect");
                self.points(r, 2, Rule::RectArity, &at)
                    .and_then(|pts| match AxisAlignedBox::new(pts[0], pts[1]) {
                        Ok(b) => Some(LotGeometry::Rect(b)),
                        Err(e) => {
                            self.fail(Violation::new(
                                Rule::DegenerateRect,
                                at,
                                format!("{e}: rect is [[xmin, ymin], [xmax, ymax]]"),
                            ));
                            None
                        }
                    })
            }
        };

        if let Some(id) = &id {
            for v in &mut self.violations[before..] {
                v.lot_id.get_or_insert_with(|| id.clone());
            }
        }
        Some(LotAnnotation {
            id: id?,
            geometry: geometry?,
            occupancy: occupancy?,
        })
    }
}

fn check_image_path(path: &str) -> Result<(), Violation> {
    if path.is_empty() {
        return Err(Violation::new(
            Rule::EmptyImagePath,
            "image",
            "image path must be non-empty",
        ));
    }
    let unsafe_path = path.starts_with('/')
        || path.contains('\\')
        || path.contains('\0')
        || path.split('/').any(|c| c == ".." || c.is_empty());
    if unsafe_path {
        return Err(Violation::new(
            Rule::UnsafeImagePath,
            "image",
            format!("image path {path:?} must be relative, '/'-separated and stay inside the dataset root"),
        ));
    }
    Ok(())
}

fn check_bounds(geometry: &LotGeometry, width: u32, height: u32, loc: &str) -> Option<Violation> {
    let b = geometry.bounding_box();
    let (w, h) = (width as f64, height as f64);
    let t = BOUNDS_TOLERANCE;
    if b.min().x < -t || b.min().y < -t || b.max().x > w + t || b.max().y > h + t {
        Some(Violation::new(
            Rule::OutOfBounds,
            loc,
            format!(
                "geometry spans {}..{} which leaves the {width}x{height} image by more than {t} px",
                b.min(),
                b.max()
            ),
        ))
    } else {
        None
    }
}

/// Parses and validates one annotation document.
///
/// All violations found in the document are reported together. Lots come
/// back sorted by id.
pub fn parse_image_annotation(bytes: &[u8], mode: ParseMode) -> Result<Parsed, ParseError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ParseError {
        violations: vec![Violation::new(Rule::MalformedJson, "", e.to_string())],
    })?;
    let Value::Object(obj) = root else {
        return Err(ParseError {
            violations: vec![Violation::new(
                Rule::NotAnObject,
                "",
                "annotation must be a JSON object",
            )],
        });
    };
    let mut w = Walker {
        mode,
        violations: Vec::new(),
        warnings: Vec::new(),
    };
    w.unknown_keys(&obj, &["image", "width", "height", "tags", "lots"], "");

    let image = match w.required(&obj, "image", "") {
        Some(Value::String(s)) => match check_image_path(s) {
            Ok(()) => Some(s.clone()),
            Err(v) => {
                w.fail(v);
                None
            }
        },
        Some(_) => {
            w.fail(Violation::new(Rule::WrongType, "image", "image must be a string"));
            None
        }
        None => None,
    };
    let width = w.dimension(&obj, "width");
    let height = w.dimension(&obj, "height");

    let mut tags = BTreeSet::new();
    match w.required(&obj, "tags", "") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let loc = format!("tags[{i}]");
                match item {
                    Value::String(s) => match s.parse::<VisualTag>() {
                        Ok(tag) => {
                            if !tags.insert(tag) {
                                w.fail(Violation::new(
                                    Rule::DuplicateTag,
                                    loc,
                                    format!("tag {s:?} listed twice"),
                                ));
                            }
                        }
                        Err(msg) => w.fail(Violation::new(Rule::UnknownTag, loc, msg)),
                    },
                    _ => w.fail(Violation::new(Rule::WrongType, loc, "tag must be a string")),
                }
            }
        }
        Some(_) => w.fail(Violation::new(Rule::WrongType, "tags", "tags must be an array")),
        None => {}
    }

    let mut lots = Vec::new();
    match w.required(&obj, "lots", "") {
        Some(Value::Array(items)) => {
            let mut seen = BTreeSet::new();
            for (i, item) in items.iter().enumerate() {
                let loc = format!("lots[{i}]");
                if let Some(lot) = w.lot(item, &loc) {
                    if !seen.insert(lot.id.clone()) {
                        w.fail(
                            Violation::new(Rule::DuplicateLotId, &loc, format!("duplicate lot id {:?}", lot.id))
                                .with_lot(&lot.id),
                        );
                        continue;
                    }
                    if let (Some(wd), Some(ht)) = (width, height) {
                        if let Some(v) = check_bounds(&lot.geometry, wd, ht, &loc) {
                            w.fail(v.with_lot(&lot.id));
                            continue;
                        }
                    }
                    lots.push(lot);
                }
            }
        }
        Some(_) => w.fail(Violation::new(Rule::WrongType, "lots", "lots must be an array")),
        None => {}
    }

    if !w.violations.is_empty() {
        return Err(ParseError {
            violations: w.violations,
        });
    }
    let (Some(image), Some(width), Some(height)) = (image, width, height) else {
        unreachable!("missing fields are recorded as violations");
    };
    let mut annotation = ImageAnnotation {
        image,
        width,
        height,
        tags,
        lots,
    };
    annotation.canonicalize();
    Ok(Parsed {
        annotation,
        warnings: w.warnings,
    })
}

fn push_number(out: &mut String, v: f64) {
    // -0.0 and 0.0 are the same coordinate; write one spelling.
    let v = if v == 0.0 { 0.0 } else { v };
    out.push_str(&serde_json::Value::from(v).to_string());
}

fn push_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::Value::from(s).to_string());
}

fn push_points(out: &mut String, pts: &[Point2D]) {
    out.push('[');
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        push_number(out, p.x);
        out.push_str(", ");
        push_number(out, p.y);
        out.push(']');
    }
    out.push(']');
}

/// Canonical serialization: fixed key order, lots sorted by id, LF line
/// endings and a trailing newline.
pub fn write_image_annotation(a: &ImageAnnotation) -> String {
    let mut out = String::with_capacity(128 + a.lots.len() * 96);
    out.push_str("{\n  \"image\": ");
    push_string(&mut out, &a.image);
    out.push_str(&format!(
        ",\n  \"width\": {},\n  \"height\": {},\n  \"tags\": [",
        a.width, a.height
    ));
    for (i, tag) in a.tags.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        push_string(&mut out, tag.as_str());
    }
    out.push_str("],\n  \"lots\": [");
    let mut lots: Vec<&LotAnnotation> = a.lots.iter().collect();
    lots.sort_by(|x, y| x.id.cmp(&y.id));
    for (i, lot) in lots.iter().enumerate() {
        out.push_str(if i > 0 { ",\n    " } else { "\n    " });
        out.push_str("{\"id\": ");
        push_string(&mut out, &lot.id);
        match &lot.geometry {
            LotGeometry::Quad(q) => {
                out.push_str(", \"quad\": ");
                push_points(&mut out, q.vertices());
            }
            LotGeometry::Rect(r) => {
                out.push_str(", \"rect\": ");
                push_points(&mut out, &[r.min(), r.max()]);
            }
        }
        out.push_str(", \"occupied\": ");
        out.push_str(lot.occupancy.to_json());
        out.push('}');
    }
    if !lots.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lot {lot_id:?} in {image} is already in rect form")]
pub struct ConvertError {
    pub image: String,
    pub lot_id: String,
}

/// Replaces every quadrangle with its circumscribing rectangle.
pub fn convert_quads_to_rects(a: &ImageAnnotation) -> Result<ImageAnnotation, ConvertError> {
    let lots = a
        .lots
        .iter()
        .map(|lot| match &lot.geometry {
            LotGeometry::Quad(q) => Ok(LotAnnotation {
                geometry: LotGeometry::Rect(circumscribe(q)),
                ..lot.clone()
            }),
            LotGeometry::Rect(_) => Err(ConvertError {
                image: a.image.clone(),
                lot_id: lot.id.clone(),
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ImageAnnotation { lots, ..a.clone() })
}
