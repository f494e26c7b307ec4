//! Helpers shared by the integration tests. Kept free of library code so
//! the oracles stay independent of what they check.
#![allow(dead_code)]

use spotcheck_core::geometry::{AxisAlignedBox, ConvexQuad, Point2D};

/// SplitMix64; small, seedable and unrelated to the library's streams.
#[derive(Debug, Clone)]
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Closed point-in-convex-polygon test by edge cross-product signs, for
/// vertices in either orientation.
pub fn inside_convex(vertices: &[Point2D], p: Point2D) -> bool {
    let n = vertices.len();
    let mut pos = false;
    let mut neg = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        pos |= c > 0.0;
        neg |= c < 0.0;
    }
    !(pos && neg)
}

/// Stratified Monte-Carlo estimate of the area of
/// `{p in region : member(p)}`: one uniform sample in each cell of a
/// `grid × grid` partition of the rectangle `region`.
pub fn mc_area(region: (f64, f64, f64, f64), grid: usize, rng: &mut TestRng, member: impl Fn(Point2D) -> bool) -> f64 {
    let (x0, y0, x1, y1) = region;
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let cw = (x1 - x0) / grid as f64;
    let ch = (y1 - y0) / grid as f64;
    let mut hits = 0u64;
    for i in 0..grid {
        for j in 0..grid {
            let p = Point2D::new(x0 + (i as f64 + rng.unit()) * cw, y0 + (j as f64 + rng.unit()) * ch);
            if member(p) {
                hits += 1;
            }
        }
    }
    hits as f64 / (grid * grid) as f64 * (x1 - x0) * (y1 - y0)
}

/// Monte-Carlo area of quad ∩ box with 10^6 samples over the overlap of the
/// box and the quad's coordinate extent.
pub fn mc_intersection(quad: &[Point2D; 4], b: &AxisAlignedBox, rng: &mut TestRng) -> f64 {
    let qx0 = quad.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let qy0 = quad.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let qx1 = quad.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let qy1 = quad.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let region = (
        qx0.max(b.min().x),
        qy0.max(b.min().y),
        qx1.min(b.max().x),
        qy1.min(b.max().y),
    );
    mc_area(region, 1000, rng, |p| inside_convex(quad, p))
}

pub fn random_quad(rng: &mut TestRng, span: f64) -> ConvexQuad {
    loop {
        let cx = rng.range(0.2 * span, 0.8 * span);
        let cy = rng.range(0.2 * span, 0.8 * span);
        let pts: [Point2D; 4] = std::array::from_fn(|k| {
            let angle = (k as f64 + rng.range(-0.35, 0.35)) * std::f64::consts::FRAC_PI_2;
            let r = rng.range(0.05 * span, 0.3 * span);
            Point2D::new(cx + r * angle.cos(), cy + r * angle.sin())
        });
        if let Ok(q) = ConvexQuad::new(pts) {
            return q;
        }
    }
}

/// A box whose centre lies inside the quad.
pub fn random_box_over(rng: &mut TestRng, quad: &ConvexQuad, span: f64) -> AxisAlignedBox {
    let v = quad.vertices();
    let w: [f64; 4] = std::array::from_fn(|_| rng.unit() + 0.05);
    let sum: f64 = w.iter().sum();
    let cx = (0..4).map(|i| w[i] * v[i].x).sum::<f64>() / sum;
    let cy = (0..4).map(|i| w[i] * v[i].y).sum::<f64>() / sum;
    let hw = rng.range(0.02 * span, 0.4 * span);
    let hh = rng.range(0.02 * span, 0.4 * span);
    AxisAlignedBox::from_coords(cx - hw, cy - hh, cx + hw, cy + hh).unwrap()
}

use serde_json::{json, Value};
use spotcheck_core::annotation::{ImageAnnotation, LotAnnotation, LotGeometry, Occupancy, Rule, VisualTag};

fn random_id(rng: &mut TestRng) -> String {
    const ALPHABET: &[char] = &['A', 'B', 'c', '0', '1', '7', '-', '_', ' ', 'é', '"', '\\', '中'];
    let len = 1 + rng.index(6);
    (0..len).map(|_| ALPHABET[rng.index(ALPHABET.len())]).collect()
}

fn random_coord(rng: &mut TestRng, hi: f64) -> f64 {
    match rng.index(3) {
        0 => rng.index(hi as usize + 1) as f64,
        1 => (rng.range(0.0, hi) * 100.0).round() / 100.0,
        _ => rng.range(0.0, hi),
    }
}

/// A random valid annotation with lots in arbitrary id order.
pub fn random_annotation(rng: &mut TestRng) -> ImageAnnotation {
    let width = 64 + rng.index(1900) as u32;
    let height = 64 + rng.index(1900) as u32;
    let (w, h) = (width as f64, height as f64);
    let tags = VisualTag::ALL.iter().copied().filter(|_| rng.unit() < 0.3).collect();
    let n_lots = rng.index(9);
    let mut lots: Vec<LotAnnotation> = Vec::with_capacity(n_lots);
    while lots.len() < n_lots {
        let id = random_id(rng);
        if lots.iter().any(|l| l.id == id) {
            continue;
        }
        let geometry = if rng.unit() < 0.6 {
            loop {
                let pts: [Point2D; 4] =
                    std::array::from_fn(|_| Point2D::new(random_coord(rng, w), random_coord(rng, h)));
                if let Ok(q) = ConvexQuad::new(pts) {
                    break LotGeometry::Quad(q);
                }
            }
        } else {
            loop {
                let (x0, x1) = (random_coord(rng, w), random_coord(rng, w));
                let (y0, y1) = (random_coord(rng, h), random_coord(rng, h));
                if let Ok(b) = AxisAlignedBox::from_coords(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)) {
                    break LotGeometry::Rect(b);
                }
            }
        };
        let occupancy = [Occupancy::Occupied, Occupancy::Free, Occupancy::Unlabeled][rng.index(3)];
        lots.push(LotAnnotation {
            id,
            geometry,
            occupancy,
        });
    }
    ImageAnnotation {
        image: format!("cam{}/frame_{:05}.jpg", rng.index(5), rng.index(100_000)),
        width,
        height,
        tags,
        lots,
    }
}

/// Valid annotation used as the base of the mutation fuzz: two quad lots
/// and one rect lot inside a 640x480 image.
pub fn fuzz_base() -> Value {
    json!({
        "image": "cam1/0001.jpg",
        "width": 640,
        "height": 480,
        "tags": ["sunny", "occlusion_car"],
        "lots": [
            {"id": "A1", "quad": [[10, 10], [110, 12], [115, 90], [8, 85]], "occupied": true},
            {"id": "A2", "quad": [[200, 200], [300, 200], [300, 300], [200, 300]], "occupied": null},
            {"id": "B1", "rect": [[400, 50], [500, 150]], "occupied": false}
        ]
    })
}

pub struct Mutation {
    pub name: String,
    pub bytes: Vec<u8>,
    pub expected: Rule,
}

/// Every single-field mutation of `fuzz_base`, each breaking exactly one
/// schema rule.
pub fn single_field_mutations() -> Vec<Mutation> {
    let base = fuzz_base();
    let mut out = Vec::new();
    let mut push = |name: String, v: Value, expected: Rule| {
        out.push(Mutation {
            name,
            bytes: serde_json::to_vec_pretty(&v).unwrap(),
            expected,
        });
    };
    let edit = |f: &dyn Fn(&mut Value)| {
        let mut v = base.clone();
        f(&mut v);
        v
    };

    for key in ["image", "width", "height", "tags", "lots"] {
        push(
            format!("drop {key}"),
            edit(&|v| {
                v.as_object_mut().unwrap().remove(key);
            }),
            Rule::MissingField,
        );
    }
    push(
        "unknown top-level key".into(),
        edit(&|v| v["comment"] = json!("x")),
        Rule::UnknownField,
    );
    push(
        "empty image".into(),
        edit(&|v| v["image"] = json!("")),
        Rule::EmptyImagePath,
    );
    for bad in [
        "/abs/0001.jpg",
        "../0001.jpg",
        "cam1//0001.jpg",
        "cam1\\0001.jpg",
        "a/../../b.jpg",
    ] {
        push(
            format!("image {bad}"),
            edit(&|v| v["image"] = json!(bad)),
            Rule::UnsafeImagePath,
        );
    }
    push("image number".into(), edit(&|v| v["image"] = json!(7)), Rule::WrongType);
    for key in ["width", "height"] {
        push(
            format!("{key} zero"),
            edit(&|v| v[key] = json!(0)),
            Rule::NonPositiveDimension,
        );
        push(
            format!("{key} negative"),
            edit(&|v| v[key] = json!(-640)),
            Rule::NonPositiveDimension,
        );
        push(
            format!("{key} string"),
            edit(&|v| v[key] = json!("640")),
            Rule::WrongType,
        );
        push(
            format!("{key} fractional"),
            edit(&|v| v[key] = json!(640.5)),
            Rule::WrongType,
        );
    }
    push(
        "unknown tag".into(),
        edit(&|v| v["tags"][0] = json!("snowstorm")),
        Rule::UnknownTag,
    );
    push(
        "capitalized tag".into(),
        edit(&|v| v["tags"][0] = json!("Sunny")),
        Rule::UnknownTag,
    );
    push(
        "duplicate tag".into(),
        edit(&|v| v["tags"][1] = json!("sunny")),
        Rule::DuplicateTag,
    );
    push("tag number".into(), edit(&|v| v["tags"][0] = json!(1)), Rule::WrongType);
    push(
        "tags string".into(),
        edit(&|v| v["tags"] = json!("sunny")),
        Rule::WrongType,
    );
    push("lots object".into(), edit(&|v| v["lots"] = json!({})), Rule::WrongType);
    push(
        "lot not object".into(),
        edit(&|v| v["lots"][1] = json!([1, 2])),
        Rule::WrongType,
    );

    for (i, geom) in [(0usize, "quad"), (2, "rect")] {
        push(
            format!("lots[{i}] drop id"),
            edit(&|v| {
                v["lots"][i].as_object_mut().unwrap().remove("id");
            }),
            Rule::MissingField,
        );
        push(
            format!("lots[{i}] drop occupied"),
            edit(&|v| {
                v["lots"][i].as_object_mut().unwrap().remove("occupied");
            }),
            Rule::MissingField,
        );
        push(
            format!("lots[{i}] drop {geom}"),
            edit(&|v| {
                v["lots"][i].as_object_mut().unwrap().remove(geom);
            }),
            Rule::GeometryMissing,
        );
        push(
            format!("lots[{i}] empty id"),
            edit(&|v| v["lots"][i]["id"] = json!("")),
            Rule::EmptyLotId,
        );
        push(
            format!("lots[{i}] numeric id"),
            edit(&|v| v["lots"][i]["id"] = json!(3)),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] duplicate id"),
            edit(&|v| v["lots"][i]["id"] = json!("A2")),
            Rule::DuplicateLotId,
        );
        push(
            format!("lots[{i}] unknown key"),
            edit(&|v| v["lots"][i]["note"] = json!(1)),
            Rule::UnknownField,
        );
        push(
            format!("lots[{i}] occupied string"),
            edit(&|v| v["lots"][i]["occupied"] = json!("yes")),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] occupied number"),
            edit(&|v| v["lots"][i]["occupied"] = json!(1)),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] point arity"),
            edit(&|v| v["lots"][i][geom][0] = json!([1, 2, 3])),
            Rule::PointArity,
        );
        push(
            format!("lots[{i}] point scalar"),
            edit(&|v| v["lots"][i][geom][1] = json!(5)),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] coordinate string"),
            edit(&|v| v["lots"][i][geom][0][1] = json!("10")),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] coordinate null"),
            edit(&|v| v["lots"][i][geom][0][0] = Value::Null),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] {geom} not array"),
            edit(&|v| v["lots"][i][geom] = json!("x")),
            Rule::WrongType,
        );
        push(
            format!("lots[{i}] out of bounds x"),
            edit(&|v| {
                for p in v["lots"][i][geom].as_array_mut().unwrap() {
                    p[0] = json!(p[0].as_f64().unwrap() + 600.0);
                }
            }),
            Rule::OutOfBounds,
        );
        push(
            format!("lots[{i}] out of bounds negative y"),
            edit(&|v| {
                for p in v["lots"][i][geom].as_array_mut().unwrap() {
                    p[1] = json!(p[1].as_f64().unwrap() - 200.0);
                }
            }),
            Rule::OutOfBounds,
        );
    }
    push(
        "quad with 3 points".into(),
        edit(&|v| {
            v["lots"][0]["quad"].as_array_mut().unwrap().pop();
        }),
        Rule::QuadArity,
    );
    push(
        "quad with 5 points".into(),
        edit(&|v| {
            v["lots"][0]["quad"].as_array_mut().unwrap().push(json!([50, 50]));
        }),
        Rule::QuadArity,
    );
    push(
        "rect with 3 points".into(),
        edit(&|v| {
            v["lots"][2]["rect"].as_array_mut().unwrap().push(json!([450, 100]));
        }),
        Rule::RectArity,
    );
    push(
        "rect with 1 point".into(),
        edit(&|v| {
            v["lots"][2]["rect"].as_array_mut().unwrap().pop();
        }),
        Rule::RectArity,
    );
    push(
        "quad and rect".into(),
        edit(&|v| v["lots"][0]["rect"] = json!([[10, 10], [20, 20]])),
        Rule::GeometryConflict,
    );
    push(
        "rect and quad".into(),
        edit(&|v| v["lots"][2]["quad"] = json!([[0, 0], [1, 0], [1, 1], [0, 1]])),
        Rule::GeometryConflict,
    );
    push(
        "collinear quad".into(),
        edit(&|v| v["lots"][0]["quad"] = json!([[10, 10], [20, 20], [30, 30], [40, 40]])),
        Rule::DegenerateQuad,
    );
    push(
        "coincident quad".into(),
        edit(&|v| v["lots"][0]["quad"] = json!([[10, 10], [10, 10], [10, 10], [10, 10]])),
        Rule::DegenerateQuad,
    );
    push(
        "reflex quad".into(),
        edit(&|v| v["lots"][1]["quad"][2] = json!([240, 240])),
        Rule::NonConvexQuad,
    );
    push(
        "inverted rect".into(),
        edit(&|v| v["lots"][2]["rect"] = json!([[500, 150], [400, 50]])),
        Rule::DegenerateRect,
    );
    push(
        "flat rect".into(),
        edit(&|v| v["lots"][2]["rect"] = json!([[400, 50], [500, 50]])),
        Rule::DegenerateRect,
    );

    let text = serde_json::to_string_pretty(&base).unwrap();
    out.push(Mutation {
        name: "truncated".into(),
        bytes: text.as_bytes()[..text.len() / 2].to_vec(),
        expected: Rule::MalformedJson,
    });
    out.push(Mutation {
        name: "trailing comma".into(),
        bytes: text.replace("\"occupied\": false", "\"occupied\": false,").into_bytes(),
        expected: Rule::MalformedJson,
    });
    out.push(Mutation {
        name: "array document".into(),
        bytes: format!("[{text}]").into_bytes(),
        expected: Rule::NotAnObject,
    });
    out
}

/// Lot and detection pairs with a fixed 0.6 intersection: the unit-square
/// lot is covered over its lower 60 % by a box stretching `e` beyond its
/// right edge, for increasing `e`.
pub fn elongation_suite() -> Vec<(f64, ConvexQuad, AxisAlignedBox)> {
    let lot = ConvexQuad::new([
        Point2D::new(0.0, 0.0),
        Point2D::new(1.0, 0.0),
        Point2D::new(1.0, 1.0),
        Point2D::new(0.0, 1.0),
    ])
    .unwrap();
    (0..=16)
        .map(|k| {
            let e = k as f64 * 0.25;
            (e, lot, AxisAlignedBox::from_coords(0.0, 0.0, 1.0 + e, 0.6).unwrap())
        })
        .collect()
}

/// A car-sized box fully inside lots of growing size and perspective skew,
/// as for lots close to the camera.
pub fn large_lot_suite() -> Vec<(f64, ConvexQuad, AxisAlignedBox)> {
    let car = AxisAlignedBox::from_coords(100.0, 100.0, 140.0, 190.0).unwrap();
    (0..=12)
        .map(|k| {
            let s = 1.0 + k as f64 * 0.25;
            let (cx, cy) = (120.0, 145.0);
            let (hw, hh) = (22.0 * s, 48.0 * s);
            let skew = 4.0 * k as f64;
            let lot = ConvexQuad::new([
                Point2D::new(cx - hw - skew, cy - hh),
                Point2D::new(cx + hw - skew, cy - hh),
                Point2D::new(cx + hw + skew, cy + hh),
                Point2D::new(cx - hw + skew, cy + hh),
            ])
            .unwrap();
            (s, lot, car)
        })
        .collect()
}

use spotcheck_core::decision::Decision;
use spotcheck_core::eval::{ConfusionCounts, Prediction, PredictionRecord};

/// Random labelled dataset plus predictions for every labelled lot, in
/// shuffled order. Unlabelled lots get no prediction.
pub fn random_eval_case(rng: &mut TestRng, n_images: usize) -> (Vec<ImageAnnotation>, Vec<PredictionRecord>) {
    let rect = AxisAlignedBox::from_coords(0.0, 0.0, 1.0, 1.0).unwrap();
    let occupied_bias = rng.unit();
    let images: Vec<ImageAnnotation> = (0..n_images)
        .map(|i| ImageAnnotation {
            image: format!("img/{i:04}.png"),
            width: 10,
            height: 10,
            tags: VisualTag::ALL.iter().copied().filter(|_| rng.unit() < 0.35).collect(),
            lots: (0..rng.index(7))
                .map(|j| LotAnnotation {
                    id: format!("{j}"),
                    geometry: LotGeometry::Rect(rect),
                    occupancy: match rng.unit() {
                        u if u < 0.1 => Occupancy::Unlabeled,
                        u if u < 0.1 + 0.9 * occupied_bias => Occupancy::Occupied,
                        _ => Occupancy::Free,
                    },
                })
                .collect(),
        })
        .collect();
    let mut preds = Vec::new();
    for img in &images {
        for lot in img.lots.iter().filter(|l| l.occupancy != Occupancy::Unlabeled) {
            let prediction = if rng.unit() < 0.5 {
                Prediction::Probability(rng.index(21) as f64 / 20.0)
            } else if rng.unit() < 0.5 {
                Prediction::Decided(Decision::Occupied)
            } else {
                Prediction::Decided(Decision::Free)
            };
            preds.push(PredictionRecord {
                image: img.image.clone(),
                lot_id: lot.id.clone(),
                prediction,
                ratio: None,
            });
        }
    }
    for i in (1..preds.len()).rev() {
        preds.swap(i, rng.index(i + 1));
    }
    (images, preds)
}

/// Recount of confusion counts by a plain loop over ground-truth lots,
/// overall and per tag (a lot counts towards every tag of its image).
pub fn recount(
    images: &[ImageAnnotation],
    preds: &[PredictionRecord],
    threshold: f64,
) -> (ConfusionCounts, Vec<(VisualTag, ConfusionCounts)>) {
    let mut overall = ConfusionCounts::default();
    let mut per_tag: Vec<(VisualTag, ConfusionCounts)> = VisualTag::ALL
        .iter()
        .map(|t| (*t, ConfusionCounts::default()))
        .collect();
    for img in images {
        for lot in &img.lots {
            let Some(p) = preds.iter().find(|p| p.image == img.image && p.lot_id == lot.id) else {
                continue;
            };
            let truth = lot.occupancy == Occupancy::Occupied;
            let said = match p.prediction {
                Prediction::Probability(x) => x >= threshold,
                Prediction::Decided(d) => d == Decision::Occupied,
            };
            let bump = |c: &mut ConfusionCounts| match (truth, said) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            };
            bump(&mut overall);
            for (t, c) in per_tag.iter_mut() {
                if img.tags.contains(t) {
                    bump(c);
                }
            }
        }
    }
    (overall, per_tag)
}

/// F1 by the count identity, `None` when precision or recall has a zero
/// denominator.
pub fn f1_identity(c: &ConfusionCounts) -> Option<f64> {
    if c.tp + c.fp == 0 || c.tp + c.fn_ == 0 {
        return None;
    }
    Some(2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64)
}

/// Type-7 quantile computed from scratch on a copy of the data.
pub fn type7_quantile(values: &[f64], p: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (x.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= x.len() {
        return x[lo];
    }
    x[lo] + (h - lo as f64) * (x[lo + 1] - x[lo])
}
