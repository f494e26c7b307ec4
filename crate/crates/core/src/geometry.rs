//! Planar geometry in pixel space: polygon areas, convex quadrangles,
//! axis-aligned boxes, quadrangle/box clipping and four-point homographies.
//!
//! Coordinates follow image conventions: the origin is the top-left corner
//! and `y` grows downward. A polygon whose standard shoelace sum is positive
//! therefore winds clockwise on screen.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Quadrangles with an area at or below this many square pixels are rejected.
pub const DEGENERATE_AREA: f64 = 1e-9;

/// Determinant magnitude below which a normalized homography is singular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("degenerate quadrangle: {0}")]
    Degenerate(&'static str),
    #[error("quadrangle is not convex")]
    NonConvex,
    #[error("quadrangle edges intersect each other")]
    SelfIntersecting,
    #[error("box must satisfy min < max on both axes")]
    InvalidBox,
    #[error("point correspondences are degenerate: {0}")]
    SingularSystem(&'static str),
    #[error("homography is not invertible")]
    NotInvertible,
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn lex_cmp(&self, other: &Self) -> Ordering {
        self.x.total_cmp(&other.x).then_with(|| self.y.total_cmp(&other.y))
    }
}

impl fmt::Display for Point2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Cross product of `a - o` and `b - o`. Positive when `o → a → b` turns
/// clockwise on screen (counter-clockwise in y-up axes).
#[inline]
fn cross(o: Point2D, a: Point2D, b: Point2D) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn signed_area(vertices: &[Point2D]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    twice / 2.0
}

/// Absolute shoelace area of a simple polygon given in either orientation.
pub fn polygon_area(vertices: &[Point2D]) -> Result<f64> {
    if vertices.len() < 3 {
        return Err(GeometryError::TooFewVertices(vertices.len()));
    }
    if !vertices.iter().all(Point2D::is_finite) {
        return Err(GeometryError::NonFinite);
    }
    Ok(signed_area(vertices).abs())
}

/// A convex quadrangle with vertices in canonical order: the
/// lexicographically smallest `(x, y)` vertex first, then clockwise on
/// screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexQuad {
    vertices: [Point2D; 4],
}

impl ConvexQuad {
    /// Builds a quadrangle from four corners given in any order.
    ///
    /// The corners are reordered along their convex hull, so an annotator's
    /// crossed click order is accepted as long as the four points are in
    /// convex position.
    pub fn new(points: [Point2D; 4]) -> Result<Self> {
        validate_quad(points)
    }

    /// Builds a quadrangle whose cyclic vertex order is taken as given; only
    /// the starting vertex and the orientation are normalized.
    pub fn from_cyclic(points: [Point2D; 4]) -> Result<Self> {
        if !points.iter().all(Point2D::is_finite) {
            return Err(GeometryError::NonFinite);
        }
        if segments_cross(points[0], points[1], points[2], points[3])
            || segments_cross(points[1], points[2], points[3], points[0])
        {
            return Err(GeometryError::SelfIntersecting);
        }
        let area = signed_area(&points);
        if area.abs() <= DEGENERATE_AREA {
            return Err(GeometryError::Degenerate("zero area"));
        }
        let sign = area.signum();
        for i in 0..4 {
            let turn = cross(points[i], points[(i + 1) % 4], points[(i + 2) % 4]);
            if turn == 0.0 {
                return Err(GeometryError::Degenerate("three collinear vertices"));
            }
            if turn.signum() != sign {
                return Err(GeometryError::NonConvex);
            }
        }
        let mut ordered = points;
        if sign < 0.0 {
            ordered.reverse();
        }
        Ok(Self {
            vertices: rotate_to_lex_min(ordered),
        })
    }

    pub fn vertices(&self) -> &[Point2D; 4] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Closed point-in-quadrangle test.
    pub fn contains(&self, p: Point2D) -> bool {
        (0..4).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % 4], p) >= 0.0)
    }

    /// The same cyclic order starting from the vertex nearest the top-left
    /// corner (smallest `x + y`). Used to map quadrangles onto upright
    /// patches.
    pub fn top_left_first(&self) -> [Point2D; 4] {
        let start = (0..4)
            .min_by(|&a, &b| {
                let pa = self.vertices[a];
                let pb = self.vertices[b];
                (pa.x + pa.y).total_cmp(&(pb.x + pb.y)).then_with(|| pa.lex_cmp(&pb))
            })
            .unwrap_or(0);
        let mut out = self.vertices;
        out.rotate_left(start);
        out
    }
}

fn rotate_to_lex_min(mut vertices: [Point2D; 4]) -> [Point2D; 4] {
    let start = (0..4).min_by(|&a, &b| vertices[a].lex_cmp(&vertices[b])).unwrap_or(0);
    vertices.rotate_left(start);
    vertices
}

/// Proper crossing of segments `ab` and `cd` (shared endpoints and touching
/// do not count).
fn segments_cross(a: Point2D, b: Point2D, c: Point2D, d: Point2D) -> bool {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Canonicalizes four corners given in any order into a [`ConvexQuad`].
///
/// Fails when the points are non-finite, collinear or coincident (area at
/// most [`DEGENERATE_AREA`]), or when one point lies strictly inside the
/// triangle of the other three.
pub fn validate_quad(points: [Point2D; 4]) -> Result<ConvexQuad> {
    if !points.iter().all(Point2D::is_finite) {
        return Err(GeometryError::NonFinite);
    }
    let mut sorted = points;
    sorted.sort_by(Point2D::lex_cmp);

    // Andrew's monotone chain; collinear points are dropped from the hull.
    let mut hull: Vec<Point2D> = Vec::with_capacity(8);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2D>> = if pass == 0 {
            Box::new(sorted.iter())
        } else {
            Box::new(sorted.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }

    if hull.len() < 3 || signed_area(&hull) <= DEGENERATE_AREA {
        return Err(GeometryError::Degenerate("collinear or coincident vertices"));
    }
    if hull.len() == 3 {
        let inner = points
            .iter()
            .copied()
            .find(|p| !hull.contains(p))
            .ok_or(GeometryError::Degenerate("coincident vertices"))?;
        let strictly_inside = (0..3).all(|i| cross(hull[i], hull[(i + 1) % 3], inner) > 0.0);
        return Err(if strictly_inside {
            GeometryError::NonConvex
        } else {
            GeometryError::Degenerate("three collinear vertices")
        });
    }
    let vertices = [hull[0], hull[1], hull[2], hull[3]];
    Ok(ConvexQuad {
        vertices: rotate_to_lex_min(vertices),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAlignedBox {
    min: Point2D,
    max: Point2D,
}

impl AxisAlignedBox {
    pub fn new(min: Point2D, max: Point2D) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if min.x >= max.x || min.y >= max.y {
            return Err(GeometryError::InvalidBox);
        }
        Ok(Self { min, max })
    }

    pub fn from_coords(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        Self::new(Point2D::new(xmin, ymin), Point2D::new(xmax, ymax))
    }

    pub fn min(&self) -> Point2D {
        self.min
    }

    pub fn max(&self) -> Point2D {
        self.max
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Corners in canonical quadrangle order.
    pub fn corners(&self) -> [Point2D; 4] {
        [
            self.min,
            Point2D::new(self.max.x, self.min.y),
            self.max,
            Point2D::new(self.min.x, self.max.y),
        ]
    }

    pub fn contains(&self, p: Point2D) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    fn overlaps(&self, other: &AxisAlignedBox) -> bool {
        self.min.x < other.max.x && other.min.x < self.max.x && self.min.y < other.max.y && other.min.y < self.max.y
    }
}

/// Smallest axis-aligned box containing the quadrangle.
pub fn circumscribe(quad: &ConvexQuad) -> AxisAlignedBox {
    let v = quad.vertices();
    let fold = |f: fn(f64, f64) -> f64, get: fn(&Point2D) -> f64| v.iter().map(get).reduce(f).unwrap_or_default();
    AxisAlignedBox {
        min: Point2D::new(fold(f64::min, |p| p.x), fold(f64::min, |p| p.y)),
        max: Point2D::new(fold(f64::max, |p| p.x), fold(f64::max, |p| p.y)),
    }
}

#[derive(Clone, Copy)]
enum HalfPlane {
    XAtLeast(f64),
    XAtMost(f64),
    YAtLeast(f64),
    YAtMost(f64),
}

impl HalfPlane {
    fn inside(self, p: Point2D) -> bool {
        match self {
            HalfPlane::XAtLeast(v) => p.x >= v,
            HalfPlane::XAtMost(v) => p.x <= v,
            HalfPlane::YAtLeast(v) => p.y >= v,
            HalfPlane::YAtMost(v) => p.y <= v,
        }
    }

    /// Point where segment `ab` crosses the boundary line. Only called when
    /// `a` and `b` lie on different sides, so the denominator is non-zero.
    fn crossing(self, a: Point2D, b: Point2D) -> Point2D {
        match self {
            HalfPlane::XAtLeast(v) | HalfPlane::XAtMost(v) => {
                let t = (v - a.x) / (b.x - a.x);
                Point2D::new(v, a.y + t * (b.y - a.y))
            }
            HalfPlane::YAtLeast(v) | HalfPlane::YAtMost(v) => {
                let t = (v - a.y) / (b.y - a.y);
                Point2D::new(a.x + t * (b.x - a.x), v)
            }
        }
    }
}

/// Sutherland–Hodgman clipping of a convex polygon by an axis-aligned box.
/// Returns the vertices of the (convex) intersection, possibly empty.
pub fn clip_to_box(polygon: &[Point2D], bbox: &AxisAlignedBox) -> Vec<Point2D> {
    let planes = [
        HalfPlane::XAtLeast(bbox.min.x),
        HalfPlane::XAtMost(bbox.max.x),
        HalfPlane::YAtLeast(bbox.min.y),
        HalfPlane::YAtMost(bbox.max.y),
    ];
    let mut current: Vec<Point2D> = polygon.to_vec();
    let mut next = Vec::with_capacity(polygon.len() + 4);
    for plane in planes {
        if current.is_empty() {
            break;
        }
        next.clear();
        let mut prev = current[current.len() - 1];
        let mut prev_inside = plane.inside(prev);
        for &p in &current {
            let inside = plane.inside(p);
            if inside != prev_inside {
                next.push(plane.crossing(prev, p));
            }
            if inside {
                next.push(p);
            }
            prev = p;
            prev_inside = inside;
        }
        std::mem::swap(&mut current, &mut next);
    }
    current
}

/// Area of the overlap between a lot quadrangle and a box.
///
/// Full containment in either direction returns the contained shape's own
/// area exactly, so ratios against it hit 1.0 without rounding noise.
pub fn intersection_area(quad: &ConvexQuad, bbox: &AxisAlignedBox) -> f64 {
    if !circumscribe(quad).overlaps(bbox) {
        return 0.0;
    }
    if quad.vertices().iter().all(|&p| bbox.contains(p)) {
        return quad.area();
    }
    if bbox.corners().iter().all(|&p| quad.contains(p)) {
        return bbox.area();
    }
    let clipped = clip_to_box(quad.vertices(), bbox);
    if clipped.len() < 3 {
        return 0.0;
    }
    signed_area(&clipped).abs()
}

/// Row-major 3×3 projective transform with the bottom-right coefficient
/// fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography3x3 {
    m: [f64; 9],
}

impl Homography3x3 {
    pub const IDENTITY: Self = Self {
        m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };

    /// Normalizes so that `m[8] == 1` and checks invertibility.
    pub fn from_matrix(m: [f64; 9]) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if m[8].abs() < f64::EPSILON {
            return Err(GeometryError::NotInvertible);
        }
        let scale = m[8];
        let normalized = m.map(|v| v / scale);
        let h = Self { m: normalized };
        if h.determinant().abs() <= SINGULAR_DET {
            return Err(GeometryError::NotInvertible);
        }
        Ok(h)
    }

    pub fn coefficients(&self) -> &[f64; 9] {
        &self.m
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    pub fn apply(&self, p: Point2D) -> Point2D {
        let m = &self.m;
        let w = m[6] * p.x + m[7] * p.y + m[8];
        Point2D::new(
            (m[0] * p.x + m[1] * p.y + m[2]) / w,
            (m[3] * p.x + m[4] * p.y + m[5]) / w,
        )
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = &self.m;
        let det = self.determinant();
        if det.abs() <= SINGULAR_DET {
            return Err(GeometryError::NotInvertible);
        }
        let adj = [
            m[4] * m[8] - m[5] * m[7],
            m[2] * m[7] - m[1] * m[8],
            m[1] * m[5] - m[2] * m[4],
            m[5] * m[6] - m[3] * m[8],
            m[0] * m[8] - m[2] * m[6],
            m[2] * m[3] - m[0] * m[5],
            m[3] * m[7] - m[4] * m[6],
            m[1] * m[6] - m[0] * m[7],
            m[0] * m[4] - m[1] * m[3],
        ];
        Self::from_matrix(adj.map(|v| v / det))
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        let a = &self.m;
        let b = &other.m;
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = (0..3).map(|k| a[r * 3 + k] * b[k * 3 + c]).sum();
            }
        }
        Self::from_matrix(out)
    }
}

/// Similarity transform moving the centroid to the origin with mean
/// distance √2 from it. Returns `(scale, tx, ty)` with `p' = scale·p + t`.
fn conditioning(points: &[Point2D; 4]) -> (f64, f64, f64) {
    let cx = points.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / 4.0;
    let scale = std::f64::consts::SQRT_2 / mean_dist;
    (scale, -scale * cx, -scale * cy)
}

fn has_collinear_triple(points: &[Point2D; 4]) -> bool {
    let extent = points
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0_f64, f64::max);
    let tol = 1e-12 * extent * extent;
    (0..4).any(|skip| {
        let t: Vec<Point2D> = (0..4).filter(|&i| i != skip).map(|i| points[i]).collect();
        cross(t[0], t[1], t[2]).abs() <= tol
    })
}

/// Solves the 8×8 linear system by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot vanishes.
fn solve_linear_8(mut a: [[f64; 9]; 8]) -> Option<[f64; 8]> {
    for col in 0..8 {
        let pivot_row = (col..8).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for r in lower.iter_mut() {
            let factor = r[col] / pivot[col];
            if factor != 0.0 {
                for (x, p) in r[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= factor * p;
                }
            }
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let tail: f64 = (row + 1..8).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][8] - tail) / a[row][row];
    }
    Some(x)
}

/// Finds the homography mapping each `src[i]` onto `dst[i]`.
///
/// Both point sets are conditioned (centered, scaled to mean radius √2)
/// before the direct linear solve, then the result is de-conditioned.
pub fn solve_homography(src: &[Point2D; 4], dst: &[Point2D; 4]) -> Result<Homography3x3> {
    if !src.iter().chain(dst.iter()).all(Point2D::is_finite) {
        return Err(GeometryError::NonFinite);
    }
    if has_collinear_triple(src) {
        return Err(GeometryError::SingularSystem("three collinear source points"));
    }
    if has_collinear_triple(dst) {
        return Err(GeometryError::SingularSystem("three collinear destination points"));
    }
    let (ss, stx, sty) = conditioning(src);
    let (ds, dtx, dty) = conditioning(dst);

    let mut system = [[0.0; 9]; 8];
    for i in 0..4 {
        let x = ss * src[i].x + stx;
        let y = ss * src[i].y + sty;
        let u = ds * dst[i].x + dtx;
        let v = ds * dst[i].y + dty;
        system[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        system[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    let h = solve_linear_8(system).ok_or(GeometryError::SingularSystem("singular linear system"))?;
    let conditioned = Homography3x3 {
        m: [h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0],
    };
    let src_t = Homography3x3 {
        m: [ss, 0.0, stx, 0.0, ss, sty, 0.0, 0.0, 1.0],
    };
    let dst_t_inv = Homography3x3 {
        m: [1.0 / ds, 0.0, -dtx / ds, 0.0, 1.0 / ds, -dty / ds, 0.0, 0.0, 1.0],
    };
    dst_t_inv.compose(&conditioned).and_then(|h| h.compose(&src_t))
}
