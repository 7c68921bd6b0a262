//! Planar geometry for site planning.
//!
//! Convex polygons are converted to sets of linear constraints over the
//! augmented vector `[x y z r b 1]`, so a single dot product decides
//! feasibility for both 2D placement checks and 5D inversion candidates.
//! Each constraint row is normalised so its `(x, y)` part has unit length;
//! a row value is therefore the signed distance from the edge line.

mod site;

pub use site::{BoundsSpec, RegionSpec, SensorSpec, SiteFile, SiteSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default height bounds for a region, meters.
pub const DEFAULT_Z_BOUNDS: (f64, f64) = (0.0, 6.0);
/// Default leak-rate bounds for a region, kg/h.
pub const DEFAULT_RATE_BOUNDS: (f64, f64) = (0.1, 100.0);

/// A point in the local site frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

/// Which side of a convex polygon is feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeasibleSide {
    #[default]
    Interior,
    Exterior,
}

/// One row `a·[x y z r b 1] <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: [f64; 6],
}

impl LinearConstraint {
    /// A constraint that only involves `x` and `y`: `a x + b y + c <= 0`.
    pub fn planar(a: f64, b: f64, c: f64) -> Self {
        Self { coeffs: [a, b, 0.0, 0.0, 0.0, c] }
    }

    pub fn eval(&self, candidate: &[f64; 5]) -> f64 {
        let c = &self.coeffs;
        c[0] * candidate[0]
            + c[1] * candidate[1]
            + c[2] * candidate[2]
            + c[3] * candidate[3]
            + c[4] * candidate[4]
            + c[5]
    }

    pub fn eval_xy(&self, p: Point2) -> f64 {
        self.coeffs[0] * p.x + self.coeffs[1] * p.y + self.coeffs[5]
    }

    pub fn negated(&self) -> Self {
        let mut coeffs = self.coeffs;
        coeffs.iter_mut().for_each(|c| *c = -*c);
        Self { coeffs }
    }
}

/// An ordered list of linear constraints, evaluated as `A·X̄ <= 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet {
    pub rows: Vec<LinearConstraint>,
}

impl ConstraintSet {
    pub fn new(rows: Vec<LinearConstraint>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: &ConstraintSet) {
        self.rows.extend_from_slice(&other.rows);
    }

    pub fn evaluate(&self, candidate: &[f64; 5]) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval(candidate)).collect()
    }

    pub fn evaluate_xy(&self, p: Point2) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval_xy(p)).collect()
    }

    /// `Σ max(0, g_i)²` at a 5D candidate.
    pub fn squared_violation(&self, candidate: &[f64; 5]) -> f64 {
        self.rows.iter().map(|r| r.eval(candidate).max(0.0).powi(2)).sum()
    }

    pub fn squared_violation_xy(&self, p: Point2) -> f64 {
        self.rows.iter().map(|r| r.eval_xy(p).max(0.0).powi(2)).sum()
    }

    pub fn max_xy(&self, p: Point2) -> f64 {
        self.rows.iter().map(|r| r.eval_xy(p)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-constraint values `g_i = coeffs_i · [x y z r b 1]`.
pub fn evaluate_constraints(set: &ConstraintSet, candidate: &[f64; 5]) -> Vec<f64> {
    set.evaluate(candidate)
}

/// Output of [`polygon_to_constraints`].
#[derive(Debug, Clone)]
pub struct HullConstraints {
    /// Counter-clockwise convex hull of the input points.
    pub hull: Vec<Point2>,
    pub constraints: ConstraintSet,
    /// Mean of the hull vertices.
    pub com: Point2,
    pub min: Point2,
    pub max: Point2,
    /// Number of input points that were not hull vertices.
    pub dropped: usize,
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (Andrew's monotone chain) without collinear
/// vertices.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs())).max(1.0);
    let eps = 1e-12 * scale * scale;

    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Builds one constraint per convex-hull edge of `polygon`.
///
/// In interior mode the hull's center of mass satisfies every row; in
/// exterior mode every row is negated so the center of mass violates all of
/// them. Non-convex input is replaced by its hull and the number of dropped
/// vertices is reported.
pub fn polygon_to_constraints(polygon: &[Point2], side: FeasibleSide) -> Result<HullConstraints> {
    if polygon.len() < 3 {
        return Err(Error::DegeneratePolygon(format!("need at least 3 points, got {}", polygon.len())));
    }
    if polygon.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::DegeneratePolygon("non-finite coordinate".into()));
    }
    let hull = convex_hull(polygon);
    if hull.len() < 3 {
        return Err(Error::DegeneratePolygon("points are collinear or coincident".into()));
    }
    let n = hull.len() as f64;
    let com = Point2::new(hull.iter().map(|p| p.x).sum::<f64>() / n, hull.iter().map(|p| p.y).sum::<f64>() / n);

    let mut rows = Vec::with_capacity(hull.len());
    for (i, &p) in hull.iter().enumerate() {
        let q = hull[(i + 1) % hull.len()];
        // Left of a CCW edge is inside: g = -(cross(q - p, X - p)).
        let a = q.y - p.y;
        let b = -(q.x - p.x);
        let norm = a.hypot(b);
        let (a, b) = (a / norm, b / norm);
        let c = -(a * p.x + b * p.y);
        let row = LinearConstraint::planar(a, b, c);
        rows.push(match side {
            FeasibleSide::Interior => row,
            FeasibleSide::Exterior => row.negated(),
        });
    }

    let min = Point2::new(
        hull.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        hull.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
    );
    let max = Point2::new(
        hull.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        hull.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    );
    let unique = {
        let mut v = polygon.to_vec();
        v.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        v.dedup();
        v.len()
    };

    Ok(HullConstraints { dropped: unique - hull.len(), hull, constraints: ConstraintSet::new(rows), com, min, max })
}

/// `φ·exp(−d/τ)` where `d` is the distance from `point` to `com`.
pub fn proximity_penalty(point: Point2, com: Point2, phi: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0);
    phi * (-point.distance(&com) / tau).exp()
}

/// A subspace, restricted zone, or the master site box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxRegion {
    /// Convex polygon (hull of the input points), counter-clockwise.
    pub polygon: Vec<Point2>,
    /// Lower bounds over `[x y z r b]`.
    pub lb: [f64; 5],
    /// Upper bounds over `[x y z r b]`.
    pub ub: [f64; 5],
    /// 2D rows `[a b c]` for `a x + b y + c <= 0`.
    pub g2: Vec<[f64; 3]>,
    /// The same rows over `[x y z r b 1]`.
    pub g5: ConstraintSet,
    pub epts: Vec<Point2>,
    pub com: Point2,
    pub feasible_side: FeasibleSide,
    /// Construction notes (dropped hull vertices and the like).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoxRegion {
    /// Builds a region from raw polygon points. `bounds` overrides the
    /// derived `[lb, ub]`; `epts` defaults to the center of mass.
    pub fn new(
        polygon: &[Point2],
        side: FeasibleSide,
        bounds: Option<([f64; 5], [f64; 5])>,
        epts: Option<Vec<Point2>>,
    ) -> Result<Self> {
        let hc = polygon_to_constraints(polygon, side)?;
        let mut notes = Vec::new();
        if hc.dropped > 0 {
            notes.push(format!("{} non-hull vertices dropped (polygon replaced by its convex hull)", hc.dropped));
        }
        let (lb, ub) = bounds.unwrap_or((
            [hc.min.x, hc.min.y, DEFAULT_Z_BOUNDS.0, DEFAULT_RATE_BOUNDS.0, 1.0],
            [hc.max.x, hc.max.y, DEFAULT_Z_BOUNDS.1, DEFAULT_RATE_BOUNDS.1, 1.0],
        ));
        if lb.iter().zip(&ub).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput(format!("region bounds are not ordered: lb={lb:?} ub={ub:?}")));
        }
        let g2 = hc.constraints.rows.iter().map(|r| [r.coeffs[0], r.coeffs[1], r.coeffs[5]]).collect();
        Ok(Self {
            polygon: hc.hull,
            lb,
            ub,
            g2,
            g5: hc.constraints,
            epts: epts.unwrap_or_else(|| vec![hc.com]),
            com: hc.com,
            feasible_side: side,
            notes,
        })
    }

    /// Axis-aligned rectangle helper.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, side: FeasibleSide) -> Result<Self> {
        let poly = [Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)];
        Self::new(&poly, side, None, None)
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_region(self, p)
    }

    /// Largest constraint value at `p` with the polygon's inside oriented as
    /// feasible, regardless of `feasible_side`. Positive means outside.
    pub fn outside_distance(&self, p: Point2) -> f64 {
        let m = self.g5.max_xy(p);
        match self.feasible_side {
            FeasibleSide::Interior => m,
            FeasibleSide::Exterior => -self.g5.rows.iter().map(|r| r.eval_xy(p)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Whether `p` lies inside the polygon (boundary included).
    pub fn polygon_contains(&self, p: Point2) -> bool {
        self.outside_distance(p) <= 0.0
    }
}

/// True iff `point` satisfies the region's constraints under its feasible
/// side convention: every row `<= 0` for interior regions, some row `< 0`
/// (strictly outside the polygon) for exterior regions.
pub fn point_in_region(region: &BoxRegion, point: Point2) -> bool {
    match region.feasible_side {
        FeasibleSide::Interior => region.g5.rows.iter().all(|r| r.eval_xy(point) <= 0.0),
        FeasibleSide::Exterior => region.g5.rows.iter().any(|r| r.eval_xy(point) < 0.0),
    }
}
