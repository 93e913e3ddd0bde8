//! Planar geometry kernel.
//!
//! Everything here is a plain value type with pure operations: 2-vectors,
//! closed polylines standing in for rectifiable Jordan boundaries, circles,
//! and the handful of intersection and boundary-integral routines the
//! construction and the certificates are built from.

use std::f64::consts::TAU;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discriminant threshold (relative to radius squared) below which a
/// segment/circle contact counts as tangency.
pub const TANGENCY_TOL: f64 = 1e-12;

/// Default width of the boundary band, relative to the polyline diameter.
pub const BOUNDARY_BAND_REL: f64 = 1e-9;

const PARAM_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("closed polyline needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} repeats its predecessor")]
    RepeatedVertex(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("path is open: endpoints are {gap} apart")]
    NotClosed { gap: f64 },
    #[error("polyline is degenerate (signed area {area})")]
    Degenerate { area: f64 },
    #[error("circle radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("arc requires th1 < th2 <= th1 + 2pi, got [{th1}, {th2}]")]
    InvalidArc { th1: f64, th2: f64 },
    #[error("segment has zero length")]
    ZeroLengthSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Vec2, s: f64) -> Vec2 {
        self + (o - self) * s
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::iter::Sum for Vec2 {
    fn sum<I: Iterator<Item = Vec2>>(iter: I) -> Vec2 {
        iter.fold(Vec2::ZERO, |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
}

impl Orientation {
    pub fn reversed(self) -> Self {
        match self {
            Orientation::CounterClockwise => Orientation::Clockwise,
            Orientation::Clockwise => Orientation::CounterClockwise,
        }
    }

    /// +1 for counterclockwise, -1 for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::CounterClockwise => 1.0,
            Orientation::Clockwise => -1.0,
        }
    }
}

/// Rotates `v` by a quarter turn: +pi/2 for counterclockwise, -pi/2 for clockwise.
pub fn rotate_quarter(v: Vec2, o: Orientation) -> Vec2 {
    match o {
        Orientation::CounterClockwise => Vec2::new(-v.y, v.x),
        Orientation::Clockwise => Vec2::new(v.y, -v.x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64) -> Result<Self, GeomError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeomError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn point_at(&self, theta: f64) -> Vec2 {
        self.center + Vec2::from_polar(self.radius, theta)
    }

    /// Angle of `p` about the center, in `[0, 2pi)`.
    pub fn angle_of(&self, p: Vec2) -> f64 {
        let a = (p - self.center).angle();
        if a < 0.0 {
            a + TAU
        } else {
            a
        }
    }

    /// Signed distance of `p` from the circle: negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        p.dist(self.center) - self.radius
    }
}

/// Outward-normal line integral over the arc `[th1, th2]` of `c`, in closed form.
pub fn arc_normal_integral(c: &Circle, th1: f64, th2: f64) -> Result<Vec2, GeomError> {
    if !(th1 < th2 && th2 <= th1 + TAU + 4.0 * f64::EPSILON * th1.abs().max(1.0)) {
        return Err(GeomError::InvalidArc { th1, th2 });
    }
    // A full turn integrates to exactly zero; the closed form would leave
    // rounding residue from sin/cos of 2pi. Spans within a few ulps of a
    // full turn are indistinguishable from one.
    if th2 - th1 >= TAU - 8.0 * f64::EPSILON * th1.abs().max(th2.abs()).max(TAU) {
        return Ok(Vec2::ZERO);
    }
    Ok(Vec2::new(
        c.radius * (th2.sin() - th1.sin()),
        c.radius * (th1.cos() - th2.cos()),
    ))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircleHits {
    /// Sorted segment parameters in `[0, 1]`.
    pub params: Vec<f64>,
    /// Set when the supporting line grazes the circle; `params` then holds
    /// the single contact parameter if it lies on the segment.
    pub tangent: bool,
}

pub fn segment_circle_hits(a: Vec2, b: Vec2, c: &Circle) -> Result<CircleHits, GeomError> {
    let d = b - a;
    let len_sq = d.norm_sq();
    if len_sq == 0.0 {
        return Err(GeomError::ZeroLengthSegment);
    }
    let m = a - c.center;
    let half_b = d.dot(m);
    let r_sq = c.radius * c.radius;
    // Squared half-chord length of the supporting line.
    let foot = -half_b / len_sq;
    let closest = m + d * foot;
    let h_sq = r_sq - closest.norm_sq();
    let on_seg = |s: f64| (-PARAM_EPS..=1.0 + PARAM_EPS).contains(&s);

    if h_sq.abs() <= TANGENCY_TOL * r_sq {
        let params = if on_seg(foot) {
            vec![foot.clamp(0.0, 1.0)]
        } else {
            Vec::new()
        };
        return Ok(CircleHits {
            params,
            tangent: true,
        });
    }
    if h_sq < 0.0 {
        return Ok(CircleHits::default());
    }
    let half = (h_sq / len_sq).sqrt();
    let params = [foot - half, foot + half]
        .into_iter()
        .filter(|&s| on_seg(s))
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    Ok(CircleHits {
        params,
        tangent: false,
    })
}

/// Intersection of a query segment with a polyline path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Meet {
    /// Parameter along the query segment, 0 at its start.
    pub seg_param: f64,
    /// Path parameter: integer part is the path segment index.
    pub path_param: f64,
    pub point: Vec2,
    /// The meeting point coincides with a path vertex.
    pub vertex_hit: bool,
}

/// First point, measured from `a`, where segment `a -> b` meets `path`.
///
/// Ties in the segment parameter go to the smallest path parameter.
pub fn first_meet(a: Vec2, b: Vec2, path: &[Vec2]) -> Result<Option<Meet>, GeomError> {
    let r = b - a;
    let r_sq = r.norm_sq();
    if r_sq == 0.0 {
        return Err(GeomError::ZeroLengthSegment);
    }
    let mut best: Option<Meet> = None;
    let mut consider = |m: Meet| {
        best = match best {
            None => Some(m),
            Some(cur) => {
                if m.seg_param < cur.seg_param - PARAM_EPS
                    || ((m.seg_param - cur.seg_param).abs() <= PARAM_EPS
                        && m.path_param < cur.path_param)
                {
                    Some(m)
                } else {
                    Some(cur)
                }
            }
        }
    };

    for (k, w) in path.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        let s = q - p;
        let s_sq = s.norm_sq();
        if s_sq == 0.0 {
            continue;
        }
        let ap = p - a;
        let denom = r.cross(s);
        let scale = (r_sq * s_sq).sqrt();
        if denom.abs() > 1e-14 * scale {
            let t = ap.cross(s) / denom;
            let u = ap.cross(r) / denom;
            if (-PARAM_EPS..=1.0 + PARAM_EPS).contains(&t)
                && (-PARAM_EPS..=1.0 + PARAM_EPS).contains(&u)
            {
                let t = t.clamp(0.0, 1.0);
                let u = u.clamp(0.0, 1.0);
                let vertex_hit = u <= PARAM_EPS || u >= 1.0 - PARAM_EPS;
                let u_snap = if u <= PARAM_EPS {
                    0.0
                } else if u >= 1.0 - PARAM_EPS {
                    1.0
                } else {
                    u
                };
                consider(Meet {
                    seg_param: t,
                    path_param: k as f64 + u_snap,
                    point: p + s * u_snap,
                    vertex_hit,
                });
            }
        } else if ap.cross(r).abs() <= 1e-14 * scale.max(ap.norm() * r_sq.sqrt()) {
            // Collinear: take the start of the overlap nearest to `a`.
            let t0 = ap.dot(r) / r_sq;
            let t1 = (q - a).dot(r) / r_sq;
            let lo = t0.min(t1).max(0.0);
            let hi = t0.max(t1).min(1.0);
            if lo <= hi + PARAM_EPS {
                let point = a + r * lo;
                let u = ((point - p).dot(s) / s_sq).clamp(0.0, 1.0);
                let vertex_hit = u <= PARAM_EPS || u >= 1.0 - PARAM_EPS;
                consider(Meet {
                    seg_param: lo,
                    path_param: k as f64 + u,
                    point,
                    vertex_hit,
                });
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Inside,
    Outside,
    Boundary,
}

/// Closed polygonal curve; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ClosedPolyline {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for ClosedPolyline {
    type Error = GeomError;
    fn try_from(v: Vec<Vec2>) -> Result<Self, GeomError> {
        Self::new(v)
    }
}

impl From<ClosedPolyline> for Vec<Vec2> {
    fn from(p: ClosedPolyline) -> Self {
        p.vertices
    }
}

impl ClosedPolyline {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, GeomError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeomError::TooFewVertices(n));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeomError::NonFinite(i));
            }
            if *v == vertices[(i + n - 1) % n] {
                return Err(GeomError::RepeatedVertex(i));
            }
        }
        Ok(Self { vertices })
    }

    /// Closes an explicit path whose last point repeats its first (within `tol`).
    pub fn from_path(path: &[Vec2], tol: f64) -> Result<Self, GeomError> {
        let (Some(first), Some(last)) = (path.first(), path.last()) else {
            return Err(GeomError::TooFewVertices(0));
        };
        let gap = first.dist(*last);
        if path.len() < 2 || gap > tol {
            return Err(GeomError::NotClosed { gap });
        }
        Self::new(path[..path.len() - 1].to_vec())
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = (self.vertices[0], self.vertices[0]);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        lo.dist(hi)
    }

    /// Shoelace area; positive iff counterclockwise.
    pub fn signed_area(&self) -> f64 {
        // Shift to the first vertex to limit cancellation far from the origin.
        let o = self.vertices[0];
        0.5 * self.edges().map(|(a, b)| (a - o).cross(b - o)).sum::<f64>()
    }

    pub fn orientation(&self) -> Result<Orientation, GeomError> {
        let area = self.signed_area();
        let d = self.diameter();
        if area.abs() <= 1e-14 * d * d {
            return Err(GeomError::Degenerate { area });
        }
        Ok(if area > 0.0 {
            Orientation::CounterClockwise
        } else {
            Orientation::Clockwise
        })
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { vertices: v }
    }

    /// Copy traversed in the requested orientation.
    pub fn oriented(&self, o: Orientation) -> Result<Self, GeomError> {
        if self.orientation()? == o {
            Ok(self.clone())
        } else {
            Ok(self.reversed())
        }
    }

    /// Outward-normal line integral, edge by edge (unit normal times length).
    pub fn normal_integral(&self) -> Result<Vec2, GeomError> {
        let outward = self.orientation()?.reversed();
        Ok(self
            .edges()
            .map(|(a, b)| rotate_quarter(b - a, outward))
            .sum())
    }

    pub fn default_band(&self) -> f64 {
        BOUNDARY_BAND_REL * self.diameter()
    }

    /// Classifies `q` with the default boundary band.
    pub fn locate(&self, q: Vec2) -> Location {
        self.locate_with_band(q, self.default_band())
    }

    /// Winding-number classification; points within `band` of an edge are
    /// reported as boundary.
    pub fn locate_with_band(&self, q: Vec2, band: f64) -> Location {
        let mut winding = 0i32;
        for (a, b) in self.edges() {
            if point_segment_distance(q, a, b) <= band {
                return Location::Boundary;
            }
            let side = (b - a).cross(q - a);
            if a.y <= q.y {
                if b.y > q.y && side > 0.0 {
                    winding += 1;
                }
            } else if b.y <= q.y && side < 0.0 {
                winding -= 1;
            }
        }
        if winding != 0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    /// Segment sweep over x-sorted edge boxes: true iff no two non-adjacent
    /// edges touch and no adjacent pair folds back onto itself.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        let edges: Vec<(Vec2, Vec2)> = self.edges().collect();
        for i in 0..n {
            let (a, b) = edges[i];
            let (_, c) = edges[(i + 1) % n];
            let u = a - b;
            let w = c - b;
            if u.cross(w).abs() <= 1e-14 * u.norm() * w.norm() && u.dot(w) > 0.0 {
                return false;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let xmin = |i: usize| edges[i].0.x.min(edges[i].1.x);
        let xmax = |i: usize| edges[i].0.x.max(edges[i].1.x);
        order.sort_by(|&i, &j| xmin(i).total_cmp(&xmin(j)));
        let mut active: Vec<usize> = Vec::new();
        for &i in &order {
            let lo = xmin(i);
            active.retain(|&j| xmax(j) >= lo);
            let (a, b) = edges[i];
            let (ylo, yhi) = (a.y.min(b.y), a.y.max(b.y));
            for &j in &active {
                let adjacent = (i + 1) % n == j || (j + 1) % n == i;
                if adjacent {
                    continue;
                }
                let (c, d) = edges[j];
                if c.y.max(d.y) < ylo || c.y.min(d.y) > yhi {
                    continue;
                }
                if segments_touch(a, b, c, d) {
                    return false;
                }
            }
            active.push(i);
        }
        true
    }
}

pub fn point_segment_distance(q: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len_sq = d.norm_sq();
    if len_sq == 0.0 {
        return q.dist(a);
    }
    let s = ((q - a).dot(d) / len_sq).clamp(0.0, 1.0);
    q.dist(a + d * s)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment_box(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub fn segments_touch(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_box(c, d, a))
        || (d2 == 0.0 && on_segment_box(c, d, b))
        || (d3 == 0.0 && on_segment_box(a, b, c))
        || (d4 == 0.0 && on_segment_box(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn unit_square() -> ClosedPolyline {
        ClosedPolyline::new(vec![v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.)]).unwrap()
    }

    #[test]
    fn quarter_rotations() {
        let ccw = Orientation::CounterClockwise;
        assert_eq!(rotate_quarter(v(1., 0.), ccw), v(0., 1.));
        assert_eq!(rotate_quarter(v(0., 1.), Orientation::Clockwise), v(1., 0.));
        let r = rotate_quarter(v(3., 4.), ccw);
        assert_eq!(r, v(-4., 3.));
        assert_eq!(r.norm(), 5.0);
    }

    #[test]
    fn shoelace_area() {
        let sq = unit_square();
        assert_eq!(sq.signed_area(), 1.0);
        assert_eq!(sq.reversed().signed_area(), -1.0);
        assert_eq!(sq.orientation().unwrap(), Orientation::CounterClockwise);
        let hex: Vec<Vec2> = (0..6).map(|k| Vec2::from_polar(1.0, k as f64 * PI / 3.0)).collect();
        let hex = ClosedPolyline::new(hex).unwrap();
        assert!((hex.signed_area() - 3.0 * 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_polyline_is_flagged() {
        let flat = ClosedPolyline::new(vec![v(0., 0.), v(1., 0.), v(2., 0.)]).unwrap();
        assert!(matches!(flat.orientation(), Err(GeomError::Degenerate { .. })));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            ClosedPolyline::new(vec![v(0., 0.), v(1., 0.)]),
            Err(GeomError::TooFewVertices(2))
        );
        assert_eq!(
            ClosedPolyline::new(vec![v(0., 0.), v(1., 0.), v(1., 0.)]),
            Err(GeomError::RepeatedVertex(2))
        );
        assert!(matches!(
            ClosedPolyline::new(vec![v(0., 0.), v(f64::NAN, 0.), v(1., 1.)]),
            Err(GeomError::NonFinite(1))
        ));
    }

    #[test]
    fn square_normal_integral_vanishes() {
        let n = unit_square().normal_integral().unwrap();
        assert!(n.norm() <= 1e-15);
    }

    #[test]
    fn open_polyline_rejected() {
        let path = [v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.)];
        assert!(matches!(
            ClosedPolyline::from_path(&path, 1e-12),
            Err(GeomError::NotClosed { .. })
        ));
        let closed = [v(0., 0.), v(1., 0.), v(1., 1.), v(0., 1.), v(0., 0.)];
        assert_eq!(ClosedPolyline::from_path(&closed, 1e-12).unwrap(), unit_square());
    }

    #[test]
    fn arc_integrals_closed_form() {
        let unit = Circle::new(Vec2::ZERO, 1.0).unwrap();
        assert!(arc_normal_integral(&unit, 0.0, TAU).unwrap().norm() < 1e-15);
        let half = arc_normal_integral(&unit, 0.0, PI).unwrap();
        assert!((half - v(0., 2.)).norm() < 1e-15);
        let c = Circle::new(v(3., -1.), 0.5).unwrap();
        let q = arc_normal_integral(&c, 0.0, FRAC_PI_2).unwrap();
        assert!((q - v(0.5, 0.5)).norm() < 1e-15);
        assert!(arc_normal_integral(&unit, 1.0, 1.0).is_err());
        assert!(arc_normal_integral(&unit, 0.0, 7.0).is_err());
    }

    #[test]
    fn circle_hits() {
        let unit = Circle::new(Vec2::ZERO, 1.0).unwrap();
        let h = segment_circle_hits(v(-2., 0.), v(2., 0.), &unit).unwrap();
        assert!(!h.tangent);
        assert_eq!(h.params, vec![0.25, 0.75]);
        let h = segment_circle_hits(v(0., 2.), v(2., 2.), &unit).unwrap();
        assert!(h.params.is_empty() && !h.tangent);
        let h = segment_circle_hits(v(-1., 1.), v(1., 1.), &unit).unwrap();
        assert!(h.tangent);
        assert_eq!(h.params, vec![0.5]);
        assert!(segment_circle_hits(v(1., 1.), v(1., 1.), &unit).is_err());
    }

    #[test]
    fn first_meet_cases() {
        let path = [v(-1., 0.), v(1., 0.)];
        let m = first_meet(v(0., -1.), v(0., 1.), &path).unwrap().unwrap();
        assert!(m.point.norm() < 1e-15);
        assert_eq!(m.seg_param, 0.5);
        assert_eq!(m.path_param, 0.5);
        assert!(!m.vertex_hit);

        assert!(first_meet(v(0., 1.), v(0., 2.), &path).unwrap().is_none());

        let vee = [v(-1., -1.), v(0., 0.), v(1., -1.)];
        let m = first_meet(v(0., 1.), v(0., 0.), &vee).unwrap().unwrap();
        assert_eq!(m.point, v(0., 0.));
        assert_eq!(m.path_param, 1.0);
        assert!(m.vertex_hit);
    }

    #[test]
    fn first_meet_prefers_nearest_crossing() {
        // Zig-zag path crossed three times; the first crossing from `a` wins
        // even though it lies on the last path segment.
        let path = [v(0., 3.), v(1., 3.), v(1., 2.), v(-1., 2.), v(-1., 1.), v(1., 1.)];
        let m = first_meet(v(0., 0.), v(0., 4.), &path).unwrap().unwrap();
        assert!((m.point - v(0., 1.)).norm() < 1e-15);
        assert_eq!(m.path_param, 4.5);
    }

    #[test]
    fn first_meet_collinear_overlap() {
        let path = [v(2., 0.), v(5., 0.)];
        let m = first_meet(v(0., 0.), v(4., 0.), &path).unwrap().unwrap();
        assert_eq!(m.point, v(2., 0.));
        assert_eq!(m.seg_param, 0.5);
        assert!(m.vertex_hit);
    }

    #[test]
    fn locate_points() {
        let sq = unit_square();
        assert_eq!(sq.locate(v(0.5, 0.5)), Location::Inside);
        assert_eq!(sq.locate(v(2., 2.)), Location::Outside);
        assert_eq!(sq.locate(v(1., 0.5)), Location::Boundary);
        assert_eq!(sq.reversed().locate(v(0.5, 0.5)), Location::Inside);
    }

    #[test]
    fn simplicity_sweep() {
        assert!(unit_square().is_simple());
        let bowtie = ClosedPolyline::new(vec![v(0., 0.), v(1., 1.), v(1., 0.), v(0., 1.)]).unwrap();
        assert!(!bowtie.is_simple());
        // Touching at a vertex of a non-adjacent edge.
        let pinched =
            ClosedPolyline::new(vec![v(0., 0.), v(2., 0.), v(1., 1.), v(2., 2.), v(0., 2.), v(1., 1.)])
                .unwrap();
        assert!(!pinched.is_simple());
        // Fold-back along an edge.
        let fold = ClosedPolyline::new(vec![v(0., 0.), v(2., 0.), v(1., 0.), v(1., 1.)]).unwrap();
        assert!(!fold.is_simple());
    }

    #[test]
    fn vec2_serializes_as_pair() {
        let s = serde_json::to_string(&v(1.5, -2.0)).unwrap();
        assert_eq!(s, "[1.5,-2.0]");
        let p: ClosedPolyline = serde_json::from_str("[[0,0],[1,0],[0,1]]").unwrap();
        assert_eq!(p.len(), 3);
        assert!(serde_json::from_str::<ClosedPolyline>("[[0,0],[1,0]]").is_err());
    }
}
