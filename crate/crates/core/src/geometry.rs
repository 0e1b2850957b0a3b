//! Planar primitives: points, lines in `(phi, rho)` coordinates, segments,
//! convex domains, the growing window family and the invariant line measure.
//!
//! A line with parameters `(phi, rho)` is the set of points `p` with
//! `p.x * sin(phi) + p.y * cos(phi) = rho`; its closest point to the origin is
//! `(rho sin phi, rho cos phi)`. The invariant measure on lines is Lebesgue
//! measure `dphi drho` on `[0, pi) x R`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global geometric tolerance (length units) for coincidence, parallelism
/// and concurrency tests.
pub const EPS_GEO: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Reduce an angle to `[0, pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let a = phi.rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Smallest angle between two undirected directions, in `[0, pi/2]`.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub phi: f64,
    pub rho: f64,
}

impl Line {
    /// Builds a line, reducing `phi` into `[0, pi)` and flipping the sign of
    /// `rho` when the angle is shifted by an odd multiple of pi.
    pub fn new(phi: f64, rho: f64) -> Line {
        let k = (phi / PI).floor();
        let mut phi_r = phi - k * PI;
        let mut rho_r = if (k as i64).rem_euclid(2) == 0 { rho } else { -rho };
        if phi_r >= PI {
            phi_r -= PI;
            rho_r = -rho_r;
        }
        Line { phi: phi_r, rho: rho_r }
    }

    /// The line through `p` with angle `phi`.
    pub fn through(p: Point, phi: f64) -> Line {
        let l = Line::new(phi, 0.0);
        Line {
            phi: l.phi,
            rho: p.dot(l.normal()),
        }
    }

    pub fn through_points(a: Point, b: Point) -> Result<Line> {
        let d = b - a;
        if d.norm() < EPS_GEO {
            return Err(Error::InvalidGeometry("coincident points".into()));
        }
        // direction (cos phi, -sin phi)
        let phi = (-d.y).atan2(d.x);
        Ok(Line::through(a, phi))
    }

    /// Unit normal `(sin phi, cos phi)`.
    pub fn normal(&self) -> Point {
        Point::new(self.phi.sin(), self.phi.cos())
    }

    /// Unit direction `(cos phi, -sin phi)`.
    pub fn direction(&self) -> Point {
        Point::new(self.phi.cos(), -self.phi.sin())
    }

    /// Closest point of the line to the origin.
    pub fn foot(&self) -> Point {
        self.normal() * self.rho
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        p.dot(self.normal()) - self.rho
    }

    pub fn project(&self, p: Point) -> Point {
        p - self.normal() * self.signed_distance(p)
    }

    /// Arc-length coordinate of the projection of `p` along [`Line::direction`].
    pub fn coord(&self, p: Point) -> f64 {
        p.dot(self.direction())
    }

    pub fn at(&self, s: f64) -> Point {
        self.foot() + self.direction() * s
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.signed_distance(p).abs() <= tol
    }

    /// Equality within [`EPS_GEO`], accounting for the `phi = 0 ~ pi` seam.
    pub fn approx_eq(&self, o: &Line) -> bool {
        let dphi = (self.phi - o.phi).abs();
        if dphi <= EPS_GEO {
            (self.rho - o.rho).abs() <= EPS_GEO
        } else if (PI - dphi) <= EPS_GEO {
            (self.rho + o.rho).abs() <= EPS_GEO
        } else {
            false
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Intersection {
    Point(Point),
    Parallel,
    Coincident,
}

/// Intersection of two lines; near-parallel pairs within tolerance are
/// reported as parallel (or coincident).
pub fn intersect(l1: &Line, l2: &Line) -> Intersection {
    let (n1, n2) = (l1.normal(), l2.normal());
    let det = n1.cross(n2);
    if det.abs() < EPS_GEO {
        return if l1.approx_eq(l2) {
            Intersection::Coincident
        } else {
            Intersection::Parallel
        };
    }
    // n1 . p = r1, n2 . p = r2
    let x = (l1.rho * n2.y - l2.rho * n1.y) / det;
    let y = (n1.x * l2.rho - n2.x * l1.rho) / det;
    Intersection::Point(Point::new(x, y))
}

pub fn intersection_point(l1: &Line, l2: &Line) -> Option<Point> {
    match intersect(l1, l2) {
        Intersection::Point(p) => Some(p),
        _ => None,
    }
}

/// True iff `l` does not meet the convex hull of `points`. The empty hull is
/// separated from every line. Points within [`EPS_GEO`] of the line count as
/// hits.
pub fn separates(l: &Line, points: &[Point]) -> bool {
    let mut pos = false;
    let mut neg = false;
    for p in points {
        let d = l.signed_distance(*p);
        if d.abs() <= EPS_GEO {
            return false;
        }
        if d > 0.0 {
            pos = true;
        } else {
            neg = true;
        }
        if pos && neg {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Result<Segment> {
        if a.dist(b) <= 0.0 {
            return Err(Error::InvalidGeometry("zero-length segment".into()));
        }
        Ok(Segment { a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn line(&self) -> Line {
        Line::through_points(self.a, self.b).expect("segment has positive length")
    }

    pub fn midpoint(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }

    /// Distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Point) -> f64 {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return p.dist(self.a);
        }
        let t = ((p - self.a).dot(d) / len2).clamp(0.0, 1.0);
        p.dist(self.a + d * t)
    }

    /// Proper or touching intersection point of two segments, if any.
    pub fn intersection(&self, o: &Segment) -> Option<Point> {
        let r = self.b - self.a;
        let s = o.b - o.a;
        let denom = r.cross(s);
        if denom.abs() < 1e-15 {
            return None;
        }
        let qp = o.a - self.a;
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        let tol_t = EPS_GEO / r.norm();
        let tol_u = EPS_GEO / s.norm();
        if t >= -tol_t && t <= 1.0 + tol_t && u >= -tol_u && u <= 1.0 + tol_u {
            Some(self.a + r * t)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn chord(&self, l: &Line) -> Option<(Point, Point)> {
        let d = l.signed_distance(self.center);
        let h2 = self.radius * self.radius - d * d;
        if h2 < 0.0 {
            return None;
        }
        let h = h2.sqrt();
        let m = l.project(self.center);
        let dir = l.direction();
        Some((m - dir * h, m + dir * h))
    }
}

/// A convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(mut vertices: Vec<Point>) -> Result<Polygon> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry("polygon needs >= 3 vertices".into()));
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| vertices[i].cross(vertices[(i + 1) % vertices.len()]))
            .sum();
        if area2.abs() < EPS_GEO {
            return Err(Error::InvalidGeometry("polygon has empty interior".into()));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if (b - a).cross(c - b) <= EPS_GEO {
                return Err(Error::InvalidGeometry(
                    "polygon vertices not in strictly convex position".into(),
                ));
            }
        }
        Ok(Polygon { vertices })
    }

    pub fn square(x0: f64, y0: f64, side: f64) -> Polygon {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x0 + side, y0),
            Point::new(x0 + side, y0 + side),
            Point::new(x0, y0 + side),
        ])
        .expect("square is convex")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Outward unit normal and offset `n . p <= h` of each edge.
    fn halfplanes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.edges().map(|(a, b)| {
            let d = b - a;
            let n = Point::new(d.y, -d.x) * (1.0 / d.norm());
            (n, n.dot(a))
        })
    }

    pub fn chord(&self, l: &Line) -> Option<(Point, Point)> {
        // clip the parametrised line s -> foot + s dir against every half-plane
        let (o, d) = (l.foot(), l.direction());
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (n, h) in self.halfplanes() {
            let nd = n.dot(d);
            let slack = h - n.dot(o);
            if nd.abs() < 1e-15 {
                if slack < 0.0 {
                    return None;
                }
                continue;
            }
            let s = slack / nd;
            if nd > 0.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
        }
        if lo > hi {
            return None;
        }
        Some((l.at(lo), l.at(hi)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConvexDomain {
    Disc(Disc),
    Polygon(Polygon),
    /// `base` intersected with a closed ball; produced by concentric-disc
    /// window families.
    Clipped {
        base: Box<ConvexDomain>,
        ball: Disc,
    },
}

impl ConvexDomain {
    pub fn disc(center: Point, radius: f64) -> Result<ConvexDomain> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGeometry("disc radius must be positive".into()));
        }
        Ok(ConvexDomain::Disc(Disc { center, radius }))
    }

    pub fn unit_disc() -> ConvexDomain {
        ConvexDomain::Disc(Disc {
            center: Point::new(0.0, 0.0),
            radius: 1.0,
        })
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<ConvexDomain> {
        Ok(ConvexDomain::Polygon(Polygon::new(vertices)?))
    }

    pub fn square(x0: f64, y0: f64, side: f64) -> ConvexDomain {
        ConvexDomain::Polygon(Polygon::square(x0, y0, side))
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self {
            ConvexDomain::Disc(d) => p.dist(d.center) <= d.radius + tol,
            ConvexDomain::Polygon(poly) => poly.halfplanes().all(|(n, h)| n.dot(p) <= h + tol),
            ConvexDomain::Clipped { base, ball } => base.contains(p, tol) && p.dist(ball.center) <= ball.radius + tol,
        }
    }

    /// Distance from `p` to the boundary (positive inside).
    pub fn depth(&self, p: Point) -> f64 {
        match self {
            ConvexDomain::Disc(d) => d.radius - p.dist(d.center),
            ConvexDomain::Polygon(poly) => poly
                .halfplanes()
                .map(|(n, h)| h - n.dot(p))
                .fold(f64::INFINITY, f64::min),
            ConvexDomain::Clipped { base, ball } => base.depth(p).min(ball.radius - p.dist(ball.center)),
        }
    }

    /// Chord `l ∩ closure`, endpoints ordered along `l.direction()`.
    pub fn chord(&self, l: &Line) -> Option<(Point, Point)> {
        match self {
            ConvexDomain::Disc(d) => d.chord(l),
            ConvexDomain::Polygon(p) => p.chord(l),
            ConvexDomain::Clipped { base, ball } => {
                let (a, b) = base.chord(l)?;
                let (c, d) = ball.chord(l)?;
                let lo = l.coord(a).max(l.coord(c));
                let hi = l.coord(b).min(l.coord(d));
                if lo > hi {
                    None
                } else {
                    Some((l.at(lo), l.at(hi)))
                }
            }
        }
    }

    /// Chord of positive length (longer than [`EPS_GEO`]); tangent lines are
    /// reported as misses.
    pub fn proper_chord(&self, l: &Line) -> Option<Segment> {
        let (a, b) = self.chord(l)?;
        if a.dist(b) < EPS_GEO {
            None
        } else {
            Some(Segment { a, b })
        }
    }

    /// Support interval `[min n.p, max n.p]` over the domain for the normal of
    /// angle `phi`; the lines `(phi, rho)` hitting the domain are exactly
    /// those with `rho` inside it.
    pub fn support(&self, phi: f64) -> (f64, f64) {
        let n = Point::new(phi.sin(), phi.cos());
        match self {
            ConvexDomain::Disc(d) => {
                let c = n.dot(d.center);
                (c - d.radius, c + d.radius)
            }
            ConvexDomain::Polygon(p) => p
                .vertices
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let s = n.dot(*v);
                    (lo.min(s), hi.max(s))
                }),
            ConvexDomain::Clipped { .. } => {
                // numeric: boundary sampled finely enough for diagnostics only
                let pts = self.boundary_points(4096);
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let s = n.dot(*v);
                    (lo.min(s), hi.max(s))
                })
            }
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            ConvexDomain::Disc(d) => 2.0 * PI * d.radius,
            ConvexDomain::Polygon(p) => p.edges().map(|(a, b)| a.dist(b)).sum(),
            ConvexDomain::Clipped { .. } => {
                let pts = self.boundary_points(8192);
                (0..pts.len()).map(|i| pts[i].dist(pts[(i + 1) % pts.len()])).sum()
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            ConvexDomain::Disc(d) => PI * d.radius * d.radius,
            ConvexDomain::Polygon(p) => 0.5 * p.edges().map(|(a, b)| a.cross(b)).sum::<f64>(),
            ConvexDomain::Clipped { .. } => {
                let pts = self.boundary_points(8192);
                0.5 * (0..pts.len())
                    .map(|i| pts[i].cross(pts[(i + 1) % pts.len()]))
                    .sum::<f64>()
            }
        }
    }

    /// An interior reference point.
    pub fn center(&self) -> Point {
        match self {
            ConvexDomain::Disc(d) => d.center,
            ConvexDomain::Polygon(p) => {
                let n = p.vertices.len() as f64;
                p.vertices.iter().fold(Point::default(), |acc, v| acc + *v) * (1.0 / n)
            }
            ConvexDomain::Clipped { base, ball } => {
                let c = base.center();
                if self.contains(c, 0.0) {
                    c
                } else {
                    c.lerp(ball.center, 0.5)
                }
            }
        }
    }

    /// Smallest disc around [`ConvexDomain::center`] covering the domain.
    pub fn bounding_disc(&self) -> Disc {
        let c = self.center();
        let r = match self {
            ConvexDomain::Disc(d) => d.radius + c.dist(d.center),
            ConvexDomain::Polygon(p) => p.vertices.iter().map(|v| v.dist(c)).fold(0.0, f64::max),
            ConvexDomain::Clipped { base, .. } => base.bounding_disc().radius + c.dist(base.center()),
        };
        Disc { center: c, radius: r }
    }

    /// Points along the boundary, counter-clockwise, by ray casting from the
    /// center.
    pub fn boundary_points(&self, n: usize) -> Vec<Point> {
        let c = self.center();
        (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                let dir = Point::new(th.cos(), th.sin());
                let l = Line::through(c, (-dir.y).atan2(dir.x));
                let (a, b) = self.chord(&l).expect("center is interior");
                if (b - c).dot(dir) > 0.0 {
                    b
                } else {
                    a
                }
            })
            .collect()
    }

    /// Largest distance from `p` to a point of the closed domain.
    pub fn max_distance_from(&self, p: Point) -> f64 {
        match self {
            ConvexDomain::Disc(d) => p.dist(d.center) + d.radius,
            ConvexDomain::Polygon(poly) => poly.vertices.iter().map(|v| v.dist(p)).fold(0.0, f64::max),
            ConvexDomain::Clipped { .. } => self.boundary_points(4096).iter().map(|v| v.dist(p)).fold(0.0, f64::max),
        }
    }

    /// Image under the homothety `x0 + t (x - x0)`.
    pub fn scaled(&self, x0: Point, t: f64) -> ConvexDomain {
        let map = |p: Point| x0 + (p - x0) * t;
        match self {
            ConvexDomain::Disc(d) => ConvexDomain::Disc(Disc {
                center: map(d.center),
                radius: d.radius * t,
            }),
            ConvexDomain::Polygon(p) => ConvexDomain::Polygon(Polygon {
                vertices: p.vertices.iter().map(|v| map(*v)).collect(),
            }),
            ConvexDomain::Clipped { base, ball } => ConvexDomain::Clipped {
                base: Box::new(base.scaled(x0, t)),
                ball: Disc {
                    center: map(ball.center),
                    radius: ball.radius * t,
                },
            },
        }
    }
}

/// Target of [`mu_hit_measure`].
#[derive(Clone, Debug)]
pub enum HitTarget {
    Segment(Point, Point),
    Domain(ConvexDomain),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitMeasure {
    pub value: f64,
    pub degenerate: bool,
}

/// Invariant measure of the set of lines hitting the target: twice the length
/// for a segment, the perimeter for a convex body.
pub fn mu_hit_measure(target: &HitTarget) -> HitMeasure {
    match target {
        HitTarget::Segment(a, b) => {
            let len = a.dist(*b);
            HitMeasure {
                value: 2.0 * len,
                degenerate: len < EPS_GEO,
            }
        }
        HitTarget::Domain(d) => HitMeasure {
            value: d.perimeter(),
            degenerate: false,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// `D_t = x0 + t (closure(D) - x0)`.
    Homothety,
    /// `D_t = closure(D) ∩ B(x0, t R)` with `R` the largest distance from
    /// `x0` to the domain.
    ConcentricDisc,
}

/// Anchor point of a line and its reveal time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub point: Point,
    pub time: f64,
}

/// Growing window family on a convex base domain.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowFamily {
    base: ConvexDomain,
    origin: Point,
    kind: WindowKind,
    reach: f64,
}

impl WindowFamily {
    pub fn new(base: ConvexDomain, origin: Point, kind: WindowKind) -> Result<WindowFamily> {
        if matches!(base, ConvexDomain::Clipped { .. }) {
            return Err(Error::InvalidGeometry(
                "window families need a disc or polygon base".into(),
            ));
        }
        if base.depth(origin) <= EPS_GEO {
            return Err(Error::InvalidGeometry("window origin must be an interior point".into()));
        }
        let reach = base.max_distance_from(origin);
        Ok(WindowFamily {
            base,
            origin,
            kind,
            reach,
        })
    }

    pub fn homothety(base: ConvexDomain) -> WindowFamily {
        let c = base.center();
        WindowFamily::new(base, c, WindowKind::Homothety).expect("center is interior")
    }

    pub fn base(&self) -> &ConvexDomain {
        &self.base
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn kind(&self) -> WindowKind {
        self.kind
    }

    pub fn window_at(&self, t: f64) -> Result<ConvexDomain> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(match self.kind {
            WindowKind::Homothety => self.base.scaled(self.origin, t),
            WindowKind::ConcentricDisc => {
                if t == 1.0 {
                    self.base.clone()
                } else {
                    ConvexDomain::Clipped {
                        base: Box::new(self.base.clone()),
                        ball: Disc {
                            center: self.origin,
                            radius: t * self.reach,
                        },
                    }
                }
            }
        })
    }

    /// Gauge of the family: the reveal time extended to the whole plane
    /// (values above one lie outside the base domain).
    pub fn gauge(&self, p: Point) -> f64 {
        let v = p - self.origin;
        match self.kind {
            WindowKind::ConcentricDisc => {
                let r = v.norm() / self.reach;
                if self.base.contains(p, EPS_GEO) {
                    r
                } else {
                    r.max(1.0 + self.base.depth(p).abs())
                }
            }
            WindowKind::Homothety => match &self.base {
                ConvexDomain::Disc(d) => {
                    let w = d.center - self.origin;
                    let a = d.radius * d.radius - w.dot(w);
                    let vw = v.dot(w);
                    let vv = v.dot(v);
                    if vv == 0.0 {
                        0.0
                    } else {
                        ((vw * vw + a * vv).sqrt() - vw) / a
                    }
                }
                ConvexDomain::Polygon(poly) => poly
                    .halfplanes()
                    .map(|(n, h)| n.dot(v) / (h - n.dot(self.origin)))
                    .fold(0.0, f64::max),
                ConvexDomain::Clipped { .. } => unreachable!("rejected in constructor"),
            },
        }
    }

    /// `inf { t : p ∈ D_t }`.
    pub fn reveal_time(&self, p: Point) -> Result<f64> {
        if !self.base.contains(p, EPS_GEO) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.gauge(p).min(1.0))
    }

    /// First point of `l` revealed by the family and its reveal time.
    pub fn anchor(&self, l: &Line) -> Result<Anchor> {
        let chord = self.base.chord(l).ok_or(Error::LineMisses)?;
        if chord.0.dist(chord.1) < EPS_GEO {
            return Err(Error::Tangent);
        }
        let point = match self.kind {
            WindowKind::ConcentricDisc => {
                let f = l.project(self.origin);
                let (lo, hi) = (l.coord(chord.0), l.coord(chord.1));
                l.at(l.coord(f).clamp(lo, hi))
            }
            WindowKind::Homothety => {
                let s0 = l.signed_distance(self.origin);
                if s0.abs() <= EPS_GEO * 1e-3 {
                    l.project(self.origin)
                } else {
                    let u = l.normal() * (-s0.signum());
                    let delta = s0.abs();
                    let (h, touch) = self.support_point(u);
                    let tau = delta / h;
                    self.origin + touch * tau
                }
            }
        };
        let point = l.project(point);
        let time = self.gauge(point).min(1.0);
        Ok(Anchor { point, time })
    }

    /// Support value of `closure(D) - x0` in direction `u` and the touching
    /// point (midpoint of the touching face when it is an edge).
    fn support_point(&self, u: Point) -> (f64, Point) {
        match &self.base {
            ConvexDomain::Disc(d) => {
                let w = d.center - self.origin;
                (u.dot(w) + d.radius, w + u * d.radius)
            }
            ConvexDomain::Polygon(poly) => {
                let vs: Vec<Point> = poly.vertices.iter().map(|v| *v - self.origin).collect();
                let h = vs.iter().map(|v| u.dot(*v)).fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-12 * (1.0 + h.abs());
                let touching: Vec<Point> = vs.iter().copied().filter(|v| u.dot(*v) >= h - tol).collect();
                let sum = touching.iter().fold(Point::default(), |a, v| a + *v);
                (h, sum * (1.0 / touching.len() as f64))
            }
            ConvexDomain::Clipped { .. } => unreachable!("rejected in constructor"),
        }
    }

    /// Chord `l ∩ D_t`.
    pub fn chord_at(&self, l: &Line, t: f64) -> Option<(Point, Point)> {
        match self.kind {
            WindowKind::Homothety => self.base.scaled(self.origin, t).chord(l),
            WindowKind::ConcentricDisc => {
                let (a, b) = self.base.chord(l)?;
                let ball = Disc {
                    center: self.origin,
                    radius: t * self.reach,
                };
                let (c, d) = ball.chord(l)?;
                let lo = l.coord(a).max(l.coord(c));
                let hi = l.coord(b).min(l.coord(d));
                if lo > hi {
                    None
                } else {
                    Some((l.at(lo), l.at(hi)))
                }
            }
        }
    }

    /// The endpoint of the chord `l ∩ D_t` lying on side `side` (sign along
    /// `l.direction()`) of the anchor. Falls back to the anchor when the chord
    /// has collapsed.
    pub fn chord_end(&self, l: &Line, anchor: Point, side: f64, t: f64) -> Point {
        match self.chord_at(l, t) {
            Some((a, b)) => {
                if side >= 0.0 {
                    b
                } else {
                    a
                }
            }
            None => anchor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn line_foot_follows_chart() {
        let l = Line::new(0.3, 2.0);
        let f = l.foot();
        assert!(close(f.x, 2.0 * 0.3f64.sin(), 1e-15));
        assert!(close(f.y, 2.0 * 0.3f64.cos(), 1e-15));
        assert!(l.contains(f, 1e-12));
        assert!(l.direction().dot(l.normal()).abs() < 1e-15);
    }

    #[test]
    fn line_new_wraps_angle() {
        let l = Line::new(PI + 0.2, 1.0);
        assert!(close(l.phi, 0.2, 1e-12));
        assert!(close(l.rho, -1.0, 1e-12));
        let p = Point::new(0.4, -0.7);
        let a = Line::through(p, 2.0);
        let b = Line::through(p, 2.0 - PI);
        assert!(a.approx_eq(&b));
    }

    #[test]
    fn intersect_examples() {
        let a = Line::new(0.0, 0.0);
        let b = Line::new(PI / 2.0, 0.0);
        match intersect(&a, &b) {
            Intersection::Point(p) => assert!(p.norm() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(intersect(&a, &a), Intersection::Coincident);
        let c = Line::new(0.0, 1.0);
        let d = Line::new(PI / 2.0, 1.0);
        match intersect(&c, &d) {
            Intersection::Point(p) => assert!(p.dist(Point::new(1.0, 1.0)) < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(intersect(&a, &c), Intersection::Parallel);
    }

    #[test]
    fn separates_examples() {
        let x_axis = Line::through(Point::new(0.0, 0.0), 0.0);
        assert!(separates(&x_axis, &[Point::new(0.0, 1.0), Point::new(1.0, 2.0)]));
        assert!(!separates(&x_axis, &[Point::new(0.0, 1.0), Point::new(0.0, -1.0)]));
        assert!(separates(&x_axis, &[]));
    }

    #[test]
    fn window_at_examples() {
        let f = WindowFamily::homothety(ConvexDomain::unit_disc());
        match f.window_at(0.5).unwrap() {
            ConvexDomain::Disc(d) => assert!(close(d.radius, 0.5, 1e-15)),
            other => panic!("{other:?}"),
        }
        assert_eq!(f.window_at(1.0).unwrap(), ConvexDomain::unit_disc());
        match f.window_at(0.0).unwrap() {
            ConvexDomain::Disc(d) => assert_eq!(d.radius, 0.0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(f.window_at(1.5), Err(Error::TimeOutOfRange(_))));
        assert!(matches!(f.window_at(-0.1), Err(Error::TimeOutOfRange(_))));
    }

    #[test]
    fn reveal_time_examples() {
        let conc = WindowFamily::new(
            ConvexDomain::unit_disc(),
            Point::new(0.0, 0.0),
            WindowKind::ConcentricDisc,
        )
        .unwrap();
        assert!(close(conc.reveal_time(Point::new(0.3, 0.0)).unwrap(), 0.3, 1e-15));
        assert_eq!(conc.reveal_time(Point::new(0.0, 0.0)).unwrap(), 0.0);
        let hom = WindowFamily::new(
            ConvexDomain::square(0.0, 0.0, 1.0),
            Point::new(0.3, 0.6),
            WindowKind::Homothety,
        )
        .unwrap();
        assert!(close(hom.reveal_time(Point::new(1.0, 0.25)).unwrap(), 1.0, 1e-12));
        assert!(close(hom.reveal_time(Point::new(0.3, 0.6)).unwrap(), 0.0, 1e-15));
        assert!(matches!(
            hom.reveal_time(Point::new(1.5, 0.5)),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn anchor_examples() {
        let conc = WindowFamily::new(
            ConvexDomain::unit_disc(),
            Point::new(0.0, 0.0),
            WindowKind::ConcentricDisc,
        )
        .unwrap();
        let a = conc.anchor(&Line::new(0.0, 0.5)).unwrap();
        assert!(a.point.dist(Point::new(0.0, 0.5)) < 1e-12);
        assert!(close(a.time, 0.5, 1e-12));

        let through = Line::through(Point::new(0.0, 0.0), 1.1);
        let a = conc.anchor(&through).unwrap();
        assert!(a.point.norm() < 1e-12 && a.time < 1e-12);

        let hom = WindowFamily::homothety(ConvexDomain::square(0.0, 0.0, 1.0));
        let vertical = Line::through(Point::new(0.25, 0.0), PI / 2.0);
        let a = hom.anchor(&vertical).unwrap();
        assert!(a.point.dist(Point::new(0.25, 0.5)) < 1e-12, "{:?}", a);
        assert!(close(a.time, 0.5, 1e-12));

        assert!(matches!(hom.anchor(&Line::new(0.0, 3.0)), Err(Error::LineMisses)));
    }

    #[test]
    fn square_anchor_matches_bisection() {
        let hom = WindowFamily::homothety(ConvexDomain::square(0.0, 0.0, 1.0));
        let vertical = Line::through(Point::new(0.25, 0.0), PI / 2.0);
        // minimise the reveal time along the chord by bisection on the slope
        let (a, b) = hom.base().chord(&vertical).unwrap();
        let g = |s: f64| hom.gauge(vertical.at(s));
        let (mut lo, mut hi) = (vertical.coord(a), vertical.coord(b));
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) <= g(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        assert!(close(g(lo), 0.5, 1e-9));
    }

    #[test]
    fn mu_hit_examples() {
        let seg = mu_hit_measure(&HitTarget::Segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0)));
        assert_eq!(seg.value, 2.0);
        assert!(!seg.degenerate);
        let disc = mu_hit_measure(&HitTarget::Domain(ConvexDomain::unit_disc()));
        assert!(close(disc.value, 2.0 * PI, 1e-12));
        let pt = mu_hit_measure(&HitTarget::Segment(Point::new(0.5, 0.5), Point::new(0.5, 0.5)));
        assert_eq!(pt.value, 0.0);
        assert!(pt.degenerate);
    }

    #[test]
    fn polygon_rejects_nonconvex() {
        let r = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.2),
            Point::new(1.0, 2.0),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn chord_end_tracks_shrinking_window() {
        let f = WindowFamily::homothety(ConvexDomain::unit_disc());
        let l = Line::new(0.4, 0.3);
        let a = f.anchor(&l).unwrap();
        let p = f.chord_end(&l, a.point, 1.0, 0.8);
        assert!(close(f.gauge(p), 0.8, 1e-12));
        assert!(l.coord(p) > l.coord(a.point));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn families() -> impl Strategy<Value = (WindowFamily, Point)> {
        (0usize..2, -0.5f64..0.5, -0.5f64..0.5, 0.0f64..1.0, 0.0f64..TAU).prop_map(|(k, ox, oy, r, th)| {
            let base = if k == 0 {
                ConvexDomain::disc(Point::new(0.2, -0.1), 1.1).unwrap()
            } else {
                ConvexDomain::polygon(vec![
                    Point::new(-1.0, -1.0),
                    Point::new(1.2, -0.8),
                    Point::new(0.9, 1.0),
                    Point::new(-0.7, 1.1),
                ])
                .unwrap()
            };
            let fam = WindowFamily::homothety(base.clone());
            let fam = WindowFamily::new(base, Point::new(ox, oy), fam.kind()).unwrap();
            let reach = fam.base().max_distance_from(fam.origin());
            let p = fam.origin() + Point::new(th.cos(), th.sin()) * (r * reach);
            (fam, p)
        })
    }

    proptest! {
        #[test]
        fn gauge_matches_bisection((fam, p) in families()) {
            prop_assume!(fam.base().contains(p, 0.0));
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if fam.base().scaled(fam.origin(), mid).contains(p, 0.0) { hi = mid } else { lo = mid }
            }
            prop_assert!((fam.gauge(p) - hi).abs() < 1e-9);
        }

        #[test]
        fn anchor_minimises_reveal_time((fam, p) in families(), phi in 0.0f64..PI) {
            prop_assume!(fam.base().depth(p) > 1e-3);
            let l = Line::through(p, phi);
            let a = fam.anchor(&l).unwrap();
            let (c0, c1) = fam.base().chord(&l).unwrap();
            let best = (0..=2000)
                .map(|i| fam.gauge(c0.lerp(c1, i as f64 / 2000.0)))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(a.time <= best + 1e-9);
            prop_assert!((fam.gauge(a.point) - a.time).abs() < 1e-9);
        }

        #[test]
        fn window_chords_shrink(phi in 0.0f64..PI, rho in -0.9f64..0.9, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let fam = WindowFamily::new(ConvexDomain::unit_disc(), Point::new(0.3, 0.1), WindowKind::Homothety).unwrap();
            let l = Line::new(phi, rho);
            let (ta, tb) = (t1.min(t2), t1.max(t2));
            if let Some((a, b)) = fam.chord_at(&l, ta) {
                let (c, d) = fam.chord_at(&l, tb).unwrap();
                prop_assert!(l.coord(c) <= l.coord(a) + 1e-9 && l.coord(d) >= l.coord(b) - 1e-9);
            }
        }

        #[test]
        fn separation_ignores_point_order(phi in 0.0f64..PI, rho in -1.0f64..1.0, pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..8)) {
            let l = Line::new(phi, rho);
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let mut rev = pts.clone();
            rev.reverse();
            prop_assert_eq!(separates(&l, &pts), separates(&l, &rev));
        }

        #[test]
        fn hit_measure_is_crofton(ax in -1.0f64..1.0, ay in -1.0f64..1.0, bx in -1.0f64..1.0, by in -1.0f64..1.0) {
            let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
            let n = 20000;
            let h = PI / n as f64;
            let sum: f64 = (0..n)
                .map(|i| {
                    let phi = (i as f64 + 0.5) * h;
                    let nrm = Point::new(phi.sin(), phi.cos());
                    (nrm.dot(b - a)).abs() * h
                })
                .sum();
            let m = mu_hit_measure(&HitTarget::Segment(a, b));
            prop_assert!((m.value - sum).abs() < 1e-6);
        }
    }
}
