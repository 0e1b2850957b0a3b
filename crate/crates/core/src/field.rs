//! Event-driven outward construction of consistent polygonal fields.
//!
//! A growing window reveals the field: lines are born at their anchor points,
//! pairs of lines are born at Poisson vertex sites, growing tips turn at
//! activity-driven hazards, and tips stop on collision or at the boundary.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::activity::ActivityMeasure;
use crate::error::{Error, Result};
use crate::events::EventQueue;
use crate::geometry::{angle_gap, intersection_point, ConvexDomain, Line, Point, Segment, WindowFamily, EPS_GEO};
use crate::markers::Marker;

/// Tolerance used when clustering edge endpoints into vertices.
pub const VERTEX_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lineage {
    LineBirth,
    VertexBirth,
    DirectionalUpdate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldEdge {
    pub segment: Segment,
    pub line: Line,
    pub lineage: Lineage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldVertex {
    pub point: Point,
    pub degree: usize,
    pub on_boundary: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldStats {
    pub line_births: usize,
    pub vertex_births: usize,
    pub turns: usize,
    pub collisions: usize,
    pub boundary_hits: usize,
    pub degenerate_resamples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub edges: Vec<FieldEdge>,
    pub vertices: Vec<FieldVertex>,
    pub seed: u64,
    pub domain: ConvexDomain,
    pub family: WindowFamily,
    pub stats: FieldStats,
}

impl FieldSample {
    /// Wraps a list of edges, deriving the vertex table from their endpoints.
    pub fn from_edges(family: WindowFamily, edges: Vec<FieldEdge>, seed: u64) -> FieldSample {
        let domain = family.base().clone();
        let vertices = vertex_table(&domain, &edges);
        FieldSample {
            edges,
            vertices,
            seed,
            domain,
            family,
            stats: FieldStats::default(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Number of edges meeting the sub-window `sub` in a piece of positive
    /// length.
    pub fn edges_meeting(&self, sub: &ConvexDomain) -> usize {
        self.edges
            .iter()
            .filter(|e| match sub.chord(&e.line) {
                Some((a, b)) => {
                    let l = &e.line;
                    let (s0, s1) = sorted(l.coord(e.segment.a), l.coord(e.segment.b));
                    let (c0, c1) = sorted(l.coord(a), l.coord(b));
                    s1.min(c1) - s0.max(c0) > EPS_GEO
                }
                None => false,
            })
            .count()
    }

    /// Number of edges crossing the probe segment.
    pub fn crossings(&self, probe: &Segment) -> usize {
        self.edges
            .iter()
            .filter(|e| e.segment.intersection(probe).is_some())
            .count()
    }

    /// Total edge length.
    pub fn length(&self) -> f64 {
        self.edges.iter().map(|e| e.segment.length()).sum()
    }
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn vertex_table(domain: &ConvexDomain, edges: &[FieldEdge]) -> Vec<FieldVertex> {
    let mut out: Vec<FieldVertex> = Vec::new();
    for e in edges {
        for p in [e.segment.a, e.segment.b] {
            match out.iter_mut().find(|v| v.point.dist(p) <= VERTEX_TOL) {
                Some(v) => v.degree += 1,
                None => out.push(FieldVertex {
                    point: p,
                    degree: 1,
                    on_boundary: domain.depth(p).abs() <= VERTEX_TOL,
                }),
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Crossing { i: usize, j: usize, at: Point },
    InteriorDegree { at: Point, degree: usize },
    BoundaryDegree { at: Point, degree: usize },
    Colinear { i: usize, j: usize },
    OutsideDomain { i: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks the admissibility conditions: non-crossing edges, interior
/// vertices of degree two, boundary vertices of degree one and no colinear
/// edge pairs. Tolerance is [`VERTEX_TOL`].
pub fn check_admissible(s: &FieldSample) -> Admissibility {
    check_edges(&s.domain, &s.edges)
}

pub(crate) fn check_edges(domain: &ConvexDomain, edges: &[FieldEdge]) -> Admissibility {
    let mut violations = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if !domain.contains(e.segment.a, VERTEX_TOL) || !domain.contains(e.segment.b, VERTEX_TOL) {
            violations.push(Violation::OutsideDomain { i });
        }
        for (j, f) in edges.iter().enumerate().skip(i + 1) {
            if same_line(&e.line, &f.line) {
                violations.push(Violation::Colinear { i, j });
                continue;
            }
            if let Some(p) = e.segment.intersection(&f.segment) {
                let at_e = p.dist(e.segment.a) <= VERTEX_TOL || p.dist(e.segment.b) <= VERTEX_TOL;
                let at_f = p.dist(f.segment.a) <= VERTEX_TOL || p.dist(f.segment.b) <= VERTEX_TOL;
                if !(at_e && at_f) {
                    violations.push(Violation::Crossing { i, j, at: p });
                }
            }
        }
    }
    for v in vertex_table(domain, edges) {
        if v.on_boundary && v.degree != 1 {
            violations.push(Violation::BoundaryDegree {
                at: v.point,
                degree: v.degree,
            });
        } else if !v.on_boundary && v.degree != 2 {
            violations.push(Violation::InteriorDegree {
                at: v.point,
                degree: v.degree,
            });
        }
    }
    Admissibility {
        ok: violations.is_empty(),
        violations,
    }
}

fn same_line(a: &Line, b: &Line) -> bool {
    angle_gap(a.phi, b.phi) <= VERTEX_TOL && {
        let p = a.foot();
        b.signed_distance(p).abs() <= VERTEX_TOL
    }
}

/// True iff some edge's line is within `eps_phi` in angle of the marker line
/// and the edge passes within `eps_x` of the marker point.
pub fn marker_hit(s: &FieldSample, marker: &Marker, eps_x: f64, eps_phi: f64) -> bool {
    s.edges.iter().any(|e| edge_hits(e, marker, eps_x, eps_phi))
}

pub(crate) fn edge_hits(e: &FieldEdge, marker: &Marker, eps_x: f64, eps_phi: f64) -> bool {
    angle_gap(e.line.phi, marker.line.phi) < eps_phi && e.segment.distance_to(marker.point) < eps_x
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Collision(usize, usize, Point),
    Boundary(usize),
    Turn(usize, Point),
    LineBirth(Line),
    VertexBirth(Point, Line, Line),
}

impl Ev {
    fn name(&self) -> &'static str {
        match self {
            Ev::Collision(..) => "collision",
            Ev::Boundary(_) => "boundary",
            Ev::Turn(..) => "turn",
            Ev::LineBirth(_) => "line-birth",
            Ev::VertexBirth(..) => "vertex-birth",
        }
    }
}

struct Tip {
    line: Line,
    side: f64,
    start: Point,
    exit: Point,
    lineage: Lineage,
    end: Option<Point>,
    sibling: Option<usize>,
}

impl Tip {
    fn ahead(&self, z: Point) -> bool {
        let l = &self.line;
        (l.coord(z) - l.coord(self.start)) * self.side > EPS_GEO
            && (l.coord(self.exit) - l.coord(z)) * self.side >= -EPS_GEO
    }
}

struct Sampler<'a, R: Rng + ?Sized> {
    act: &'a ActivityMeasure,
    fam: &'a WindowFamily,
    rng: &'a mut R,
    tips: Vec<Tip>,
    queue: EventQueue<Ev>,
    stats: FieldStats,
    log: Vec<(f64, &'static str)>,
    now: f64,
}

/// Draws a field sample on the family's base domain.
pub fn sample_field<R: Rng + ?Sized>(act: &ActivityMeasure, fam: &WindowFamily, rng: &mut R) -> Result<FieldSample> {
    let mut s = Sampler {
        act,
        fam,
        rng,
        tips: Vec::new(),
        queue: EventQueue::new(),
        stats: FieldStats::default(),
        log: Vec::new(),
        now: 0.0,
    };
    s.schedule_births()?;
    s.run()?;
    Ok(s.finish())
}

impl<R: Rng + ?Sized> Sampler<'_, R> {
    fn schedule_births(&mut self) -> Result<()> {
        let dom = self.fam.base().clone();
        for l in self.act.sample_line_process(&dom, self.rng) {
            let a = self.fam.anchor(&l)?;
            self.queue.push(a.time, 3, Ev::LineBirth(l));
        }
        let m_max = self.act.m_max();
        if m_max == 0.0 {
            return Ok(());
        }
        let disc = dom.bounding_disc();
        let box_area = 4.0 * disc.radius * disc.radius;
        let mean = PI * m_max * m_max * box_area;
        let n = Poisson::new(mean).expect("positive mean").sample(self.rng) as usize;
        for _ in 0..n {
            let z = Point::new(
                disc.center.x + disc.radius * (2.0 * self.rng.random::<f64>() - 1.0),
                disc.center.y + disc.radius * (2.0 * self.rng.random::<f64>() - 1.0),
            );
            if !dom.contains(z, 0.0) {
                continue;
            }
            let phi1 = self.rng.random::<f64>() * PI;
            let l1 = Line::through(z, phi1);
            let l2 = Line::through(z, phi1 + ActivityMeasure::sample_gap(self.rng));
            if self.act.lambda().is_none() {
                let u = self.rng.random::<f64>() * m_max * m_max;
                if u >= self.act.density(&l1) * self.act.density(&l2) {
                    continue;
                }
            }
            let t = self.fam.reveal_time(z)?;
            self.queue.push(t, 4, Ev::VertexBirth(z, l1, l2));
        }
        Ok(())
    }

    fn fail(&self, message: String) -> Error {
        Error::Simulation {
            message,
            log: self.log.iter().map(|(t, k)| format!("{t:.12} {k}")).collect(),
        }
    }

    fn run(&mut self) -> Result<()> {
        while let Some((t, ev)) = self.queue.pop() {
            if t < self.now - 1e-9 {
                return Err(self.fail(format!("event at {t} scheduled before {}", self.now)));
            }
            self.now = self.now.max(t);
            self.log.push((t, ev.name()));
            match ev {
                Ev::Boundary(i) => {
                    if self.tips[i].end.is_none() {
                        self.tips[i].end = Some(self.tips[i].exit);
                        self.stats.boundary_hits += 1;
                    }
                }
                Ev::Collision(i, j, z) => {
                    if self.tips[i].end.is_none() && self.tips[j].end.is_none() {
                        self.tips[i].end = Some(z);
                        self.tips[j].end = Some(z);
                        self.stats.collisions += 1;
                    }
                }
                Ev::Turn(i, q) => self.turn(i, q)?,
                Ev::LineBirth(l) => {
                    let a = self.fam.anchor(&l)?;
                    self.stats.line_births += 1;
                    let lo = self.spawn(l, -1.0, a.point, Lineage::LineBirth, None)?;
                    let hi = self.spawn(l, 1.0, a.point, Lineage::LineBirth, Some(lo))?;
                    self.tips[lo].sibling = Some(hi);
                }
                Ev::VertexBirth(z, l1, l2) => self.vertex_birth(z, l1, l2)?,
            }
        }
        Ok(())
    }

    /// Side of `p` relative to the anchor of `l`, or `None` when `p` is
    /// within tolerance of the anchor.
    fn outward_side(&self, l: &Line, p: Point) -> Option<f64> {
        let a = self.fam.anchor(l).ok()?;
        let d = l.coord(p) - l.coord(a.point);
        if d.abs() <= EPS_GEO {
            None
        } else {
            Some(d.signum())
        }
    }

    fn vertex_birth(&mut self, z: Point, mut l1: Line, mut l2: Line) -> Result<()> {
        let mut tries = 0;
        loop {
            if let (Some(s1), Some(s2)) = (self.outward_side(&l1, z), self.outward_side(&l2, z)) {
                self.stats.vertex_births += 1;
                self.spawn(l1, s1, z, Lineage::VertexBirth, None)?;
                self.spawn(l2, s2, z, Lineage::VertexBirth, None)?;
                return Ok(());
            }
            self.stats.degenerate_resamples += 1;
            tries += 1;
            if tries > 1000 {
                return Err(self.fail("vertex birth keeps degenerating".into()));
            }
            let (a, b) = self.act.sample_vertex_pair(z, self.rng)?;
            l1 = a;
            l2 = b;
        }
    }

    fn turn(&mut self, i: usize, q: Point) -> Result<()> {
        if self.tips[i].end.is_some() {
            return Ok(());
        }
        let phi = self.tips[i].line.phi;
        let Some(mut l) = self.act.propose_turn(q, phi, self.rng) else {
            self.schedule_turn(i, q);
            return Ok(());
        };
        let mut tries = 0;
        let side = loop {
            if angle_gap(l.phi, phi) > EPS_GEO {
                if let Some(s) = self.outward_side(&l, q) {
                    break s;
                }
            }
            self.stats.degenerate_resamples += 1;
            tries += 1;
            if tries > 1000 {
                return Err(self.fail("directional update keeps degenerating".into()));
            }
            l = self.act.sample_turn_direction(q, &self.tips[i].line, self.rng)?;
        };
        self.tips[i].end = Some(q);
        self.stats.turns += 1;
        self.spawn(l, side, q, Lineage::DirectionalUpdate, None)?;
        Ok(())
    }

    fn schedule_turn(&mut self, i: usize, from: Point) {
        let m_max = self.act.m_max();
        if m_max == 0.0 {
            return;
        }
        let ell = Exp::new(2.0 * m_max).expect("positive rate").sample(self.rng);
        let tip = &self.tips[i];
        let q = from + tip.line.direction() * (tip.side * ell);
        if (tip.line.coord(tip.exit) - tip.line.coord(q)) * tip.side <= 0.0 {
            return;
        }
        let t = self.fam.gauge(q).clamp(self.now, 1.0);
        self.queue.push(t, 2, Ev::Turn(i, q));
    }

    fn spawn(
        &mut self,
        line: Line,
        side: f64,
        start: Point,
        lineage: Lineage,
        sibling: Option<usize>,
    ) -> Result<usize> {
        let (a, b) = self.fam.base().chord(&line).ok_or(Error::LineMisses)?;
        let exit = if side > 0.0 { b } else { a };
        let id = self.tips.len();
        let tip = Tip {
            line,
            side,
            start,
            exit,
            lineage,
            end: None,
            sibling,
        };
        let zero_length = (line.coord(exit) - line.coord(start)) * side <= EPS_GEO;
        self.tips.push(tip);
        if zero_length {
            self.tips[id].end = Some(start);
            return Ok(id);
        }
        let t_exit = self.fam.gauge(exit).clamp(self.now, 1.0);
        self.queue.push(t_exit, 1, Ev::Boundary(id));
        self.schedule_turn(id, start);
        for j in 0..id {
            if self.tips[j].end.is_some() {
                continue;
            }
            let Some(z) = intersection_point(&self.tips[id].line, &self.tips[j].line) else {
                continue;
            };
            if self.tips[id].ahead(z) && self.tips[j].ahead(z) {
                let t = self.fam.gauge(z).clamp(self.now, 1.0);
                self.queue.push(t, 0, Ev::Collision(id, j, z));
            }
        }
        Ok(id)
    }

    fn finish(self) -> FieldSample {
        let mut edges = Vec::new();
        for (i, tip) in self.tips.iter().enumerate() {
            let end = tip.end.expect("all tips stop");
            match tip.sibling {
                Some(j) if j < i => continue,
                Some(j) => {
                    let other = self.tips[j].end.expect("all tips stop");
                    if end.dist(other) > EPS_GEO {
                        edges.push(FieldEdge {
                            segment: Segment { a: end, b: other },
                            line: tip.line,
                            lineage: tip.lineage,
                        });
                    }
                }
                None => {
                    if end.dist(tip.start) > EPS_GEO {
                        edges.push(FieldEdge {
                            segment: Segment { a: tip.start, b: end },
                            line: tip.line,
                            lineage: tip.lineage,
                        });
                    }
                }
            }
        }
        let mut s = FieldSample::from_edges(self.fam.clone(), edges, 0);
        s.stats = self.stats;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WindowKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disc_family() -> WindowFamily {
        WindowFamily::homothety(ConvexDomain::unit_disc())
    }

    fn edge(ax: f64, ay: f64, bx: f64, by: f64) -> FieldEdge {
        let segment = Segment::new(Point::new(ax, ay), Point::new(bx, by)).unwrap();
        FieldEdge {
            segment,
            line: segment.line(),
            lineage: Lineage::LineBirth,
        }
    }

    #[test]
    fn zero_activity_gives_empty_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let act = ActivityMeasure::homogeneous(0.0).unwrap();
        let s = sample_field(&act, &disc_family(), &mut rng).unwrap();
        assert!(s.is_empty());
        assert!(check_admissible(&s).ok);
    }

    #[test]
    fn crossing_segments_rejected() {
        let fam = WindowFamily::homothety(ConvexDomain::square(-1.0, -1.0, 2.0));
        let s = FieldSample::from_edges(fam, vec![edge(-1.0, 0.0, 1.0, 0.0), edge(0.0, -1.0, 0.0, 1.0)], 0);
        let r = check_admissible(&s);
        assert!(!r.ok);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Crossing { i: 0, j: 1, .. })));
    }

    #[test]
    fn samples_are_admissible() {
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let fams = [
            disc_family(),
            WindowFamily::new(
                ConvexDomain::unit_disc(),
                Point::new(0.3, -0.2),
                WindowKind::ConcentricDisc,
            )
            .unwrap(),
            WindowFamily::new(
                ConvexDomain::square(0.0, 0.0, 1.0),
                Point::new(0.2, 0.7),
                WindowKind::Homothety,
            )
            .unwrap(),
        ];
        for (k, fam) in fams.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
            for _ in 0..300 {
                let s = sample_field(&act, fam, &mut rng).unwrap();
                let r = check_admissible(&s);
                assert!(r.ok, "{:?}", r.violations);
            }
        }
    }

    #[test]
    fn anisotropic_samples_are_admissible() {
        let act = ActivityMeasure::anisotropic(1.5, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let s = sample_field(&act, &disc_family(), &mut rng).unwrap();
            assert!(check_admissible(&s).ok);
        }
    }

    #[test]
    fn marker_hit_examples() {
        let fam = disc_family();
        let m = Marker::new(Point::new(0.1, 0.0), 0.0);
        let empty = FieldSample::from_edges(fam.clone(), vec![], 0);
        assert!(!marker_hit(&empty, &m, 0.1, 0.1));
        let s = FieldSample::from_edges(fam, vec![edge(-1.0, 0.0, 1.0, 0.0)], 0);
        assert!(marker_hit(&s, &m, 1e-6, 1e-6));
        let off = Marker::new(Point::new(0.1, 0.0), 0.5);
        assert!(!marker_hit(&s, &off, 1e-3, 1e-3));
    }

    #[test]
    fn deterministic_replay() {
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let a = sample_field(&act, &disc_family(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_field(&act, &disc_family(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }
}
