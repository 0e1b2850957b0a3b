//! Inward branching construction of polygonal webs.
//!
//! Time `s` runs over `[0, 1]` and the window `D_{1-s}` shrinks. Edge germs
//! sit at the marker points until the window boundary reaches them; active
//! edges then follow the boundary along their lines towards their anchor
//! points, branching and terminating at equal hazards, and crossing the
//! lines of other live edges forces colinear offspring.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::activity::ActivityMeasure;
use crate::error::{Error, Result};
use crate::events::EventQueue;
use crate::geometry::{angle_gap, intersection_point, separates, ConvexDomain, Line, Point, WindowFamily, EPS_GEO};
use crate::markers::MarkerConfig;

/// Largest number of root-to-terminal branches unfolded from a web.
pub const BRANCH_CAP: usize = 1 << 16;
const EVENT_CAP: usize = 5_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Every edge stops when its line becomes tangent to the window.
    #[default]
    #[serde(alias = "tangency")]
    AtTangency,
    /// Separation is checked at every event time, with tangency as backstop.
    Immediate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeOrigin {
    Germ(usize),
    Branch { parent: usize },
    Forced { parent: usize, forcer: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndCause {
    Terminated,
    Tangency,
    Separated,
    Frozen,
    /// A forced edge reached the germ point of an inactive colinear germ,
    /// which carries on.
    Merged(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchKind {
    Free,
    Forced,
    /// Crossing of two active tips; a branch may continue on the other edge.
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Switch {
    pub time: f64,
    pub point: Point,
    pub target: usize,
    pub kind: SwitchKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebEdge {
    pub line: Line,
    pub line_id: usize,
    /// Side of the anchor (along the line direction) from which the tip
    /// approaches it.
    pub side: f64,
    pub origin: EdgeOrigin,
    pub start: Point,
    pub start_time: f64,
    pub end: Point,
    pub end_time: f64,
    pub cause: EndCause,
    pub switches: Vec<Switch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meet {
    pub time: f64,
    pub point: Point,
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WebEvent {
    Activate(usize),
    Switch { edge: usize, index: usize },
    Meet(usize),
    End(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub time: f64,
    pub event: WebEvent,
}

/// A root-to-terminal path: the edges visited and, for each but the last,
/// the switch taken to leave it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub root: usize,
    pub hops: Vec<(usize, Option<usize>)>,
    pub terminal: Point,
    pub cause: EndCause,
}

impl Branch {
    pub fn last_edge(&self) -> usize {
        self.hops.last().expect("nonempty").0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeCensus {
    pub t: usize,
    pub i: usize,
    pub x: usize,
    pub v: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalWeb {
    pub edges: Vec<WebEdge>,
    pub meets: Vec<Meet>,
    pub log: Vec<LogEntry>,
    /// Directional lines indexed by line id; marker lines come first.
    pub lines: Vec<Line>,
    pub branches: Vec<Branch>,
    /// Set when the branch count exceeded [`BRANCH_CAP`]; `branches` is then empty.
    pub branch_overflow: bool,
    pub markers: MarkerConfig,
    pub domain: ConvexDomain,
    pub stop_rule: StopRule,
    pub seed: u64,
}

impl PolygonalWeb {
    /// Number of terminals (one per branch), `None` past [`BRANCH_CAP`].
    pub fn terminal_count(&self) -> Option<usize> {
        (!self.branch_overflow).then_some(self.branches.len())
    }

    /// Polyline of a branch from its root to its terminal.
    pub fn branch_polyline(&self, b: &Branch) -> Vec<Point> {
        let mut pts = vec![self.edges[b.hops[0].0].start];
        for &(e, sw) in &b.hops {
            if let Some(i) = sw {
                pts.push(self.edges[e].switches[i].point);
            }
        }
        pts.push(b.terminal);
        pts
    }

    /// Nodes of the web graph: branchings (T), ends (I), tip crossings (X)
    /// and pairs of non-colinear edges ending at a common point (V).
    pub fn node_census(&self) -> NodeCensus {
        let mut c = NodeCensus {
            x: self.meets.len(),
            ..Default::default()
        };
        for e in &self.edges {
            c.t += e.switches.iter().filter(|s| s.kind != SwitchKind::Cross).count();
            if e.end.dist(e.start) > EPS_GEO {
                c.i += 1;
            }
        }
        for (i, a) in self.edges.iter().enumerate() {
            for b in &self.edges[i + 1..] {
                if a.line_id != b.line_id
                    && a.end.dist(b.end) <= 1e-9
                    && a.end.dist(a.start) > EPS_GEO
                    && b.end.dist(b.start) > EPS_GEO
                {
                    c.v += 1;
                }
            }
        }
        c
    }

    /// Forced edges with their forcing edges.
    pub fn forced_pairs(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e.origin {
                EdgeOrigin::Forced { forcer, .. } => Some((i, forcer)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Inactive,
    Active,
    Ended,
}

struct LineInfo {
    line: Line,
    anchor: Point,
    tau: f64,
    live: usize,
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Activate(usize),
    Tangency(usize),
    Proposal(usize, Point),
    Cross(usize, usize, Point),
}

const RANK_TANGENCY: u8 = 0;
const RANK_CROSS: u8 = 1;
const RANK_PROPOSAL: u8 = 2;
const RANK_ACTIVATE: u8 = 3;

struct Sampler<'a, R: Rng + ?Sized> {
    act: &'a ActivityMeasure,
    fam: &'a WindowFamily,
    rng: &'a mut R,
    stop: StopRule,
    edges: Vec<WebEdge>,
    state: Vec<State>,
    lines: Vec<LineInfo>,
    queue: EventQueue<Ev>,
    log: Vec<LogEntry>,
    meets: Vec<Meet>,
    met: HashSet<(usize, usize)>,
    now: f64,
    processed: usize,
}

/// Draws a polygonal web generated by the marker configuration.
pub fn sample_web<R: Rng + ?Sized>(
    act: &ActivityMeasure,
    fam: &WindowFamily,
    mc: &MarkerConfig,
    stop: StopRule,
    rng: &mut R,
) -> Result<PolygonalWeb> {
    mc.check_inside(fam.base())?;
    let mut s = Sampler {
        act,
        fam,
        rng,
        stop,
        edges: Vec::new(),
        state: Vec::new(),
        lines: Vec::new(),
        queue: EventQueue::new(),
        log: Vec::new(),
        meets: Vec::new(),
        met: HashSet::new(),
        now: 0.0,
        processed: 0,
    };
    s.init(mc)?;
    s.run()?;
    let lines = s.lines.iter().map(|l| l.line).collect();
    let mut web = PolygonalWeb {
        edges: s.edges,
        meets: s.meets,
        log: s.log,
        lines,
        branches: Vec::new(),
        branch_overflow: false,
        markers: mc.clone(),
        domain: fam.base().clone(),
        stop_rule: stop,
        seed: 0,
    };
    match unfold_branches(&web) {
        Ok(b) => web.branches = b,
        Err(_) => web.branch_overflow = true,
    }
    Ok(web)
}

/// The deterministic web grown without free branchings or terminations.
pub fn zero_activity_web(fam: &WindowFamily, mc: &MarkerConfig, stop: StopRule) -> Result<PolygonalWeb> {
    let zero = ActivityMeasure::homogeneous(0.0)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    sample_web(&zero, fam, mc, stop, &mut rng)
}

impl<R: Rng + ?Sized> Sampler<'_, R> {
    fn init(&mut self, mc: &MarkerConfig) -> Result<()> {
        for l in mc.lines() {
            let a = self.fam.anchor(l)?;
            self.lines.push(LineInfo {
                line: *l,
                anchor: a.point,
                tau: a.time,
                live: 0,
            });
        }
        for (i, m) in mc.markers().iter().enumerate() {
            let id = mc.line_index(i);
            let info = &mut self.lines[id];
            info.live += 1;
            let d = info.line.coord(m.point) - info.line.coord(info.anchor);
            let side = if d >= 0.0 { 1.0 } else { -1.0 };
            let s_act = 1.0 - self.fam.reveal_time(m.point)?;
            self.edges.push(WebEdge {
                line: info.line,
                line_id: id,
                side,
                origin: EdgeOrigin::Germ(i),
                start: m.point,
                start_time: s_act,
                end: m.point,
                end_time: f64::NAN,
                cause: EndCause::Frozen,
                switches: Vec::new(),
            });
            self.state.push(State::Inactive);
            self.queue.push(s_act, RANK_ACTIVATE, Ev::Activate(i));
        }
        self.separation_sweep();
        Ok(())
    }

    fn fail(&self, message: String) -> Error {
        Error::Simulation {
            message,
            log: self
                .log
                .iter()
                .map(|e| format!("{:.12} {:?}", e.time, e.event))
                .collect(),
        }
    }

    fn run(&mut self) -> Result<()> {
        while let Some((t, ev)) = self.queue.pop() {
            if t < self.now - 1e-9 {
                return Err(self.fail(format!("event at {t} scheduled before {}", self.now)));
            }
            self.processed += 1;
            if self.processed > EVENT_CAP {
                return Err(self.fail("event cap exceeded".into()));
            }
            self.now = self.now.max(t);
            let changed = match ev {
                Ev::Activate(g) => self.activate(g)?,
                Ev::Tangency(e) => {
                    if self.state[e] == State::Active {
                        let p = self.lines[self.edges[e].line_id].anchor;
                        self.end(e, p, EndCause::Tangency);
                        true
                    } else {
                        false
                    }
                }
                Ev::Proposal(e, q) => self.proposal(e, q)?,
                Ev::Cross(e, l, z) => self.cross(e, l, z)?,
            };
            if changed {
                self.separation_sweep();
            }
        }
        for (e, st) in self.state.iter().enumerate() {
            if *st != State::Ended {
                return Err(self.fail(format!("edge {e} never stopped")));
            }
        }
        Ok(())
    }

    fn tip(&self, e: usize) -> Point {
        let edge = &self.edges[e];
        match self.state[e] {
            State::Active => {
                let info = &self.lines[edge.line_id];
                self.fam
                    .chord_end(&info.line, info.anchor, edge.side, (1.0 - self.now).clamp(0.0, 1.0))
            }
            _ => edge.start,
        }
    }

    fn end(&mut self, e: usize, p: Point, cause: EndCause) {
        let edge = &mut self.edges[e];
        edge.end = p;
        edge.end_time = self.now;
        edge.cause = cause;
        self.lines[edge.line_id].live -= 1;
        self.state[e] = State::Ended;
        self.log.push(LogEntry {
            time: self.now,
            event: WebEvent::End(e),
        });
    }

    fn separation_sweep(&mut self) {
        if self.stop != StopRule::Immediate {
            return;
        }
        loop {
            let live: Vec<usize> = (0..self.edges.len())
                .filter(|&e| self.state[e] != State::Ended)
                .collect();
            let pts: Vec<Point> = live.iter().map(|&e| self.tip(e)).collect();
            let mut doomed = Vec::new();
            for (k, &e) in live.iter().enumerate() {
                let others: Vec<Point> = pts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, p)| *p)
                    .collect();
                if separates(&self.edges[e].line, &others) {
                    doomed.push((e, pts[k]));
                }
            }
            if doomed.is_empty() {
                return;
            }
            for (e, p) in doomed {
                let cause = if self.state[e] == State::Active {
                    EndCause::Separated
                } else {
                    EndCause::Frozen
                };
                self.end(e, p, cause);
            }
        }
    }

    fn activate(&mut self, g: usize) -> Result<bool> {
        if self.state[g] != State::Inactive {
            return Ok(false);
        }
        self.state[g] = State::Active;
        self.log.push(LogEntry {
            time: self.now,
            event: WebEvent::Activate(g),
        });
        let (id, side, x) = (self.edges[g].line_id, self.edges[g].side, self.edges[g].start);
        let arriving = (0..self.edges.len()).find(|&t| {
            t != g && self.state[t] == State::Active && self.edges[t].line_id == id && self.edges[t].side == side
        });
        if let Some(t) = arriving {
            self.end(t, x, EndCause::Merged(g));
        }
        self.launch(g);
        Ok(true)
    }

    /// Schedules tangency, the first free event and line crossings of a newly
    /// active edge.
    fn launch(&mut self, e: usize) {
        let info = &self.lines[self.edges[e].line_id];
        self.queue
            .push((1.0 - info.tau).max(self.now), RANK_TANGENCY, Ev::Tangency(e));
        let start = self.edges[e].start;
        self.schedule_proposal(e, start);
        for l in 0..self.lines.len() {
            if l != self.edges[e].line_id && self.lines[l].live > 0 {
                self.schedule_cross(e, l, start);
            }
        }
    }

    fn toward_anchor(&self, e: usize) -> Point {
        let edge = &self.edges[e];
        edge.line.direction() * (-edge.side)
    }

    fn schedule_proposal(&mut self, e: usize, from: Point) {
        let m_max = self.act.m_max();
        if m_max == 0.0 {
            return;
        }
        let ell = Exp::new(4.0 * m_max).expect("positive rate").sample(self.rng);
        let info = &self.lines[self.edges[e].line_id];
        let remaining = (info.anchor - from).dot(self.toward_anchor(e));
        if ell >= remaining {
            return;
        }
        let q = from + self.toward_anchor(e) * ell;
        let s = (1.0 - self.fam.gauge(q)).max(self.now);
        self.queue.push(s, RANK_PROPOSAL, Ev::Proposal(e, q));
    }

    fn schedule_cross(&mut self, e: usize, l: usize, from: Point) {
        let Some(z) = intersection_point(&self.edges[e].line, &self.lines[l].line) else {
            return;
        };
        let d = self.toward_anchor(e);
        let anchor = self.lines[self.edges[e].line_id].anchor;
        if (z - from).dot(d) <= EPS_GEO || (anchor - z).dot(d) < 0.0 {
            return;
        }
        let s0 = 1.0 - self.fam.gauge(z);
        debug_assert!(
            s0 > self.now - 1e-9,
            "cross {e} {l} from {:?} z {:?} now {} s {} state {:?} origin {:?}",
            from,
            z,
            self.now,
            s0,
            self.state[e],
            self.edges[e].origin
        );
        let s = s0.max(self.now);
        self.queue.push(s, RANK_CROSS, Ev::Cross(e, l, z));
    }

    /// Side of `p` relative to the anchor of line `l`, `None` within tolerance.
    fn side_on(&self, l: usize, p: Point) -> Option<f64> {
        let info = &self.lines[l];
        let d = info.line.coord(p) - info.line.coord(info.anchor);
        if d.abs() <= EPS_GEO {
            None
        } else {
            Some(d.signum())
        }
    }

    fn push_switch(&mut self, e: usize, sw: Switch) {
        self.edges[e].switches.push(sw);
        let index = self.edges[e].switches.len() - 1;
        self.log.push(LogEntry {
            time: self.now,
            event: WebEvent::Switch { edge: e, index },
        });
    }

    fn new_edge(&mut self, line_id: usize, side: f64, origin: EdgeOrigin, start: Point) -> usize {
        let id = self.edges.len();
        self.edges.push(WebEdge {
            line: self.lines[line_id].line,
            line_id,
            side,
            origin,
            start,
            start_time: self.now,
            end: start,
            end_time: f64::NAN,
            cause: EndCause::Tangency,
            switches: Vec::new(),
        });
        self.state.push(State::Active);
        self.lines[line_id].live += 1;
        id
    }

    fn proposal(&mut self, e: usize, q: Point) -> Result<bool> {
        if self.state[e] != State::Active {
            return Ok(false);
        }
        let branch = self.rng.random::<f64>() < 0.5;
        let phi = self.edges[e].line.phi;
        let cand = self.act.propose_turn(q, phi, self.rng);
        let mut changed = false;
        match (branch, cand) {
            (true, Some(l)) => {
                if let Some((a, side)) = self.offspring_line(&l, q, phi) {
                    let lid = self.lines.len();
                    self.lines.push(LineInfo {
                        line: l,
                        anchor: a.point,
                        tau: a.time,
                        live: 0,
                    });
                    let child = self.new_edge(lid, side, EdgeOrigin::Branch { parent: e }, q);
                    self.push_switch(
                        e,
                        Switch {
                            time: self.now,
                            point: q,
                            target: child,
                            kind: SwitchKind::Free,
                        },
                    );
                    self.launch(child);
                    for o in 0..self.edges.len() {
                        if o != child && self.state[o] == State::Active {
                            let from = self.tip(o);
                            self.schedule_cross(o, lid, from);
                        }
                    }
                    changed = true;
                }
            }
            (false, Some(_)) => {
                self.end(e, q, EndCause::Terminated);
                return Ok(true);
            }
            _ => {}
        }
        self.schedule_proposal(e, q);
        Ok(changed)
    }

    /// Anchor and approach side of an offspring line through `q`; `None` for
    /// measure-zero degeneracies.
    fn offspring_line(&self, l: &Line, q: Point, phi_parent: f64) -> Option<(crate::geometry::Anchor, f64)> {
        if angle_gap(l.phi, phi_parent) <= EPS_GEO {
            return None;
        }
        let a = self.fam.anchor(l).ok()?;
        let d = l.coord(q) - l.coord(a.point);
        if d.abs() <= EPS_GEO {
            return None;
        }
        Some((a, d.signum()))
    }

    fn cross(&mut self, e: usize, l: usize, z: Point) -> Result<bool> {
        if self.state[e] != State::Active || self.lines[l].live == 0 || self.edges[e].line_id == l {
            return Ok(false);
        }
        let Some(side) = self.side_on(l, z) else {
            return Ok(false);
        };
        let at_z = (0..self.edges.len()).find(|&t| {
            t != e && self.state[t] == State::Active && self.edges[t].line_id == l && self.edges[t].side == side
        });
        if let Some(t) = at_z {
            let key = (e.min(t), e.max(t));
            if self.met.insert(key) {
                self.meets.push(Meet {
                    time: self.now,
                    point: z,
                    a: e,
                    b: t,
                });
                self.log.push(LogEntry {
                    time: self.now,
                    event: WebEvent::Meet(self.meets.len() - 1),
                });
                for (from, to) in [(e, t), (t, e)] {
                    self.push_switch(
                        from,
                        Switch {
                            time: self.now,
                            point: z,
                            target: to,
                            kind: SwitchKind::Cross,
                        },
                    );
                }
                return Ok(true);
            }
            return Ok(false);
        }
        let forcer = self.pick_forcer(l, side, z);
        let f = self.new_edge(l, side, EdgeOrigin::Forced { parent: e, forcer }, z);
        self.push_switch(
            e,
            Switch {
                time: self.now,
                point: z,
                target: f,
                kind: SwitchKind::Forced,
            },
        );
        self.launch(f);
        Ok(true)
    }

    /// The live edge on line `l` a new forced edge will meet: the active
    /// edge approaching from the other side, else the nearest inactive germ.
    fn pick_forcer(&self, l: usize, side: f64, z: Point) -> usize {
        let live: Vec<usize> = (0..self.edges.len())
            .filter(|&t| self.edges[t].line_id == l && self.state[t] != State::Ended)
            .collect();
        if let Some(&t) = live
            .iter()
            .find(|&&t| self.state[t] == State::Active && self.edges[t].side != side)
        {
            return t;
        }
        *live
            .iter()
            .min_by(|&&a, &&b| self.edges[a].start.dist(z).total_cmp(&self.edges[b].start.dist(z)))
            .expect("line is live")
    }
}

/// All root-to-terminal paths; a path entering an edge at time `t` may leave
/// it by any later switch.
pub fn unfold_branches(web: &PolygonalWeb) -> Result<Vec<Branch>> {
    let mut out = Vec::new();
    for (g, e) in web.edges.iter().enumerate() {
        let EdgeOrigin::Germ(root) = e.origin else { continue };
        let mut hops = Vec::new();
        walk(web, root, g, f64::NEG_INFINITY, &mut hops, &mut out)?;
    }
    Ok(out)
}

fn walk(
    web: &PolygonalWeb,
    root: usize,
    e: usize,
    entered: f64,
    hops: &mut Vec<(usize, Option<usize>)>,
    out: &mut Vec<Branch>,
) -> Result<()> {
    if out.len() >= BRANCH_CAP {
        return Err(Error::CapExceeded {
            size: out.len() + 1,
            cap: BRANCH_CAP,
        });
    }
    let edge = &web.edges[e];
    hops.push((e, None));
    out.push(Branch {
        root,
        hops: hops.clone(),
        terminal: edge.end,
        cause: edge.cause,
    });
    hops.pop();
    for (i, sw) in edge.switches.iter().enumerate() {
        if sw.time > entered {
            hops.push((e, Some(i)));
            walk(web, root, sw.target, sw.time, hops, out)?;
            hops.pop();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markers::Marker;
    use rand_chacha::ChaCha8Rng;

    fn family() -> WindowFamily {
        WindowFamily::new(
            ConvexDomain::unit_disc(),
            Point::new(0.13, -0.21),
            crate::geometry::WindowKind::Homothety,
        )
        .unwrap()
    }

    #[test]
    fn single_marker_zero_activity() {
        let mc = MarkerConfig::new(vec![Marker::new(Point::new(0.3, 0.2), 0.7)]).unwrap();
        let w = zero_activity_web(&family(), &mc, StopRule::AtTangency).unwrap();
        assert_eq!(w.edges.len(), 1);
        assert_eq!(w.branches.len(), 1);
        assert_eq!(w.edges[0].cause, EndCause::Tangency);
        let a = family().anchor(&mc.lines()[0]).unwrap();
        assert!(w.edges[0].end.dist(a.point) < 1e-12);
    }

    #[test]
    fn coupled_markers_bridge() {
        let l = Line::through(Point::new(-0.4, 0.1), 0.2);
        let mc = MarkerConfig::new(vec![
            Marker {
                line: l,
                point: l.at(l.coord(Point::new(-0.4, 0.1))),
            },
            Marker {
                line: l,
                point: l.at(l.coord(Point::new(-0.4, 0.1)) + 0.7),
            },
        ])
        .unwrap();
        let w = zero_activity_web(&family(), &mc, StopRule::AtTangency).unwrap();
        assert_eq!(w.edges.len(), 2);
        assert!(w.edges.iter().all(|e| e.line_id == 0));
        assert!(w.branches.len() >= 2);
        // the union of the two edges is one segment covering both markers
        let cs: Vec<f64> = w
            .edges
            .iter()
            .flat_map(|e| [l.coord(e.start), l.coord(e.end)])
            .collect();
        let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for m in mc.markers() {
            let c = l.coord(m.point);
            assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
        }
    }

    #[test]
    fn random_webs_are_well_formed() {
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let mc = MarkerConfig::new(vec![
            Marker::new(Point::new(0.1, 0.1), 0.4),
            Marker::new(Point::new(-0.2, 0.3), 2.0),
            Marker::new(Point::new(0.3, -0.3), 1.2),
        ])
        .unwrap();
        for stop in [StopRule::AtTangency, StopRule::Immediate] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..200 {
                let w = sample_web(&act, &family(), &mc, stop, &mut rng).unwrap();
                assert!(w.branches.len() >= mc.len());
                assert_eq!(w.node_census().v, 0);
                for (f, g) in w.forced_pairs() {
                    assert_eq!(w.edges[f].line_id, w.edges[g].line_id);
                }
                for e in &w.edges {
                    if stop == StopRule::AtTangency {
                        assert!(matches!(
                            e.cause,
                            EndCause::Tangency | EndCause::Terminated | EndCause::Merged(_)
                        ));
                    }
                    for s in &e.switches {
                        let r = family().gauge(s.point);
                        assert!((1.0 - s.time - r).abs() < 1e-9, "{:?} {} {}", s.kind, s.time, r);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let mc = MarkerConfig::new(vec![Marker::new(Point::new(0.1, 0.1), 0.4)]).unwrap();
        let a = sample_web(
            &act,
            &family(),
            &mc,
            StopRule::AtTangency,
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        let b = sample_web(
            &act,
            &family(),
            &mc,
            StopRule::AtTangency,
            &mut ChaCha8Rng::seed_from_u64(8),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
