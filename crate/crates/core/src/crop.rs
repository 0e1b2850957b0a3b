//! The crop functional of a polygonal web in three equivalent forms.
//!
//! A collection `Y` of branches grows along the web; two branches carried by
//! different edges stop when they meet. `Y` contributes `(-1)^{|Y|-k}` when
//! it is complete (every germ carries a branch), minimal (no branch turns at
//! or after its cut-off point) and normal (colinear forced/forcing edges
//! always coalesce).

use std::collections::{BTreeMap, HashSet};

use rand::Rng;

use crate::activity::ActivityMeasure;
use crate::error::{Error, Result};
use crate::geometry::{Point, WindowFamily};
use crate::markers::MarkerConfig;
use crate::web::{sample_web, EndCause, PolygonalWeb, StopRule, SwitchKind, WebEvent, BRANCH_CAP};

/// Largest branch count accepted by [`crop_subset_sum`].
pub const SUBSET_CAP: usize = 22;
/// Largest number of crop graphs enumerated by [`crop_graph_sum`].
pub const GRAPH_CAP: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeLabel {
    /// Two branches stopped on meeting.
    V,
    /// A branching kept by the collection.
    T,
    /// A branch end.
    I,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropNode {
    pub point: Point,
    pub label: NodeLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CropGraph {
    pub segments: Vec<(Point, Point)>,
    pub nodes: Vec<CropNode>,
    pub complete: bool,
    pub minimal: bool,
    pub normal: bool,
}

impl CropGraph {
    pub fn indicator(&self) -> bool {
        self.complete && self.minimal && self.normal
    }
}

#[derive(Clone, Copy)]
struct Cursor {
    branch: usize,
    hop: usize,
}

/// Grows the branches `y` (indices into `web.branches`) and labels the result.
pub fn build_crop_graph(web: &PolygonalWeb, y: &[usize]) -> CropGraph {
    replay(web, y, true)
}

fn replay(web: &PolygonalWeb, y: &[usize], geometry: bool) -> CropGraph {
    let k = web.markers.len();
    let mut g = CropGraph {
        segments: Vec::new(),
        nodes: Vec::new(),
        complete: true,
        minimal: true,
        normal: true,
    };
    let mut rooted = vec![false; k];
    for &b in y {
        rooted[web.branches[b].root] = true;
    }
    g.complete = rooted.iter().all(|&r| r);
    let mut on: Vec<Vec<Cursor>> = vec![Vec::new(); web.edges.len()];
    let mut load = vec![0usize; web.lines.len()];
    let mut entry: Vec<Point> = vec![Point::new(0.0, 0.0); web.edges.len()];
    let mut seen = HashSet::new();
    for &b in y {
        let e = web.branches[b].hops[0].0;
        if on[e].is_empty() {
            load[web.edges[e].line_id] += 1;
            entry[e] = web.edges[e].start;
        }
        on[e].push(Cursor { branch: b, hop: 0 });
    }
    let coupled =
        |on: &Vec<Vec<Cursor>>, load: &Vec<usize>, e: usize| !on[e].is_empty() && load[web.edges[e].line_id] > 1;
    let mut close = |g: &mut CropGraph, e: usize, from: Point, to: Point, start: usize| {
        if geometry && seen.insert((e, start)) {
            g.segments.push((from, to));
        }
    };
    for (idx, entry_ev) in web.log.iter().enumerate() {
        match entry_ev.event {
            WebEvent::Activate(_) => {}
            WebEvent::Switch { edge: e, index } => {
                if on[e].is_empty() {
                    continue;
                }
                let sw = web.edges[e].switches[index];
                let (movers, stayers): (Vec<Cursor>, Vec<Cursor>) = on[e]
                    .iter()
                    .partition(|c| web.branches[c.branch].hops[c.hop] == (e, Some(index)));
                if movers.is_empty() {
                    continue;
                }
                let t = sw.target;
                if sw.kind != SwitchKind::Free && load[web.edges[t].line_id] == 0 {
                    g.normal = false;
                }
                if stayers.is_empty() && coupled(&on, &load, e) {
                    g.normal = false;
                }
                if geometry {
                    if stayers.is_empty() {
                        close(&mut g, e, entry[e], sw.point, idx);
                        entry[e] = sw.point;
                    } else {
                        g.nodes.push(CropNode {
                            point: sw.point,
                            label: NodeLabel::T,
                        });
                    }
                }
                if stayers.is_empty() {
                    load[web.edges[e].line_id] -= 1;
                }
                on[e] = stayers;
                if on[t].is_empty() {
                    load[web.edges[t].line_id] += 1;
                    entry[t] = sw.point;
                }
                on[t].extend(movers.into_iter().map(|c| Cursor {
                    branch: c.branch,
                    hop: c.hop + 1,
                }));
            }
            WebEvent::Meet(m) => {
                let mt = web.meets[m];
                if on[mt.a].is_empty() || on[mt.b].is_empty() {
                    continue;
                }
                if coupled(&on, &load, mt.a) || coupled(&on, &load, mt.b) {
                    g.normal = false;
                }
                if geometry {
                    g.nodes.push(CropNode {
                        point: mt.point,
                        label: NodeLabel::V,
                    });
                }
                for e in [mt.a, mt.b] {
                    for c in &on[e] {
                        if web.branches[c.branch].hops[c.hop].1.is_some() {
                            g.minimal = false;
                        }
                    }
                    close(&mut g, e, entry[e], mt.point, idx);
                    load[web.edges[e].line_id] -= 1;
                    on[e].clear();
                }
            }
            WebEvent::End(e) => {
                if on[e].is_empty() {
                    continue;
                }
                let edge = &web.edges[e];
                match edge.cause {
                    EndCause::Terminated if coupled(&on, &load, e) => g.normal = false,
                    EndCause::Merged(h) if on[h].is_empty() => g.normal = false,
                    _ => {}
                }
                if geometry {
                    g.nodes.push(CropNode {
                        point: edge.end,
                        label: NodeLabel::I,
                    });
                }
                close(&mut g, e, entry[e], edge.end, idx);
                load[edge.line_id] -= 1;
                on[e].clear();
            }
        }
    }
    g
}

/// `sum over Y of (-1)^{|Y|-k} iota(Y)`, enumerating all subsets of branches.
pub fn crop_subset_sum(web: &PolygonalWeb) -> Result<i64> {
    let m = web.branches.len();
    if web.branch_overflow {
        return Err(Error::CapExceeded {
            size: BRANCH_CAP + 1,
            cap: SUBSET_CAP,
        });
    }
    if m > SUBSET_CAP {
        return Err(Error::CapExceeded {
            size: m,
            cap: SUBSET_CAP,
        });
    }
    let k = web.markers.len();
    let mut root_mask = vec![0u32; k];
    for (i, b) in web.branches.iter().enumerate() {
        root_mask[b.root] |= 1 << i;
    }
    let mut total = 0i64;
    let mut y = Vec::with_capacity(m);
    for mask in 1u32..(1u32 << m) {
        if root_mask.iter().any(|r| r & mask == 0) {
            continue;
        }
        y.clear();
        y.extend((0..m).filter(|i| mask >> i & 1 == 1));
        if replay(web, &y, false).indicator() {
            total += if (y.len() - k).is_multiple_of(2) { 1 } else { -1 };
        }
    }
    Ok(total)
}

type Conf = Vec<usize>;

fn coupled_in(web: &PolygonalWeb, conf: &Conf, e: usize) -> bool {
    let l = web.edges[e].line_id;
    conf.iter().any(|&c| c != e && web.edges[c].line_id == l)
}

fn without(conf: &Conf, drop: &[usize]) -> Conf {
    conf.iter().copied().filter(|c| !drop.contains(c)).collect()
}

fn with(conf: &Conf, add: usize) -> Conf {
    let mut c = conf.clone();
    if let Err(pos) = c.binary_search(&add) {
        c.insert(pos, add);
    }
    c
}

/// Offspring of one configuration under a web event, with sign multipliers.
/// An empty result annihilates the configuration.
fn step(web: &PolygonalWeb, ev: WebEvent, conf: &Conf) -> Vec<(Conf, i64)> {
    let has = |e: usize| conf.binary_search(&e).is_ok();
    match ev {
        WebEvent::Activate(_) => vec![(conf.clone(), 1)],
        WebEvent::Switch { edge: e, index } => {
            if !has(e) {
                return vec![(conf.clone(), 1)];
            }
            let sw = web.edges[e].switches[index];
            let t = sw.target;
            let lt = web.edges[t].line_id;
            let partner = sw.kind == SwitchKind::Free || conf.iter().any(|&c| c != t && web.edges[c].line_id == lt);
            if !partner || has(t) {
                return vec![(conf.clone(), 1)];
            }
            let mut out = vec![(conf.clone(), 1)];
            if !coupled_in(web, conf, e) {
                out.push((with(&without(conf, &[e]), t), 1));
            }
            out.push((with(conf, t), -1));
            out
        }
        WebEvent::Meet(m) => {
            let mt = web.meets[m];
            if !(has(mt.a) && has(mt.b)) {
                return vec![(conf.clone(), 1)];
            }
            if coupled_in(web, conf, mt.a) || coupled_in(web, conf, mt.b) {
                return Vec::new();
            }
            vec![(without(conf, &[mt.a, mt.b]), 1)]
        }
        WebEvent::End(e) => {
            if !has(e) {
                return vec![(conf.clone(), 1)];
            }
            match web.edges[e].cause {
                EndCause::Terminated if coupled_in(web, conf, e) => Vec::new(),
                EndCause::Merged(h) if !has(h) => Vec::new(),
                _ => vec![(without(conf, &[e]), 1)],
            }
        }
    }
}

fn initial(web: &PolygonalWeb) -> Conf {
    (0..web.markers.len()).collect()
}

/// Enumeration of crop graphs of minimal complete collections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphCensus {
    pub sum: i64,
    /// Normal crop graphs found.
    pub graphs: usize,
    /// Crop graphs reached by more than one collection.
    pub duplicates: usize,
}

/// Sums `(-1)^{#branchings}` over distinct normal crop graphs.
pub fn crop_graph_sum(web: &PolygonalWeb) -> Result<i64> {
    Ok(crop_graph_census(web)?.sum)
}

pub fn crop_graph_census(web: &PolygonalWeb) -> Result<GraphCensus> {
    struct Dfs<'a> {
        web: &'a PolygonalWeb,
        seen: HashSet<Vec<(usize, usize, usize)>>,
        census: GraphCensus,
        leaves: usize,
    }
    impl Dfs<'_> {
        fn go(
            &mut self,
            idx: usize,
            conf: Conf,
            open: Vec<(usize, usize)>,
            mut segs: Vec<(usize, usize, usize)>,
            sign: i64,
        ) -> Result<()> {
            if idx == self.web.log.len() {
                self.leaves += 1;
                if self.leaves > GRAPH_CAP {
                    return Err(Error::CapExceeded {
                        size: self.leaves,
                        cap: GRAPH_CAP,
                    });
                }
                debug_assert!(conf.is_empty());
                segs.sort_unstable();
                if self.seen.insert(segs) {
                    self.census.graphs += 1;
                    self.census.sum += sign;
                } else {
                    self.census.duplicates += 1;
                }
                return Ok(());
            }
            let outs = step(self.web, self.web.log[idx].event, &conf);
            let last = outs.len();
            for (n, (next, mult)) in outs.into_iter().enumerate() {
                let mut open2 = Vec::with_capacity(next.len());
                let mut segs2 = if n + 1 == last {
                    std::mem::take(&mut segs)
                } else {
                    segs.clone()
                };
                for &(e, since) in &open {
                    if next.binary_search(&e).is_ok() {
                        open2.push((e, since));
                    } else {
                        segs2.push((e, since, idx));
                    }
                }
                for &e in &next {
                    if conf.binary_search(&e).is_err() {
                        open2.push((e, idx));
                    }
                }
                self.go(idx + 1, next, open2, segs2, sign * mult)?;
            }
            Ok(())
        }
    }
    let conf = initial(web);
    let open = conf.iter().map(|&e| (e, usize::MAX)).collect();
    let mut dfs = Dfs {
        web,
        seen: HashSet::new(),
        census: GraphCensus {
            sum: 0,
            graphs: 0,
            duplicates: 0,
        },
        leaves: 0,
    };
    dfs.go(0, conf, open, Vec::new(), 1)?;
    Ok(dfs.census)
}

/// Signed count of the terminal configurations of the edge-marker dynamics
/// driven by the web's event stream. Identical configurations are merged.
pub fn em_signed_count(web: &PolygonalWeb) -> i64 {
    let mut confs: BTreeMap<Conf, i64> = BTreeMap::new();
    confs.insert(initial(web), 1);
    for entry in &web.log {
        let mut next: BTreeMap<Conf, i64> = BTreeMap::new();
        for (conf, w) in &confs {
            for (c, mult) in step(web, entry.event, conf) {
                *next.entry(c).or_insert(0) += w * mult;
            }
        }
        next.retain(|_, w| *w != 0);
        confs = next;
    }
    debug_assert!(confs.keys().all(|c| c.is_empty()));
    confs.get(&Vec::new()).copied().unwrap_or(0)
}

/// The crop of a web.
pub fn crop(web: &PolygonalWeb) -> i64 {
    em_signed_count(web)
}

/// Runs the edge-marker dynamics for a freshly drawn web and returns the
/// signed number of terminal configurations together with the web.
pub fn signed_marker_terminal<R: Rng + ?Sized>(
    act: &ActivityMeasure,
    fam: &WindowFamily,
    mc: &MarkerConfig,
    stop: StopRule,
    rng: &mut R,
) -> Result<(i64, PolygonalWeb)> {
    let web = sample_web(act, fam, mc, stop, rng)?;
    Ok((em_signed_count(&web), web))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexDomain, Line, WindowKind};
    use crate::markers::Marker;
    use crate::web::zero_activity_web;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family() -> WindowFamily {
        WindowFamily::new(
            ConvexDomain::unit_disc(),
            Point::new(0.13, -0.21),
            WindowKind::Homothety,
        )
        .unwrap()
    }

    #[test]
    fn single_branch_crops_to_one() {
        let mc = MarkerConfig::new(vec![Marker::new(Point::new(0.3, 0.2), 0.7)]).unwrap();
        let w = zero_activity_web(&family(), &mc, StopRule::AtTangency).unwrap();
        assert_eq!(crop_subset_sum(&w).unwrap(), 1);
        assert_eq!(crop_graph_sum(&w).unwrap(), 1);
        assert_eq!(em_signed_count(&w), 1);
        let g = build_crop_graph(&w, &[0]);
        assert!(g.indicator());
        assert_eq!(g.segments.len(), 1);
    }

    #[test]
    fn coupled_pair_crops_to_one() {
        let l = Line::through(Point::new(-0.4, 0.1), 0.2);
        let c = l.coord(Point::new(-0.4, 0.1));
        let mc = MarkerConfig::new(vec![
            Marker {
                line: l,
                point: l.at(c),
            },
            Marker {
                line: l,
                point: l.at(c + 0.7),
            },
        ])
        .unwrap();
        let w = zero_activity_web(&family(), &mc, StopRule::AtTangency).unwrap();
        assert_eq!(em_signed_count(&w), 1);
        assert_eq!(crop_subset_sum(&w).unwrap(), 1);
    }

    #[test]
    fn three_forms_agree_on_random_webs() {
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let mc = MarkerConfig::new(vec![
            Marker::new(Point::new(0.1, 0.1), 0.4),
            Marker::new(Point::new(-0.2, 0.3), 2.0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for stop in [StopRule::AtTangency, StopRule::Immediate] {
            for _ in 0..100 {
                let w = sample_web(&act, &family(), &mc, stop, &mut rng).unwrap();
                let em = em_signed_count(&w);
                let census = crop_graph_census(&w).unwrap();
                assert_eq!(census.duplicates, 0);
                assert_eq!(census.sum, em);
                if let Ok(s) = crop_subset_sum(&w) {
                    assert_eq!(s, em);
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }
}
