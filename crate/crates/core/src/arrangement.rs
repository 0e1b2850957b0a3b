//! Exact enumeration of admissible configurations carried by a finite line
//! set: each used line carries one interval whose ends are boundary points or
//! crossings with other lines.

use crate::activity::ActivityMeasure;
use crate::error::{Error, Result};
use crate::field::{FieldEdge, Lineage};
use crate::geometry::{intersection_point, ConvexDomain, Line, Point, Segment, EPS_GEO};
use crate::markers::MarkerConfig;

/// Largest line count accepted by [`exact_partition_sum`].
pub const PARTITION_CAP: usize = 8;
/// Largest line count accepted by [`enumerate_admissible`] and
/// [`count_marked`].
pub const ENUMERATION_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Stop {
    Boundary,
    Crossing(usize),
}

#[derive(Clone, Debug)]
struct Carrier {
    line: Line,
    /// Candidate interval ends sorted by coordinate along the line.
    stops: Vec<(f64, Stop)>,
    /// Index into `stops` of the crossing with each other line, if inside.
    crossing_at: Vec<Option<usize>>,
}

/// A finite line set cut by a convex window.
#[derive(Clone, Debug)]
pub struct LineArrangement {
    carriers: Vec<Carrier>,
    domain: ConvexDomain,
}

impl LineArrangement {
    pub fn new(lines: &[Line], dom: &ConvexDomain) -> Result<LineArrangement> {
        let n = lines.len();
        let mut crossings = vec![vec![None; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if lines[i].approx_eq(&lines[j]) {
                    return Err(Error::InvalidGeometry(format!("lines {i} and {j} coincide")));
                }
                if let Some(p) = intersection_point(&lines[i], &lines[j]) {
                    if dom.depth(p) > EPS_GEO {
                        crossings[i][j] = Some(p);
                        crossings[j][i] = Some(p);
                    }
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let Some(p) = crossings[i][j] else { continue };
                for (k, l) in lines.iter().enumerate() {
                    if k != i && k != j && l.contains(p, EPS_GEO) {
                        return Err(Error::InvalidGeometry(format!("lines {i}, {j}, {k} are concurrent")));
                    }
                }
            }
        }
        let mut carriers = Vec::with_capacity(n);
        for (i, l) in lines.iter().enumerate() {
            let seg = dom.proper_chord(l).ok_or(Error::LineMisses)?;
            let mut stops = vec![(l.coord(seg.a), Stop::Boundary), (l.coord(seg.b), Stop::Boundary)];
            for (j, c) in crossings[i].iter().enumerate() {
                if let Some(p) = c {
                    stops.push((l.coord(*p), Stop::Crossing(j)));
                }
            }
            stops.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in stops.windows(2) {
                if w[1].0 - w[0].0 <= EPS_GEO {
                    return Err(Error::InvalidGeometry(format!(
                        "line {i} has an atomic segment shorter than tolerance"
                    )));
                }
            }
            let mut crossing_at = vec![None; n];
            for (k, s) in stops.iter().enumerate() {
                if let Stop::Crossing(j) = s.1 {
                    crossing_at[j] = Some(k);
                }
            }
            carriers.push(Carrier {
                line: *l,
                stops,
                crossing_at,
            });
        }
        Ok(LineArrangement {
            carriers,
            domain: dom.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.carriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carriers.is_empty()
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    fn point(&self, i: usize, k: usize) -> Point {
        self.carriers[i].line.at(self.carriers[i].stops[k].0)
    }

    fn segment(&self, i: usize, (a, b): (usize, usize)) -> Segment {
        Segment {
            a: self.point(i, a),
            b: self.point(i, b),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Out,
    Inner,
    End,
}

fn state(choice: Option<(usize, usize)>, at: Option<usize>) -> State {
    match (choice, at) {
        (Some((a, b)), Some(c)) => {
            if c == a || c == b {
                State::End
            } else if a < c && c < b {
                State::Inner
            } else {
                State::Out
            }
        }
        _ => State::Out,
    }
}

fn compatible(s: State, t: State) -> bool {
    matches!(
        (s, t),
        (State::Out, State::Out) | (State::Out, State::Inner) | (State::Inner, State::Out) | (State::End, State::End)
    )
}

/// Depth-first search over per-line interval choices. `allowed[i]` filters
/// the choices of line `i`; `None` stands for leaving the line unused.
fn search<F>(arr: &LineArrangement, allowed: &[Vec<Option<(usize, usize)>>], visit: &mut F)
where
    F: FnMut(&[Option<(usize, usize)>]),
{
    fn rec<F: FnMut(&[Option<(usize, usize)>])>(
        arr: &LineArrangement,
        allowed: &[Vec<Option<(usize, usize)>>],
        chosen: &mut Vec<Option<(usize, usize)>>,
        visit: &mut F,
    ) {
        let i = chosen.len();
        if i == arr.len() {
            visit(chosen);
            return;
        }
        'choice: for &c in &allowed[i] {
            for (j, &cj) in chosen.iter().enumerate() {
                let si = state(c, arr.carriers[i].crossing_at[j]);
                let sj = state(cj, arr.carriers[j].crossing_at[i]);
                if !compatible(si, sj) {
                    continue 'choice;
                }
            }
            chosen.push(c);
            rec(arr, allowed, chosen, visit);
            chosen.pop();
        }
    }
    let mut chosen = Vec::with_capacity(arr.len());
    rec(arr, allowed, &mut chosen, visit);
}

fn all_intervals(c: &Carrier) -> Vec<(usize, usize)> {
    let n = c.stops.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            out.push((a, b));
        }
    }
    out
}

/// One admissible configuration: an optional interval per input line.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    pub intervals: Vec<Option<Segment>>,
    pub hamiltonian: f64,
}

impl Configuration {
    pub fn used_lines(&self) -> Vec<usize> {
        self.intervals
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|_| i))
            .collect()
    }

    pub fn edges(&self, lines: &[Line]) -> Vec<FieldEdge> {
        self.intervals
            .iter()
            .zip(lines)
            .filter_map(|(s, l)| {
                s.map(|segment| FieldEdge {
                    segment,
                    line: *l,
                    lineage: Lineage::LineBirth,
                })
            })
            .collect()
    }
}

fn hamiltonian(arr: &LineArrangement, chosen: &[Option<(usize, usize)>], act: Option<&ActivityMeasure>) -> Result<f64> {
    let Some(act) = act else { return Ok(0.0) };
    let mut h = 0.0;
    for (i, c) in chosen.iter().enumerate() {
        if let Some(ab) = c {
            h += act.measure_hit(&arr.segment(i, *ab))?;
        }
    }
    Ok(h)
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::CapExceeded { size: n, cap })
    } else {
        Ok(())
    }
}

/// All admissible configurations on subsets of `lines`, the empty one
/// included. The Hamiltonian is evaluated under `act` when given.
pub fn enumerate_admissible(
    lines: &[Line],
    dom: &ConvexDomain,
    act: Option<&ActivityMeasure>,
) -> Result<Vec<Configuration>> {
    check_cap(lines.len(), ENUMERATION_CAP)?;
    let arr = LineArrangement::new(lines, dom)?;
    let allowed: Vec<Vec<Option<(usize, usize)>>> = arr
        .carriers
        .iter()
        .map(|c| {
            std::iter::once(None)
                .chain(all_intervals(c).into_iter().map(Some))
                .collect()
        })
        .collect();
    let mut raw = Vec::new();
    search(&arr, &allowed, &mut |ch| raw.push(ch.to_vec()));
    raw.into_iter()
        .map(|ch| {
            Ok(Configuration {
                hamiltonian: hamiltonian(&arr, &ch, act)?,
                intervals: ch
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.map(|ab| arr.segment(i, ab)))
                    .collect(),
            })
        })
        .collect()
}

/// Sum of `exp(-L(gamma))` over admissible configurations using every line,
/// optionally constraining intervals to cover given points (`cover[i]` lists
/// coordinates along line `i` that its interval must contain).
pub(crate) fn constrained_sum(
    arr: &LineArrangement,
    cover: &[Vec<f64>],
    act: Option<&ActivityMeasure>,
) -> Result<(f64, usize)> {
    let allowed: Vec<Vec<Option<(usize, usize)>>> = arr
        .carriers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            all_intervals(c)
                .into_iter()
                .filter(|&(a, b)| cover[i].iter().all(|&x| c.stops[a].0 < x && x < c.stops[b].0))
                .map(Some)
                .collect()
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut err = None;
    search(arr, &allowed, &mut |ch| {
        count += 1;
        match hamiltonian(arr, ch, act) {
            Ok(h) => total += (-h).exp(),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok((total, count)),
    }
}

/// Partition sum over admissible configurations in which every given line
/// carries one interval.
pub fn exact_partition_sum(lines: &[Line], dom: &ConvexDomain, act: &ActivityMeasure) -> Result<f64> {
    check_cap(lines.len(), PARTITION_CAP)?;
    let arr = LineArrangement::new(lines, dom)?;
    let cover = vec![Vec::new(); lines.len()];
    Ok(constrained_sum(&arr, &cover, Some(act))?.0)
}

/// Coordinates of each marker point along its marker line, grouped by the
/// distinct lines of the configuration.
pub(crate) fn marker_cover(mc: &MarkerConfig) -> Vec<Vec<f64>> {
    let mut cover = vec![Vec::new(); mc.lines().len()];
    for (i, m) in mc.markers().iter().enumerate() {
        let k = mc.line_index(i);
        cover[k].push(mc.lines()[k].coord(m.point));
    }
    cover
}

/// Number of admissible configurations on the marker lines in which every
/// edge carries a marker and every marker is covered.
pub fn count_marked(mc: &MarkerConfig, dom: &ConvexDomain) -> Result<u64> {
    check_cap(mc.lines().len(), ENUMERATION_CAP)?;
    mc.check_inside(dom)?;
    let arr = LineArrangement::new(mc.lines(), dom)?;
    Ok(constrained_sum(&arr, &marker_cover(mc), None)?.1 as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::field::check_edges;
    use crate::markers::Marker;
    use std::f64::consts::PI;

    fn square() -> ConvexDomain {
        ConvexDomain::square(0.0, 0.0, 1.0)
    }

    /// Every interval choice per line, checked only by geometry.
    fn brute_force(lines: &[Line], dom: &ConvexDomain, require_all: bool) -> usize {
        let arr = LineArrangement::new(lines, dom).unwrap();
        let options: Vec<Vec<Option<(usize, usize)>>> = arr
            .carriers
            .iter()
            .map(|c| {
                let mut v: Vec<_> = all_intervals(c).into_iter().map(Some).collect();
                if !require_all {
                    v.push(None);
                }
                v
            })
            .collect();
        let mut count = 0;
        let mut idx = vec![0usize; lines.len()];
        loop {
            let edges: Vec<FieldEdge> = idx
                .iter()
                .enumerate()
                .filter_map(|(i, &k)| {
                    options[i][k].map(|ab| FieldEdge {
                        segment: arr.segment(i, ab),
                        line: lines[i],
                        lineage: Lineage::LineBirth,
                    })
                })
                .collect();
            if check_edges(dom, &edges).ok {
                count += 1;
            }
            let mut d = 0;
            loop {
                if d == idx.len() {
                    return count;
                }
                idx[d] += 1;
                if idx[d] < options[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    fn two_crossing() -> Vec<Line> {
        vec![
            Line::through(Point::new(0.5, 0.4), 0.2),
            Line::through(Point::new(0.5, 0.4), 1.7),
        ]
    }

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_admissible(&[], &square(), None).unwrap().len(), 1);
        let one = [Line::through(Point::new(0.5, 0.5), 0.3)];
        assert_eq!(enumerate_admissible(&one, &square(), None).unwrap().len(), 2);
        assert_eq!(enumerate_admissible(&two_crossing(), &square(), None).unwrap().len(), 7);
        assert_eq!(brute_force(&two_crossing(), &square(), false), 7);
    }

    #[test]
    fn two_crossing_lines_partition_has_four_terms() {
        let act = ActivityMeasure::homogeneous(0.0).unwrap();
        let z = exact_partition_sum(&two_crossing(), &square(), &act).unwrap();
        assert_eq!(z, 4.0);
        assert_eq!(brute_force(&two_crossing(), &square(), true), 4);
    }

    #[test]
    fn single_line_partition() {
        let act = ActivityMeasure::homogeneous(1.3).unwrap();
        let l = Line::through(Point::new(0.5, 0.5), 0.3);
        let c = square().proper_chord(&l).unwrap().length();
        let z = exact_partition_sum(&[l], &square(), &act).unwrap();
        assert!((z - (-2.0 * 1.3 * c).exp()).abs() < 1e-12);
        assert_eq!(exact_partition_sum(&[], &square(), &act).unwrap(), 1.0);
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let n = rng.random_range(1..=4);
            let lines: Vec<Line> = (0..n)
                .map(|_| {
                    Line::through(
                        Point::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)),
                        rng.random::<f64>() * PI,
                    )
                })
                .collect();
            let fast = enumerate_admissible(&lines, &square(), None).unwrap();
            assert_eq!(fast.len(), brute_force(&lines, &square(), false));
            for c in &fast {
                assert!(check_edges(&square(), &c.edges(&lines)).ok);
            }
            let arr = LineArrangement::new(&lines, &square()).unwrap();
            let all = constrained_sum(&arr, &vec![Vec::new(); n], None).unwrap().1;
            assert_eq!(all, brute_force(&lines, &square(), true));
        }
    }

    #[test]
    fn count_marked_examples() {
        let dom = ConvexDomain::unit_disc();
        let one = MarkerConfig::new(vec![Marker::new(Point::new(0.1, 0.2), 0.4)]).unwrap();
        assert_eq!(count_marked(&one, &dom).unwrap(), 1);
        let two = MarkerConfig::new(vec![
            Marker::new(Point::new(-0.2, 0.0), 0.3),
            Marker::new(Point::new(0.2, 0.0), 2.0),
        ])
        .unwrap();
        assert_eq!(count_marked(&two, &dom).unwrap(), 1);
        let small = ConvexDomain::disc(Point::new(0.0, 0.0), 0.3).unwrap();
        assert_eq!(count_marked(&two, &small).unwrap(), 1);
    }

    #[test]
    fn triangle_count_is_one() {
        // three lines bounding a triangle, markers at the side midpoints
        let a = Point::new(-0.3, -0.2);
        let b = Point::new(0.35, -0.15);
        let c = Point::new(0.0, 0.4);
        let side = |p: Point, q: Point| Marker {
            line: Line::through_points(p, q).unwrap(),
            point: p.lerp(q, 0.5),
        };
        let mc = MarkerConfig::new(vec![side(a, b), side(b, c), side(c, a)]).unwrap();
        assert_eq!(count_marked(&mc, &ConvexDomain::unit_disc()).unwrap(), 1);
        assert_eq!(count_marked(&mc, &ConvexDomain::square(-0.6, -0.6, 1.3)).unwrap(), 1);
    }
}
