//! Edge markers `(l_i, x_i)` and their position classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersection_point, ConvexDomain, Line, Point, EPS_GEO};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub line: Line,
    pub point: Point,
}

impl Marker {
    /// Marker at `point` on the line through it with angle `phi`.
    pub fn new(point: Point, phi: f64) -> Marker {
        Marker {
            line: Line::through(point, phi),
            point,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Position {
    /// Some marker point lies on a foreign marker line.
    pub singular: bool,
    /// Some marker lines coincide.
    pub degenerate: bool,
}

impl Position {
    pub fn is_general(&self) -> bool {
        !self.singular && !self.degenerate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerConfig {
    markers: Vec<Marker>,
    line_of: Vec<usize>,
    lines: Vec<Line>,
    position: Position,
}

impl MarkerConfig {
    pub fn new(markers: Vec<Marker>) -> Result<MarkerConfig> {
        let mut lines: Vec<Line> = Vec::new();
        let mut line_of = Vec::with_capacity(markers.len());
        for (i, m) in markers.iter().enumerate() {
            if !m.line.contains(m.point, EPS_GEO) {
                return Err(Error::InvalidMarkers(format!("marker {i} is off its line")));
            }
            for (j, o) in markers[..i].iter().enumerate() {
                if o.point.dist(m.point) <= EPS_GEO && o.line.approx_eq(&m.line) {
                    return Err(Error::InvalidMarkers(format!("markers {j} and {i} repeat")));
                }
            }
            match lines.iter().position(|l| l.approx_eq(&m.line)) {
                Some(k) => line_of.push(k),
                None => {
                    line_of.push(lines.len());
                    lines.push(m.line);
                }
            }
        }
        for a in 0..lines.len() {
            for b in a + 1..lines.len() {
                let Some(p) = intersection_point(&lines[a], &lines[b]) else {
                    continue;
                };
                for (c, lc) in lines.iter().enumerate().skip(b + 1) {
                    if lc.contains(p, EPS_GEO) {
                        return Err(Error::InvalidMarkers(format!(
                            "marker lines {a}, {b}, {c} are concurrent"
                        )));
                    }
                }
            }
        }
        let degenerate = lines.len() < markers.len();
        let singular = markers.iter().enumerate().any(|(i, m)| {
            lines
                .iter()
                .enumerate()
                .any(|(k, l)| k != line_of[i] && l.contains(m.point, EPS_GEO))
        });
        Ok(MarkerConfig {
            markers,
            line_of,
            lines,
            position: Position { singular, degenerate },
        })
    }

    pub fn empty() -> MarkerConfig {
        MarkerConfig::new(Vec::new()).expect("empty config is valid")
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// Distinct marker lines.
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Index into [`MarkerConfig::lines`] of marker `i`'s line.
    pub fn line_index(&self, i: usize) -> usize {
        self.line_of[i]
    }

    pub fn position(&self) -> Position {
        self.position
    }

    /// Pairs of markers sharing a line.
    pub fn couplings(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.markers.len() {
            for j in i + 1..self.markers.len() {
                if self.line_of[i] == self.line_of[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn check_inside(&self, dom: &ConvexDomain) -> Result<()> {
        for (i, m) in self.markers.iter().enumerate() {
            if !dom.contains(m.point, EPS_GEO) {
                return Err(Error::InvalidMarkers(format!("marker {i} lies outside the domain")));
            }
        }
        Ok(())
    }
}
