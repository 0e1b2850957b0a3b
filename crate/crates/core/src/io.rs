//! Run configuration, seeding, reports and the text interchange formats.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activity::ActivityMeasure;
use crate::crop::{CropGraph, NodeLabel};
use crate::error::{Error, Result};
use crate::estimators::PhiMethod;
use crate::field::{FieldEdge, FieldSample, FieldStats, Lineage};
use crate::geometry::{ConvexDomain, Line, Point, Segment, WindowFamily, WindowKind};
use crate::markers::{Marker, MarkerConfig};
use crate::web::{
    Branch, EdgeOrigin, EndCause, LogEntry, Meet, PolygonalWeb, StopRule, Switch, SwitchKind, WebEdge, WebEvent,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    /// Axis-parallel square with lower-left corner `corner`.
    Square {
        corner: [f64; 2],
        side: f64,
    },
    /// Convex polygon, vertices in either orientation.
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default = "homothety")]
    pub kind: WindowKind,
    /// Defaults to the centre of the domain.
    pub origin: Option<[f64; 2]>,
}

impl Default for WindowSpec {
    fn default() -> WindowSpec {
        WindowSpec {
            kind: WindowKind::Homothety,
            origin: None,
        }
    }
}

fn homothety() -> WindowKind {
    WindowKind::Homothety
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActivitySpec {
    Homogeneous {
        lambda: f64,
    },
    /// `lambda (1 + a cos 2 phi)`.
    Anisotropic {
        lambda: f64,
        a: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSpec {
    pub point: [f64; 2],
    /// Line angle in radians.
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub window: WindowSpec,
    pub activity: ActivitySpec,
    #[serde(default)]
    pub markers: Vec<MarkerSpec>,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Field replicas for duality runs; defaults to `replicas`.
    pub field_replicas: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps_x: f64,
    #[serde(default = "default_eps")]
    pub eps_phi: f64,
    #[serde(default)]
    pub phi_method: PhiMethod,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicas() -> usize {
    1000
}

fn default_eps() -> f64 {
    0.02
}

fn unknown_key(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

/// Everything a run needs, validated.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub domain: ConvexDomain,
    pub family: WindowFamily,
    pub activity: ActivityMeasure,
    pub markers: MarkerConfig,
}

fn pt(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

impl DomainSpec {
    pub fn build(&self) -> Result<ConvexDomain> {
        match self {
            DomainSpec::Disc { center, radius } => ConvexDomain::disc(pt(*center), *radius),
            DomainSpec::Square { corner, side } => {
                if !(*side > 0.0) {
                    return Err(Error::Config(format!("square side must be positive, got {side}")));
                }
                Ok(ConvexDomain::square(corner[0], corner[1], *side))
            }
            DomainSpec::Polygon { vertices } => ConvexDomain::polygon(vertices.iter().map(|v| pt(*v)).collect()),
        }
    }
}

impl ActivitySpec {
    pub fn build(&self) -> Result<ActivityMeasure> {
        match *self {
            ActivitySpec::Homogeneous { lambda } => ActivityMeasure::homogeneous(lambda),
            ActivitySpec::Anisotropic { lambda, a } => ActivityMeasure::anisotropic(lambda, a),
        }
    }
}

impl RunConfig {
    /// Parses TOML text; errors carry the offending line.
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| {
            let line_of = |at: usize| text[..at.min(text.len())].matches('\n').count() + 1;
            let mut line = e.span().map(|s| line_of(s.start)).unwrap_or(0);
            // tagged tables report the table itself; point at the key instead
            if let (Some(span), Some(key)) = (e.span(), unknown_key(e.message())) {
                let mut at = span.start.min(text.len());
                for (i, l) in text[at..].split_inclusive('\n').enumerate() {
                    let t = l.trim_start();
                    if i > 0 && t.starts_with('[') {
                        break;
                    }
                    if t.strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')) {
                        line = line_of(at);
                        break;
                    }
                    at += l.len();
                }
            }
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((RunConfig::parse(&text)?, text))
    }

    /// Builds and checks every object before any sampling.
    pub fn scenario(&self) -> Result<Scenario> {
        let domain = self.domain.build()?;
        let origin = self.window.origin.map(pt).unwrap_or_else(|| domain.center());
        let family = WindowFamily::new(domain.clone(), origin, self.window.kind)?;
        let activity = self.activity.build()?;
        let markers = MarkerConfig::new(self.markers.iter().map(|m| Marker::new(pt(m.point), m.phi)).collect())?;
        markers.check_inside(&domain)?;
        if self.replicas < 2 {
            return Err(Error::Config("replicas must be at least 2".into()));
        }
        for (name, v) in [("eps_x", self.eps_x), ("eps_phi", self.eps_phi)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Scenario {
            domain,
            family,
            activity,
            markers,
        })
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a hash of a stream name.
pub fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of replica `index` in stream `name` under `master`.
pub fn derive_seed(master: u64, name: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream_id(name)) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn replica_rng(master: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, name, index))
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub const CSV_HEADER: &str = "subcommand,k,lambda,estimate,se,n,eps_x,eps_phi,pass,seed,config_hash";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub subcommand: String,
    pub k: usize,
    pub lambda: Option<f64>,
    pub estimate: f64,
    pub se: f64,
    pub n: usize,
    pub eps_x: Option<f64>,
    pub eps_phi: Option<f64>,
    pub pass: Option<bool>,
    pub seed: u64,
    pub config_hash: String,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.subcommand,
            self.k,
            opt(self.lambda),
            num(self.estimate),
            num(self.se),
            self.n,
            opt(self.eps_x),
            opt(self.eps_phi),
            opt(self.pass),
            self.seed,
            self.config_hash
        )
    }
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "subcommand = {}", self.subcommand);
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "polyweb_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "seed_scheme = splitmix64(splitmix64(master ^ fnv1a(stream)) ^ splitmix64(index + 0x632be59bd9b4e019)) -> chacha8");
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

struct Tokens<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.it.next().ok_or_else(|| self.err("unexpected end of record"))
    }

    fn f(&mut self) -> Result<f64> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("bad number {w:?}")))
    }

    fn u(&mut self) -> Result<usize> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("bad index {w:?}")))
    }

    fn point(&mut self) -> Result<Point> {
        Ok(Point::new(self.f()?, self.f()?))
    }

    fn done(&mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(w) => Err(self.err(format!("trailing token {w:?}"))),
        }
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str, Tokens<'_>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let mut it = l.split_whitespace();
        let tag = it.next()?;
        Some((i + 1, tag, Tokens { line: i + 1, it }))
    })
}

fn write_domain(s: &mut String, d: &ConvexDomain) {
    match d {
        ConvexDomain::Disc(c) => {
            let _ = writeln!(
                s,
                "domain disc {} {} {}",
                num(c.center.x),
                num(c.center.y),
                num(c.radius)
            );
        }
        ConvexDomain::Polygon(p) => {
            let _ = write!(s, "domain polygon {}", p.vertices().len());
            for v in p.vertices() {
                let _ = write!(s, " {} {}", num(v.x), num(v.y));
            }
            s.push('\n');
        }
        ConvexDomain::Clipped { .. } => unreachable!("samples live on disc or polygon domains"),
    }
}

fn read_domain(t: &mut Tokens) -> Result<ConvexDomain> {
    match t.word()? {
        "disc" => {
            let c = t.point()?;
            ConvexDomain::disc(c, t.f()?)
        }
        "polygon" => {
            let n = t.u()?;
            let vs = (0..n).map(|_| t.point()).collect::<Result<Vec<_>>>()?;
            ConvexDomain::polygon(vs)
        }
        w => Err(t.err(format!("unknown domain {w:?}"))),
    }
}

fn kind_name(k: WindowKind) -> &'static str {
    match k {
        WindowKind::Homothety => "homothety",
        WindowKind::ConcentricDisc => "concentric-disc",
    }
}

fn lineage_name(l: Lineage) -> &'static str {
    match l {
        Lineage::LineBirth => "line-birth",
        Lineage::VertexBirth => "vertex-birth",
        Lineage::DirectionalUpdate => "update",
    }
}

pub fn write_field(f: &FieldSample) -> String {
    let mut s = String::from("polyweb-field 1\n");
    let _ = writeln!(s, "seed {}", f.seed);
    write_domain(&mut s, &f.domain);
    let o = f.family.origin();
    let _ = writeln!(s, "family {} {} {}", kind_name(f.family.kind()), num(o.x), num(o.y));
    let st = &f.stats;
    let _ = writeln!(
        s,
        "stats {} {} {} {} {} {}",
        st.line_births, st.vertex_births, st.turns, st.collisions, st.boundary_hits, st.degenerate_resamples
    );
    for e in &f.edges {
        let _ = writeln!(
            s,
            "edge {} {} {} {} {} {} {}",
            lineage_name(e.lineage),
            num(e.segment.a.x),
            num(e.segment.a.y),
            num(e.segment.b.x),
            num(e.segment.b.y),
            num(e.line.phi),
            num(e.line.rho)
        );
    }
    s
}

fn expect_header(text: &str, want: &str) -> Result<()> {
    match text.lines().next() {
        Some(h) if h.trim() == want => Ok(()),
        _ => Err(Error::Parse {
            line: 1,
            message: format!("expected header {want:?}"),
        }),
    }
}

pub fn parse_field(text: &str) -> Result<FieldSample> {
    expect_header(text, "polyweb-field 1")?;
    let (mut seed, mut domain, mut family, mut stats) = (0u64, None, None, FieldStats::default());
    let mut edges = Vec::new();
    for (line, tag, mut t) in records(text).skip(1) {
        match tag {
            "seed" => seed = t.word()?.parse().map_err(|_| t.err("bad seed"))?,
            "domain" => domain = Some(read_domain(&mut t)?),
            "family" => {
                let kind = match t.word()? {
                    "homothety" => WindowKind::Homothety,
                    "concentric-disc" => WindowKind::ConcentricDisc,
                    w => return Err(t.err(format!("unknown family {w:?}"))),
                };
                let o = t.point()?;
                let d = domain.clone().ok_or_else(|| t.err("family before domain"))?;
                family = Some(WindowFamily::new(d, o, kind)?);
            }
            "stats" => {
                stats = FieldStats {
                    line_births: t.u()?,
                    vertex_births: t.u()?,
                    turns: t.u()?,
                    collisions: t.u()?,
                    boundary_hits: t.u()?,
                    degenerate_resamples: t.u()?,
                }
            }
            "edge" => {
                let lineage = match t.word()? {
                    "line-birth" => Lineage::LineBirth,
                    "vertex-birth" => Lineage::VertexBirth,
                    "update" => Lineage::DirectionalUpdate,
                    w => return Err(t.err(format!("unknown lineage {w:?}"))),
                };
                let (a, b) = (t.point()?, t.point()?);
                let line = Line {
                    phi: t.f()?,
                    rho: t.f()?,
                };
                edges.push(FieldEdge {
                    segment: Segment { a, b },
                    line,
                    lineage,
                });
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown record {tag:?}"),
                })
            }
        }
        t.done()?;
    }
    let family = family.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing family record".into(),
    })?;
    let mut f = FieldSample::from_edges(family, edges, seed);
    f.stats = stats;
    Ok(f)
}

fn origin_tok(o: EdgeOrigin) -> String {
    match o {
        EdgeOrigin::Germ(i) => format!("germ:{i}"),
        EdgeOrigin::Branch { parent } => format!("branch:{parent}"),
        EdgeOrigin::Forced { parent, forcer } => format!("forced:{parent}:{forcer}"),
    }
}

fn cause_tok(c: EndCause) -> String {
    match c {
        EndCause::Terminated => "terminated".into(),
        EndCause::Tangency => "tangency".into(),
        EndCause::Separated => "separated".into(),
        EndCause::Frozen => "frozen".into(),
        EndCause::Merged(g) => format!("merged:{g}"),
    }
}

fn kind_tok(k: SwitchKind) -> &'static str {
    match k {
        SwitchKind::Free => "free",
        SwitchKind::Forced => "forced",
        SwitchKind::Cross => "cross",
    }
}

fn stop_tok(s: StopRule) -> &'static str {
    match s {
        StopRule::AtTangency => "at-tangency",
        StopRule::Immediate => "immediate",
    }
}

pub fn write_web(w: &PolygonalWeb) -> String {
    let mut s = String::from("polyweb-web 1\n");
    let _ = writeln!(s, "seed {}", w.seed);
    let _ = writeln!(s, "stop-rule {}", stop_tok(w.stop_rule));
    write_domain(&mut s, &w.domain);
    for m in w.markers.markers() {
        let _ = writeln!(
            s,
            "marker {} {} {} {}",
            num(m.point.x),
            num(m.point.y),
            num(m.line.phi),
            num(m.line.rho)
        );
    }
    for l in &w.lines {
        let _ = writeln!(s, "line {} {}", num(l.phi), num(l.rho));
    }
    for e in &w.edges {
        let _ = writeln!(
            s,
            "edge {} {} {} {} {} {} {} {} {} {}",
            e.line_id,
            if e.side > 0.0 { "+" } else { "-" },
            origin_tok(e.origin),
            num(e.start.x),
            num(e.start.y),
            num(e.start_time),
            num(e.end.x),
            num(e.end.y),
            num(e.end_time),
            cause_tok(e.cause)
        );
        for sw in &e.switches {
            let _ = writeln!(
                s,
                "switch {} {} {} {} {}",
                num(sw.time),
                num(sw.point.x),
                num(sw.point.y),
                sw.target,
                kind_tok(sw.kind)
            );
        }
    }
    for m in &w.meets {
        let _ = writeln!(
            s,
            "meet {} {} {} {} {}",
            num(m.time),
            num(m.point.x),
            num(m.point.y),
            m.a,
            m.b
        );
    }
    for l in &w.log {
        let ev = match l.event {
            WebEvent::Activate(g) => format!("activate {g}"),
            WebEvent::Switch { edge, index } => format!("switch {edge} {index}"),
            WebEvent::Meet(m) => format!("meet {m}"),
            WebEvent::End(e) => format!("end {e}"),
        };
        let _ = writeln!(s, "log {} {}", num(l.time), ev);
    }
    if w.branch_overflow {
        s.push_str("branch-overflow\n");
    }
    for b in &w.branches {
        let _ = write!(
            s,
            "branch {} {} {} {}",
            b.root,
            cause_tok(b.cause),
            num(b.terminal.x),
            num(b.terminal.y)
        );
        for &(e, sw) in &b.hops {
            match sw {
                Some(i) => {
                    let _ = write!(s, " {e}:{i}");
                }
                None => {
                    let _ = write!(s, " {e}");
                }
            }
        }
        s.push('\n');
    }
    s
}

fn parse_indices(t: &Tokens, w: &str, n: usize) -> Result<Vec<usize>> {
    let v: Vec<usize> = w
        .split(':')
        .skip(1)
        .map(|x| x.parse().map_err(|_| t.err(format!("bad index in {w:?}"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(t.err(format!("malformed token {w:?}")));
    }
    Ok(v)
}

fn read_cause(t: &Tokens, w: &str) -> Result<EndCause> {
    Ok(match w.split(':').next().unwrap_or("") {
        "terminated" => EndCause::Terminated,
        "tangency" => EndCause::Tangency,
        "separated" => EndCause::Separated,
        "frozen" => EndCause::Frozen,
        "merged" => EndCause::Merged(parse_indices(t, w, 1)?[0]),
        _ => return Err(t.err(format!("unknown cause {w:?}"))),
    })
}

pub fn parse_web(text: &str) -> Result<PolygonalWeb> {
    expect_header(text, "polyweb-web 1")?;
    let mut seed = 0u64;
    let mut stop = StopRule::AtTangency;
    let mut domain = None;
    let mut markers = Vec::new();
    let (mut lines, mut edges, mut meets, mut log, mut branches) =
        (Vec::new(), Vec::<WebEdge>::new(), Vec::new(), Vec::new(), Vec::new());
    let mut overflow = false;
    for (line, tag, mut t) in records(text).skip(1) {
        match tag {
            "seed" => seed = t.word()?.parse().map_err(|_| t.err("bad seed"))?,
            "stop-rule" => {
                stop = match t.word()? {
                    "at-tangency" => StopRule::AtTangency,
                    "immediate" => StopRule::Immediate,
                    w => return Err(t.err(format!("unknown stop rule {w:?}"))),
                }
            }
            "domain" => domain = Some(read_domain(&mut t)?),
            "marker" => {
                let p = t.point()?;
                let line = Line {
                    phi: t.f()?,
                    rho: t.f()?,
                };
                markers.push(Marker { line, point: p });
            }
            "line" => lines.push(Line {
                phi: t.f()?,
                rho: t.f()?,
            }),
            "edge" => {
                let line_id = t.u()?;
                let side = match t.word()? {
                    "+" => 1.0,
                    "-" => -1.0,
                    w => return Err(t.err(format!("bad side {w:?}"))),
                };
                let ow = t.word()?;
                let origin = match ow.split(':').next().unwrap_or("") {
                    "germ" => EdgeOrigin::Germ(parse_indices(&t, ow, 1)?[0]),
                    "branch" => EdgeOrigin::Branch {
                        parent: parse_indices(&t, ow, 1)?[0],
                    },
                    "forced" => {
                        let v = parse_indices(&t, ow, 2)?;
                        EdgeOrigin::Forced {
                            parent: v[0],
                            forcer: v[1],
                        }
                    }
                    _ => return Err(t.err(format!("unknown origin {ow:?}"))),
                };
                let (start, start_time) = (t.point()?, t.f()?);
                let (end, end_time) = (t.point()?, t.f()?);
                let cw = t.word()?;
                let cause = read_cause(&t, cw)?;
                let l = *lines.get(line_id).ok_or_else(|| t.err("edge before its line"))?;
                edges.push(WebEdge {
                    line: l,
                    line_id,
                    side,
                    origin,
                    start,
                    start_time,
                    end,
                    end_time,
                    cause,
                    switches: Vec::new(),
                });
            }
            "switch" => {
                let (time, point, target) = (t.f()?, t.point()?, t.u()?);
                let kind = match t.word()? {
                    "free" => SwitchKind::Free,
                    "forced" => SwitchKind::Forced,
                    "cross" => SwitchKind::Cross,
                    w => return Err(t.err(format!("unknown switch kind {w:?}"))),
                };
                edges
                    .last_mut()
                    .ok_or_else(|| t.err("switch before any edge"))?
                    .switches
                    .push(Switch {
                        time,
                        point,
                        target,
                        kind,
                    });
            }
            "meet" => meets.push(Meet {
                time: t.f()?,
                point: t.point()?,
                a: t.u()?,
                b: t.u()?,
            }),
            "log" => {
                let time = t.f()?;
                let event = match t.word()? {
                    "activate" => WebEvent::Activate(t.u()?),
                    "switch" => WebEvent::Switch {
                        edge: t.u()?,
                        index: t.u()?,
                    },
                    "meet" => WebEvent::Meet(t.u()?),
                    "end" => WebEvent::End(t.u()?),
                    w => return Err(t.err(format!("unknown event {w:?}"))),
                };
                log.push(LogEntry { time, event });
            }
            "branch-overflow" => overflow = true,
            "branch" => {
                let root = t.u()?;
                let cw = t.word()?;
                let cause = read_cause(&t, cw)?;
                let terminal = t.point()?;
                let mut hops = Vec::new();
                for w in t.it.by_ref() {
                    let mut parts = w.split(':');
                    let e = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("bad hop {w:?}"),
                    })?;
                    let sw = match parts.next() {
                        Some(x) => Some(x.parse().map_err(|_| Error::Parse {
                            line,
                            message: format!("bad hop {w:?}"),
                        })?),
                        None => None,
                    };
                    hops.push((e, sw));
                }
                branches.push(Branch {
                    root,
                    hops,
                    terminal,
                    cause,
                });
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown record {tag:?}"),
                })
            }
        }
        t.done()?;
    }
    let domain = domain.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing domain record".into(),
    })?;
    let n_edges = edges.len();
    let bad = |m: &str| Error::Parse {
        line: 0,
        message: m.into(),
    };
    for e in &edges {
        if e.switches.iter().any(|s| s.target >= n_edges) {
            return Err(bad("switch target out of range"));
        }
    }
    for l in &log {
        let ok = match l.event {
            WebEvent::Activate(e) | WebEvent::End(e) => e < n_edges,
            WebEvent::Switch { edge, index } => edge < n_edges && index < edges[edge].switches.len(),
            WebEvent::Meet(m) => m < meets.len(),
        };
        if !ok {
            return Err(bad("log entry out of range"));
        }
    }
    Ok(PolygonalWeb {
        edges,
        meets,
        log,
        lines,
        branches,
        branch_overflow: overflow,
        markers: MarkerConfig::new(markers)?,
        domain,
        stop_rule: stop,
        seed,
    })
}

struct Frame {
    scale: f64,
    cx: f64,
    cy: f64,
}

impl Frame {
    fn new(d: &ConvexDomain) -> Frame {
        let b = d.bounding_disc();
        Frame {
            scale: 240.0 / b.radius,
            cx: b.center.x,
            cy: b.center.y,
        }
    }

    fn x(&self, p: Point) -> String {
        format!("{:.3}", 256.0 + (p.x - self.cx) * self.scale)
    }

    fn y(&self, p: Point) -> String {
        format!("{:.3}", 256.0 - (p.y - self.cy) * self.scale)
    }

    fn line(&self, s: &mut String, a: Point, b: Point, style: &str) {
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>",
            self.x(a),
            self.y(a),
            self.x(b),
            self.y(b)
        );
    }
}

fn svg_open(d: &ConvexDomain, f: &Frame) -> String {
    let mut s = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"512\" height=\"512\" viewBox=\"0 0 512 512\">\n",
    );
    match d {
        ConvexDomain::Disc(c) => {
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"{:.3}\" fill=\"none\" stroke=\"#999\"/>",
                f.x(c.center),
                f.y(c.center),
                c.radius * f.scale
            );
        }
        ConvexDomain::Polygon(p) => {
            let pts: Vec<String> = p
                .vertices()
                .iter()
                .map(|v| format!("{},{}", f.x(*v), f.y(*v)))
                .collect();
            let _ = writeln!(
                s,
                "<polygon points=\"{}\" fill=\"none\" stroke=\"#999\"/>",
                pts.join(" ")
            );
        }
        ConvexDomain::Clipped { .. } => {}
    }
    s
}

/// One `<line>` per field edge.
pub fn render_field_svg(f: &FieldSample) -> String {
    let fr = Frame::new(&f.domain);
    let mut s = svg_open(&f.domain, &fr);
    for e in &f.edges {
        fr.line(
            &mut s,
            e.segment.a,
            e.segment.b,
            "stroke=\"black\" stroke-width=\"1.5\"",
        );
    }
    s.push_str("</svg>\n");
    s
}

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn edge_root(w: &PolygonalWeb, mut e: usize) -> usize {
    loop {
        match w.edges[e].origin {
            EdgeOrigin::Germ(i) => return i,
            EdgeOrigin::Branch { parent } | EdgeOrigin::Forced { parent, .. } => e = parent,
        }
    }
}

/// Web edges coloured by root, markers as arrows, optional crop overlay.
pub fn render_web_svg(w: &PolygonalWeb, crop: Option<&CropGraph>) -> String {
    let fr = Frame::new(&w.domain);
    let mut s = svg_open(&w.domain, &fr);
    for (i, e) in w.edges.iter().enumerate() {
        let c = PALETTE[edge_root(w, i) % PALETTE.len()];
        fr.line(&mut s, e.start, e.end, &format!("stroke=\"{c}\" stroke-width=\"1.5\""));
    }
    for m in w.markers.markers() {
        let d = m.line.direction() * (12.0 / fr.scale);
        fr.line(&mut s, m.point - d, m.point + d, "stroke=\"black\" stroke-width=\"3\"");
    }
    if let Some(g) = crop {
        for &(a, b) in &g.segments {
            fr.line(
                &mut s,
                a,
                b,
                "stroke=\"black\" stroke-opacity=\"0.4\" stroke-width=\"5\"",
            );
        }
        for n in &g.nodes {
            let (x, y) = (fr.x(n.point), fr.y(n.point));
            let _ = match n.label {
                NodeLabel::V => writeln!(s, "<circle cx=\"{x}\" cy=\"{y}\" r=\"4\" fill=\"black\"/>"),
                NodeLabel::T => writeln!(s, "<rect x=\"{x}\" y=\"{y}\" width=\"6\" height=\"6\" transform=\"translate(-3,-3)\" fill=\"black\"/>"),
                NodeLabel::I => writeln!(s, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"white\" stroke=\"black\"/>"),
            };
        }
    }
    s.push_str("</svg>\n");
    s
}
