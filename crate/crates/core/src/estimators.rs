//! Monte-Carlo estimators: correlation functions, expected crops, the
//! duality comparison and the partition identity.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::ActivityMeasure;
use crate::arrangement::{
    constrained_sum, exact_partition_sum, marker_cover, LineArrangement, ENUMERATION_CAP, PARTITION_CAP,
};
use crate::crop::em_signed_count;
use crate::error::{Error, Result};
use crate::field::sample_field;
use crate::geometry::{angle_gap, ConvexDomain, Line, Point, WindowFamily, EPS_GEO};
use crate::io::replica_rng;
use crate::markers::MarkerConfig;
use crate::quadrature::integrate;
use crate::stats::{EstimateReport, Moments};
use crate::web::{sample_web, StopRule};

/// Padding of the Palm sub-domain around the marker points.
pub const PALM_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiMethod {
    /// Exact arrangement sums over Poisson lines completed by the marker lines.
    #[default]
    Palm,
    /// Frequency of the all-markers-hit event over finite line windows.
    Window,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    pub method: PhiMethod,
    pub eps_x: f64,
    pub eps_phi: f64,
}

fn moments(xs: &[f64]) -> Moments {
    Moments::from_slice(xs)
}

fn check_replicas(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 replicas, got {n}")));
    }
    Ok(())
}

fn check_position(mc: &MarkerConfig) -> Result<()> {
    if mc.position().singular {
        return Err(Error::InvalidMarkers(
            "singular marker position: a marker lies on a foreign marker line".into(),
        ));
    }
    Ok(())
}

fn unit(phi: f64) -> Point {
    Point::new(phi.sin(), phi.cos())
}

/// Markers of each distinct line.
fn groups(mc: &MarkerConfig) -> Vec<Vec<Point>> {
    let mut g = vec![Vec::new(); mc.lines().len()];
    for (i, m) in mc.markers().iter().enumerate() {
        g[mc.line_index(i)].push(m.point);
    }
    g
}

/// Activity mass of the lines within `eps_phi` in angle of `line` and within
/// `eps_x` of every point in `pts`.
pub fn window_mass(act: &ActivityMeasure, line: &Line, pts: &[Point], eps_x: f64, eps_phi: f64) -> Result<f64> {
    let rho_range = |phi: f64| -> (f64, f64) {
        let n = unit(phi);
        pts.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), p| {
            let r = n.dot(*p);
            (lo.max(r - eps_x), hi.min(r + eps_x))
        })
    };
    let mut err = None;
    let v = integrate(
        |phi| {
            let (lo, hi) = rho_range(phi);
            if hi <= lo {
                return 0.0;
            }
            if let Some(lambda) = act.lambda() {
                return lambda * (hi - lo);
            }
            match integrate(|rho| act.density(&Line::new(phi, rho)), lo, hi, 1e-10, 1e-15, 64) {
                Ok(x) => x,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            }
        },
        line.phi - eps_phi,
        line.phi + eps_phi,
        1e-10,
        1e-15,
        64,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// True iff the line windows of two marker groups share a line.
fn windows_overlap(a: (&Line, &[Point]), b: (&Line, &[Point]), eps_x: f64, eps_phi: f64) -> bool {
    let gap = angle_gap(a.0.phi, b.0.phi);
    if gap >= 2.0 * eps_phi {
        return false;
    }
    let mut d = (b.0.phi - a.0.phi).rem_euclid(PI);
    if d > PI / 2.0 {
        d -= PI;
    }
    let (pa, pb) = (a.0.phi, a.0.phi + d);
    let (lo, hi) = (pa.max(pb) - eps_phi, pa.min(pb) + eps_phi);
    for p in a.1 {
        for q in b.1 {
            let diff = *q - *p;
            let (f0, f1) = (diff.dot(unit(lo)), diff.dot(unit(hi)));
            let sign_change = f0 * f1 <= 0.0;
            if !sign_change && f0.abs().min(f1.abs()) >= 2.0 * eps_x {
                return false;
            }
        }
    }
    true
}

/// All-markers-hit indicator for one field sample.
fn all_hit(edges: &[crate::field::FieldEdge], windows: &[(Line, Vec<Point>)], eps_x: f64, eps_phi: f64) -> bool {
    windows.iter().all(|(l, pts)| {
        edges
            .iter()
            .any(|e| angle_gap(e.line.phi, l.phi) < eps_phi && pts.iter().all(|p| e.segment.distance_to(*p) < eps_x))
    })
}

fn trivial_report(n: usize, eps: Option<(f64, f64)>) -> EstimateReport {
    EstimateReport {
        estimate: 1.0,
        se: 0.0,
        n: n as u64,
        eps_x: eps.map(|e| e.0),
        eps_phi: eps.map(|e| e.1),
        seed: 0,
        wall_clock_secs: 0.0,
    }
}

/// Window estimate of the normalised correlation: the all-markers-hit
/// frequency over `n` fields divided by the product of window masses, one
/// window per distinct marker line.
pub fn estimate_phi<R: Rng + ?Sized>(
    mc: &MarkerConfig,
    act: &ActivityMeasure,
    fam: &WindowFamily,
    eps_x: f64,
    eps_phi: f64,
    n: usize,
    rng: &mut R,
) -> Result<EstimateReport> {
    check_replicas(n)?;
    if !(eps_x > 0.0 && eps_phi > 0.0) {
        return Err(Error::Config("window parameters must be positive".into()));
    }
    if mc.is_empty() {
        return Ok(trivial_report(n, Some((eps_x, eps_phi))));
    }
    check_position(mc)?;
    mc.check_inside(fam.base())?;
    let windows: Vec<(Line, Vec<Point>)> = mc.lines().iter().copied().zip(groups(mc)).collect();
    for i in 0..windows.len() {
        for j in 0..i {
            let (a, b) = (&windows[i], &windows[j]);
            if windows_overlap((&a.0, &a.1), (&b.0, &b.1), eps_x, eps_phi) {
                return Err(Error::InvalidMarkers(format!("marker windows {j} and {i} overlap")));
            }
        }
    }
    let mut norm = 1.0;
    for (l, pts) in &windows {
        norm *= window_mass(act, l, pts, eps_x, eps_phi)?;
    }
    if !(norm > 0.0) {
        return Err(Error::InvalidMarkers("marker windows carry no activity".into()));
    }
    let seed: u64 = rng.random();
    let t0 = Instant::now();
    let xs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = replica_rng(seed, "estimate-phi", i as u64);
            let f = sample_field(act, fam, &mut r)?;
            Ok(if all_hit(&f.edges, &windows, eps_x, eps_phi) {
                1.0 / norm
            } else {
                0.0
            })
        })
        .collect::<Result<_>>()?;
    let mut rep = EstimateReport::from_moments(&moments(&xs), seed, t0.elapsed().as_secs_f64());
    rep.eps_x = Some(eps_x);
    rep.eps_phi = Some(eps_phi);
    Ok(rep)
}

fn hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let turn = |h: &[Point], p: Point| {
        let n = h.len();
        (h[n - 1] - h[n - 2]).cross(p - h[n - 1])
    };
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(&lower, p) <= 1e-12 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper, p) <= 1e-12 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Convex hull of the marker points padded by [`PALM_MARGIN`], as a 24-gon
/// around each point.
pub fn palm_domain(mc: &MarkerConfig, base: &ConvexDomain) -> Result<ConvexDomain> {
    let mut pts = Vec::new();
    for m in mc.markers() {
        for k in 0..24 {
            let a = 2.0 * PI * (k as f64 + 0.5) / 24.0;
            pts.push(m.point + Point::new(a.cos(), a.sin()) * PALM_MARGIN);
        }
    }
    let dom = ConvexDomain::polygon(hull(pts))?;
    if let ConvexDomain::Polygon(p) = &dom {
        if let Some(v) = p.vertices().iter().find(|v| !base.contains(**v, 0.0)) {
            return Err(Error::OutsideDomain { x: v.x, y: v.y });
        }
    }
    Ok(dom)
}

/// Largest Poisson line count enumerated by the Palm estimator.
pub const PALM_STRATA: usize = 12;

/// Largest total line count (marker lines plus Poisson lines) the Palm
/// estimator enumerates.
pub const PALM_LINE_CAP: usize = 15;

/// Strata past the Poisson mode with a smaller weight are left out.
pub const STRATUM_MIN_WEIGHT: f64 = 1e-7;

/// One line-count stratum of a stratified estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub lines: usize,
    /// Poisson probability of this line count.
    pub weight: f64,
    pub replicas: usize,
    pub mean: f64,
    pub se: f64,
    /// Wall-clock seconds spent in this stratum.
    pub secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub report: EstimateReport,
    pub strata: Vec<Stratum>,
    /// Poisson mass of the line counts above the last stratum, left out.
    pub tail_mass: f64,
    /// Weighted mean of the last stratum, a scale for the truncation bias.
    pub last_contribution: f64,
}

/// `E f(L)` for a Poisson line process `L` of intensity `M` on `dom`,
/// stratified by the number of lines up to `max_lines`, stopping early at
/// [`STRATUM_MIN_WEIGHT`]. `f` returns a value
/// and a cost. A pilot pass spends a tenth of the replicas in proportion to
/// the square root of the stratum weights; the rest go to the strata in
/// proportion to `weight * sd / sqrt(cost)`.
fn stratified<F>(
    act: &ActivityMeasure,
    dom: &ConvexDomain,
    max_lines: usize,
    n: usize,
    seed: u64,
    stream: &str,
    f: F,
) -> Result<StratifiedReport>
where
    F: Fn(Vec<Line>) -> Result<(f64, f64)> + Sync,
{
    let mu = act.measure_hit_domain(dom)?;
    let mut weights = Vec::with_capacity(max_lines + 1);
    let mut w = (-mu).exp();
    for j in 0..=max_lines {
        if j > 0 {
            w *= mu / j as f64;
        }
        if j as f64 > mu && w < STRATUM_MIN_WEIGHT {
            break;
        }
        weights.push(w);
    }
    let max_lines = weights.len() - 1;
    let t0 = Instant::now();
    let mut next = 0u64;
    let mut per = vec![Moments::default(); max_lines + 1];
    let mut cost = vec![Moments::default(); max_lines + 1];
    let mut secs = vec![0.0; max_lines + 1];
    let mut pass = |alloc: &[usize], per: &mut [Moments], cost: &mut [Moments], secs: &mut [f64]| -> Result<()> {
        let tasks: Vec<(u64, usize)> = alloc
            .iter()
            .enumerate()
            .flat_map(|(j, &m)| (0..m).map(move |_| j))
            .enumerate()
            .map(|(i, j)| (next + i as u64, j))
            .collect();
        next += tasks.len() as u64;
        let xs: Vec<(usize, (f64, f64), f64)> = tasks
            .par_iter()
            .map(|&(i, j)| {
                let t = Instant::now();
                let mut r = replica_rng(seed, stream, i);
                let v = f(act.sample_lines(dom, j, &mut r))?;
                Ok((j, v, t.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()?;
        for (j, (x, c), t) in xs {
            per[j].push(x);
            cost[j].push(c);
            secs[j] += t;
        }
        Ok(())
    };
    let roots: f64 = weights.iter().map(|w| w.sqrt()).sum();
    let pilot: Vec<usize> = weights
        .iter()
        .map(|w| ((0.1 * n as f64 * w.sqrt() / roots).round() as usize).max(4))
        .collect();
    pass(&pilot, &mut per, &mut cost, &mut secs)?;
    let rest = n.saturating_sub(pilot.iter().sum());
    let score: Vec<f64> = (0..=max_lines)
        .map(|j| weights[j] * per[j].variance().sqrt() / (1.0 + cost[j].mean).sqrt())
        .collect();
    let total: f64 = score.iter().sum();
    if rest > 0 && total > 0.0 {
        let alloc: Vec<usize> = score
            .iter()
            .map(|s| (rest as f64 * s / total).round() as usize)
            .collect();
        pass(&alloc, &mut per, &mut cost, &mut secs)?;
    }
    let strata: Vec<Stratum> = per
        .iter()
        .enumerate()
        .map(|(j, m)| Stratum {
            lines: j,
            weight: weights[j],
            replicas: m.n as usize,
            mean: m.mean,
            se: m.se(),
            secs: secs[j],
        })
        .collect();
    let estimate = strata.iter().map(|s| s.weight * s.mean).sum();
    let var: f64 = strata.iter().map(|s| (s.weight * s.se).powi(2)).sum();
    let tail_mass = (1.0 - weights.iter().sum::<f64>()).max(0.0);
    let last_contribution = strata.last().map(|s| s.weight * s.mean).unwrap_or(0.0);
    Ok(StratifiedReport {
        last_contribution,
        report: EstimateReport {
            estimate,
            se: var.sqrt(),
            n: next,
            eps_x: None,
            eps_phi: None,
            seed,
            wall_clock_secs: t0.elapsed().as_secs_f64(),
        },
        strata,
        tail_mass,
    })
}

/// Correlation by the Mecke formula on the padded marker hull `D'`: the mean
/// over Poisson lines `L` hitting `D'` of the constrained partition sum on
/// `L` plus the marker lines, with marker points covered, divided by
/// `exp(<<M>>(D'))`. Stratified by the number of Poisson lines.
pub fn estimate_phi_palm<R: Rng + ?Sized>(
    mc: &MarkerConfig,
    act: &ActivityMeasure,
    base: &ConvexDomain,
    n: usize,
    rng: &mut R,
) -> Result<StratifiedReport> {
    check_replicas(n)?;
    if mc.is_empty() {
        return Ok(StratifiedReport {
            report: trivial_report(n, None),
            strata: Vec::new(),
            tail_mass: 0.0,
            last_contribution: 0.0,
        });
    }
    check_position(mc)?;
    mc.check_inside(base)?;
    estimate_phi_palm_on(mc, act, &palm_domain(mc, base)?, n, rng)
}

/// [`estimate_phi_palm`] on an explicit sub-domain containing the markers.
pub fn estimate_phi_palm_on<R: Rng + ?Sized>(
    mc: &MarkerConfig,
    act: &ActivityMeasure,
    dom: &ConvexDomain,
    n: usize,
    rng: &mut R,
) -> Result<StratifiedReport> {
    check_replicas(n)?;
    check_position(mc)?;
    mc.check_inside(dom)?;
    let k = mc.lines().len();
    check_cap(k, PALM_LINE_CAP)?;
    let z = act.intersection_measure(dom)?.exp();
    let cover0 = marker_cover(mc);
    let seed: u64 = rng.random();
    let max_lines = PALM_STRATA.min(PALM_LINE_CAP - k);
    stratified(act, dom, max_lines, n, seed, "estimate-phi-palm", |extra| {
        if extra.iter().any(|l| mc.lines().iter().any(|m| m.approx_eq(l))) {
            return Err(Error::InvalidGeometry("Poisson line repeats a marker line".into()));
        }
        let mut lines = mc.lines().to_vec();
        lines.extend(extra);
        let mut cover = cover0.clone();
        cover.resize(lines.len(), Vec::new());
        let arr = LineArrangement::new(&lines, dom)?;
        let (v, c) = constrained_sum(&arr, &cover, Some(act))?;
        Ok((v / z, c as f64))
    })
}

/// Partition identity by line-count strata: `sum_j P(j) E[Z | j lines]`
/// over `j <= max_lines` against `exp(<<M>>(dom))`.
pub fn stratified_partition<R: Rng + ?Sized>(
    act: &ActivityMeasure,
    dom: &ConvexDomain,
    max_lines: usize,
    n: usize,
    rng: &mut R,
) -> Result<(StratifiedReport, f64)> {
    check_replicas(n)?;
    check_cap(max_lines, ENUMERATION_CAP)?;
    let target = act.intersection_measure(dom)?.exp();
    let seed: u64 = rng.random();
    let r = stratified(act, dom, max_lines, n, seed, "stratified-partition", |lines| {
        let arr = LineArrangement::new(&lines, dom)?;
        let (v, c) = constrained_sum(&arr, &vec![Vec::new(); lines.len()], Some(act))?;
        Ok((v, c as f64))
    })?;
    Ok((r, target))
}

fn check_cap(size: usize, cap: usize) -> Result<()> {
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(())
}

/// Mean crop over `n` independent webs.
pub fn estimate_crop_expectation<R: Rng + ?Sized>(
    mc: &MarkerConfig,
    act: &ActivityMeasure,
    fam: &WindowFamily,
    stop: StopRule,
    n: usize,
    rng: &mut R,
) -> Result<EstimateReport> {
    check_replicas(n)?;
    mc.check_inside(fam.base())?;
    let seed: u64 = rng.random();
    let t0 = Instant::now();
    let xs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = replica_rng(seed, "estimate-crop", i as u64);
            let w = sample_web(act, fam, mc, stop, &mut r)?;
            Ok(em_signed_count(&w) as f64)
        })
        .collect::<Result<_>>()?;
    Ok(EstimateReport::from_moments(
        &moments(&xs),
        seed,
        t0.elapsed().as_secs_f64(),
    ))
}

/// Correlation estimate by either method, with the Poisson tail mass left
/// out by the Palm strata (zero for the window method).
pub fn phi_by<R: Rng + ?Sized>(
    mc: &MarkerConfig,
    act: &ActivityMeasure,
    fam: &WindowFamily,
    opts: &PhiOptions,
    n: usize,
    rng: &mut R,
) -> Result<(EstimateReport, f64)> {
    match opts.method {
        PhiMethod::Window => Ok((estimate_phi(mc, act, fam, opts.eps_x, opts.eps_phi, n, rng)?, 0.0)),
        PhiMethod::Palm => {
            let p = estimate_phi_palm(mc, act, fam.base(), n, rng)?;
            Ok((p.report, p.tail_mass))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub phi: EstimateReport,
    pub crop: EstimateReport,
    pub difference: f64,
    pub combined_se: f64,
    pub pass: bool,
    /// Window estimate at halved `eps_x`, `eps_phi`.
    pub phi_half: Option<EstimateReport>,
    /// `(phi(eps) - phi(eps/2)) / (eps/2)` in units of `eps_x`, with SE.
    pub eps_slope: Option<(f64, f64)>,
    pub tail_mass: f64,
}

/// Compares the field-side correlation with the web-side expected crop.
#[allow(clippy::too_many_arguments)]
pub fn verify_duality<R: Rng + ?Sized>(
    mc: &MarkerConfig,
    act: &ActivityMeasure,
    fam: &WindowFamily,
    stop: StopRule,
    opts: &PhiOptions,
    n_field: usize,
    n_web: usize,
    rng: &mut R,
) -> Result<DualityReport> {
    let (phi, tail_mass) = phi_by(mc, act, fam, opts, n_field, rng)?;
    let (phi_half, eps_slope) = match opts.method {
        PhiMethod::Window => {
            let h = estimate_phi(mc, act, fam, opts.eps_x / 2.0, opts.eps_phi / 2.0, n_field, rng)?;
            let d = opts.eps_x / 2.0;
            let slope = (
                (phi.estimate - h.estimate) / d,
                (phi.se.powi(2) + h.se.powi(2)).sqrt() / d,
            );
            (Some(h), Some(slope))
        }
        PhiMethod::Palm => (None, None),
    };
    let crop = estimate_crop_expectation(mc, act, fam, stop, n_web, rng)?;
    let difference = phi.estimate - crop.estimate;
    let combined_se = (phi.se.powi(2) + crop.se.powi(2)).sqrt();
    Ok(DualityReport {
        pass: difference.abs() <= 3.0 * combined_se,
        phi,
        crop,
        difference,
        combined_se,
        phi_half,
        eps_slope,
        tail_mass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub estimate: EstimateReport,
    pub target: f64,
    pub difference: f64,
    pub overflow: u64,
    pub overflow_fraction: f64,
    /// Overflow fraction at most 1%.
    pub reliable: bool,
    pub pass: bool,
}

/// Mean exact partition sum over Poisson line draws against
/// `exp(<<M>>(dom))`; draws above [`PARTITION_CAP`] lines are rejected.
pub fn verify_partition<R: Rng + ?Sized>(
    act: &ActivityMeasure,
    dom: &ConvexDomain,
    n: usize,
    rng: &mut R,
) -> Result<PartitionReport> {
    check_replicas(n)?;
    if act.lambda().is_none() {
        return Err(Error::InvalidActivity(
            "partition check needs homogeneous activity".into(),
        ));
    }
    let target = act.intersection_measure(dom)?.exp();
    let seed: u64 = rng.random();
    let t0 = Instant::now();
    let draws: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = replica_rng(seed, "verify-partition", i as u64);
            let lines = act.sample_line_process(dom, &mut r);
            if lines.len() > PARTITION_CAP {
                return Ok(None);
            }
            exact_partition_sum(&lines, dom, act).map(Some)
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = draws.iter().flatten().copied().collect();
    let overflow = (n - xs.len()) as u64;
    let overflow_fraction = overflow as f64 / n as f64;
    let estimate = EstimateReport::from_moments(&moments(&xs), seed, t0.elapsed().as_secs_f64());
    let difference = estimate.estimate - target;
    let reliable = overflow_fraction <= 0.01;
    let tol = 3.0 * estimate.se;
    Ok(PartitionReport {
        pass: reliable && (difference.abs() <= tol || (tol == 0.0 && difference.abs() <= EPS_GEO)),
        estimate,
        target,
        difference,
        overflow,
        overflow_fraction,
        reliable,
    })
}
