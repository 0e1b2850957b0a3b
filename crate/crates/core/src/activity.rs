//! Activity measures `M = m · mu` on lines and the samplers driven by them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{angle_gap, ConvexDomain, Line, Point, Segment, EPS_GEO};
use crate::quadrature::integrate;

/// Density `m(phi, rho)` of a custom activity measure.
pub type DensityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Smallest admissible angle between a sampled line and the line it turns
/// away from.
pub const MIN_TURN_ANGLE: f64 = 1e-9;

const REL_TOL: f64 = 1e-6;
const MAX_INTERVALS: usize = 2000;
const MAX_REJECTIONS: usize = 100_000;

#[derive(Clone)]
enum Kind {
    Homogeneous { lambda: f64 },
    Anisotropic { lambda: f64, a: f64 },
    Custom { density: DensityFn, m_max: f64 },
}

#[derive(Clone)]
pub struct ActivityMeasure {
    kind: Kind,
}

impl fmt::Debug for ActivityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Homogeneous { lambda } => write!(f, "Homogeneous(lambda={lambda})"),
            Kind::Anisotropic { lambda, a } => write!(f, "Anisotropic(lambda={lambda}, a={a})"),
            Kind::Custom { m_max, .. } => write!(f, "Custom(m_max={m_max})"),
        }
    }
}

impl ActivityMeasure {
    pub fn homogeneous(lambda: f64) -> Result<ActivityMeasure> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidActivity(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(ActivityMeasure {
            kind: Kind::Homogeneous { lambda },
        })
    }

    /// `m(phi, rho) = lambda (1 + a cos 2 phi)` with `|a| <= 1`.
    pub fn anisotropic(lambda: f64, a: f64) -> Result<ActivityMeasure> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidActivity(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if !(a.abs() <= 1.0) {
            return Err(Error::InvalidActivity(format!("|a| must be <= 1, got {a}")));
        }
        Ok(ActivityMeasure {
            kind: Kind::Anisotropic { lambda, a },
        })
    }

    /// A custom continuous density bounded by `m_max` on the region of use.
    pub fn custom(density: DensityFn, m_max: f64) -> Result<ActivityMeasure> {
        if !(m_max >= 0.0) || !m_max.is_finite() {
            return Err(Error::InvalidActivity(format!(
                "m_max must be finite and >= 0, got {m_max}"
            )));
        }
        Ok(ActivityMeasure {
            kind: Kind::Custom { density, m_max },
        })
    }

    pub fn density(&self, l: &Line) -> f64 {
        match &self.kind {
            Kind::Homogeneous { lambda } => *lambda,
            Kind::Anisotropic { lambda, a } => lambda * (1.0 + a * (2.0 * l.phi).cos()),
            Kind::Custom { density, .. } => density(l.phi, l.rho),
        }
    }

    pub fn m_max(&self) -> f64 {
        match &self.kind {
            Kind::Homogeneous { lambda } => *lambda,
            Kind::Anisotropic { lambda, a } => lambda * (1.0 + a.abs()),
            Kind::Custom { m_max, .. } => *m_max,
        }
    }

    /// The intensity for homogeneous measures.
    pub fn lambda(&self) -> Option<f64> {
        match &self.kind {
            Kind::Homogeneous { lambda } => Some(*lambda),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.m_max() == 0.0
    }

    fn depends_on_rho(&self) -> bool {
        matches!(self.kind, Kind::Custom { .. })
    }

    /// `M` of the lines through `p` hitting it per unit length of a carrier
    /// line of angle `phi`, i.e. `∫ m(l') |sin(phi' - phi)| dphi'` over lines
    /// `l'` through `p`.
    pub fn hazard_rate(&self, p: Point, phi: f64) -> Result<f64> {
        if let Some(lambda) = self.lambda() {
            return Ok(2.0 * lambda);
        }
        integrate(
            |d| self.density(&Line::through(p, phi + d)) * d.sin(),
            0.0,
            PI,
            REL_TOL * 1e-2,
            1e-14,
            MAX_INTERVALS,
        )
    }

    /// `M([[seg]])`, the activity mass of lines hitting the segment.
    pub fn measure_hit(&self, seg: &Segment) -> Result<f64> {
        let d = seg.b - seg.a;
        if let Some(lambda) = self.lambda() {
            return Ok(2.0 * lambda * d.norm());
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        // split [0, pi) where the segment's normal projection vanishes
        let kink = Line::through_points(seg.a, seg.b).map(|l| l.phi).unwrap_or(0.0);
        let cuts = [0.0, kink, PI];
        let mut total = 0.0;
        for w in cuts.windows(2) {
            if w[1] - w[0] <= 0.0 {
                continue;
            }
            let inner = |phi: f64| -> f64 {
                let n = Point::new(phi.sin(), phi.cos());
                let (r1, r2) = (n.dot(seg.a), n.dot(seg.b));
                let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                if !self.depends_on_rho() {
                    return self.density(&Line { phi, rho: lo }) * (hi - lo);
                }
                integrate(
                    |rho| self.density(&Line { phi, rho }),
                    lo,
                    hi,
                    REL_TOL * 1e-2,
                    1e-15,
                    MAX_INTERVALS,
                )
                .unwrap_or(f64::NAN)
            };
            total += integrate(inner, w[0], w[1], REL_TOL, 1e-15, MAX_INTERVALS)?;
        }
        Ok(total)
    }

    /// `M([[dom]])`.
    pub fn measure_hit_domain(&self, dom: &ConvexDomain) -> Result<f64> {
        if let Some(lambda) = self.lambda() {
            return Ok(lambda * dom.perimeter());
        }
        let inner = |phi: f64| -> f64 {
            let (lo, hi) = dom.support(phi);
            if !self.depends_on_rho() {
                return self.density(&Line { phi, rho: lo }) * (hi - lo);
            }
            integrate(
                |rho| self.density(&Line { phi, rho }),
                lo,
                hi,
                REL_TOL * 1e-2,
                1e-15,
                MAX_INTERVALS,
            )
            .unwrap_or(f64::NAN)
        };
        integrate(inner, 0.0, PI, REL_TOL, 1e-15, MAX_INTERVALS)
    }

    /// Poisson line process with intensity `M` restricted to lines hitting
    /// `dom`, by thinning a homogeneous process on a bounding disc.
    pub fn sample_line_process<R: Rng + ?Sized>(&self, dom: &ConvexDomain, rng: &mut R) -> Vec<Line> {
        let m_max = self.m_max();
        if m_max == 0.0 {
            return Vec::new();
        }
        let disc = dom.bounding_disc();
        let mean = m_max * 2.0 * PI * disc.radius;
        let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
        let mut out = Vec::new();
        for _ in 0..count {
            let phi = rng.random::<f64>() * PI;
            let n = Point::new(phi.sin(), phi.cos());
            let rho = n.dot(disc.center) + disc.radius * (2.0 * rng.random::<f64>() - 1.0);
            let l = Line { phi, rho };
            if dom.proper_chord(&l).is_none() {
                continue;
            }
            if self.lambda().is_none() && rng.random::<f64>() * m_max >= self.density(&l) {
                continue;
            }
            out.push(l);
        }
        out
    }

    /// `count` independent lines with law `M` restricted to lines hitting
    /// `dom`, normalised.
    pub fn sample_lines<R: Rng + ?Sized>(&self, dom: &ConvexDomain, count: usize, rng: &mut R) -> Vec<Line> {
        let m_max = self.m_max();
        if m_max == 0.0 {
            return Vec::new();
        }
        let disc = dom.bounding_disc();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let phi = rng.random::<f64>() * PI;
            let n = Point::new(phi.sin(), phi.cos());
            let rho = n.dot(disc.center) + disc.radius * (2.0 * rng.random::<f64>() - 1.0);
            let l = Line { phi, rho };
            if dom.proper_chord(&l).is_none() {
                continue;
            }
            if self.lambda().is_none() && rng.random::<f64>() * m_max >= self.density(&l) {
                continue;
            }
            out.push(l);
        }
        out
    }

    /// Angle gap with density `sin(d) / 2` on `[0, pi)`.
    pub fn sample_gap<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        loop {
            let d = (1.0 - 2.0 * rng.random::<f64>()).acos();
            if d > MIN_TURN_ANGLE && PI - d > MIN_TURN_ANGLE {
                return d;
            }
        }
    }

    /// One thinning trial for a line through `at` hit by a carrier of angle
    /// `phi_in`: proposes a line with `|sin|` gap law and accepts it with
    /// probability `m / m_max`.
    pub fn propose_turn<R: Rng + ?Sized>(&self, at: Point, phi_in: f64, rng: &mut R) -> Option<Line> {
        let l = Line::through(at, phi_in + Self::sample_gap(rng));
        if self.lambda().is_some() {
            return Some(l);
        }
        let m_max = self.m_max();
        if rng.random::<f64>() * m_max < self.density(&l) {
            Some(l)
        } else {
            None
        }
    }

    /// A new direction through `at` with angle density proportional to
    /// `m(l') |sin(phi' - phi_in)|`.
    pub fn sample_turn_direction<R: Rng + ?Sized>(&self, at: Point, incoming: &Line, rng: &mut R) -> Result<Line> {
        if self.is_zero() {
            return Err(Error::ZeroDensity { x: at.x, y: at.y });
        }
        for _ in 0..MAX_REJECTIONS {
            if let Some(l) = self.propose_turn(at, incoming.phi, rng) {
                if angle_gap(l.phi, incoming.phi) > MIN_TURN_ANGLE {
                    return Ok(l);
                }
            }
        }
        Err(Error::ZeroDensity { x: at.x, y: at.y })
    }

    /// Two lines through `at` with joint angle density proportional to
    /// `m(l1) m(l2) |sin(phi1 - phi2)|`.
    pub fn sample_vertex_pair<R: Rng + ?Sized>(&self, at: Point, rng: &mut R) -> Result<(Line, Line)> {
        if self.is_zero() {
            return Err(Error::ZeroDensity { x: at.x, y: at.y });
        }
        let m_max = self.m_max();
        for _ in 0..MAX_REJECTIONS {
            let phi1 = rng.random::<f64>() * PI;
            let l1 = Line::through(at, phi1);
            let l2 = Line::through(at, phi1 + Self::sample_gap(rng));
            if self.lambda().is_some() {
                return Ok((l1, l2));
            }
            if rng.random::<f64>() * m_max * m_max < self.density(&l1) * self.density(&l2) {
                return Ok((l1, l2));
            }
        }
        Err(Error::ZeroDensity { x: at.x, y: at.y })
    }

    /// `<<M>>(dom)`: half the `M x M` mass of line pairs meeting inside `dom`.
    pub fn intersection_measure(&self, dom: &ConvexDomain) -> Result<f64> {
        if let Some(lambda) = self.lambda() {
            return Ok(lambda * lambda * PI * dom.area());
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        let outer_rho = |phi: f64| -> f64 {
            let (lo, hi) = dom.support(phi);
            integrate(
                |rho| {
                    let l = Line { phi, rho };
                    match dom.chord(&l) {
                        Some((a, b)) if a.dist(b) > EPS_GEO => {
                            let seg = Segment { a, b };
                            self.density(&l) * self.measure_hit(&seg).unwrap_or(f64::NAN)
                        }
                        _ => 0.0,
                    }
                },
                lo,
                hi,
                REL_TOL,
                1e-14,
                MAX_INTERVALS,
            )
            .unwrap_or(f64::NAN)
        };
        Ok(0.5 * integrate(outer_rho, 0.0, PI, REL_TOL, 1e-14, MAX_INTERVALS)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Point::new(ax, ay), Point::new(bx, by)).unwrap()
    }

    #[test]
    fn measure_hit_examples() {
        let one = ActivityMeasure::homogeneous(1.0).unwrap();
        assert_eq!(one.measure_hit(&seg(0.0, 0.0, 1.0, 0.0)).unwrap(), 2.0);
        let zero = ActivityMeasure::homogeneous(0.0).unwrap();
        assert_eq!(zero.measure_hit(&seg(0.0, 0.0, 0.3, 0.9)).unwrap(), 0.0);
        let three = ActivityMeasure::homogeneous(3.0).unwrap();
        assert!((three.measure_hit(&seg(0.0, 0.0, 0.3, 0.4)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn custom_constant_matches_closed_form() {
        let c = ActivityMeasure::custom(Arc::new(|_, _| 1.5), 1.5).unwrap();
        let s = seg(0.1, -0.2, 0.7, 0.5);
        let want = 2.0 * 1.5 * s.length();
        assert!((c.measure_hit(&s).unwrap() - want).abs() < 1e-6 * want);
    }

    #[test]
    fn anisotropic_hit_of_axis_segments() {
        // lambda (1 + a cos 2phi) |sin phi| integrated over [0, pi)
        let act = ActivityMeasure::anisotropic(1.0, 0.5).unwrap();
        let horiz = act.measure_hit(&seg(0.0, 0.0, 1.0, 0.0)).unwrap();
        let want = 2.0 + 0.5 * (-2.0 / 3.0);
        assert!((horiz - want).abs() < 1e-6, "{horiz} vs {want}");
    }

    #[test]
    fn intersection_measure_examples() {
        let one = ActivityMeasure::homogeneous(1.0).unwrap();
        let sq = ConvexDomain::square(0.0, 0.0, 1.0);
        assert!((one.intersection_measure(&sq).unwrap() - PI).abs() < 1e-12);
        let two = ActivityMeasure::homogeneous(2.0).unwrap();
        let v = two.intersection_measure(&ConvexDomain::unit_disc()).unwrap();
        assert!((v - 4.0 * PI * PI).abs() < 1e-9);
        let zero = ActivityMeasure::homogeneous(0.0).unwrap();
        assert_eq!(zero.intersection_measure(&sq).unwrap(), 0.0);
    }

    #[test]
    fn nested_quadrature_matches_crofton() {
        let c = ActivityMeasure::custom(Arc::new(|_, _| 1.0), 1.0).unwrap();
        let sq = ConvexDomain::square(0.0, 0.0, 0.5);
        let v = c.intersection_measure(&sq).unwrap();
        assert!((v - PI * 0.25).abs() < 1e-4 * PI, "{v}");
    }

    #[test]
    fn zero_activity_samples_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = ActivityMeasure::homogeneous(0.0).unwrap();
        assert!(zero
            .sample_line_process(&ConvexDomain::unit_disc(), &mut rng)
            .is_empty());
        assert!(zero
            .sample_turn_direction(Point::default(), &Line::new(0.0, 0.0), &mut rng)
            .is_err());
    }

    #[test]
    fn line_count_mean_on_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let sq = ConvexDomain::square(0.0, 0.0, 0.5);
        let n = 10_000;
        let counts: Vec<f64> = (0..n)
            .map(|_| act.sample_line_process(&sq, &mut rng).len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let se = (2.0f64 / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn turn_gap_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let at = Point::new(0.2, 0.1);
        let inc = Line::through(at, 0.7);
        let gaps: Vec<f64> = (0..100_000)
            .map(|_| {
                let l = act.sample_turn_direction(at, &inc, &mut rng).unwrap();
                assert!(l.contains(at, EPS_GEO));
                (l.phi - inc.phi).rem_euclid(PI)
            })
            .collect();
        let d = ks_one_sample(&gaps, |x| (1.0 - x.cos()) / 2.0);
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn vertex_pair_marginal_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let act = ActivityMeasure::homogeneous(1.0).unwrap();
        let at = Point::new(-0.3, 0.4);
        let mut phi1 = Vec::new();
        let mut gaps = Vec::new();
        for _ in 0..100_000 {
            let (a, b) = act.sample_vertex_pair(at, &mut rng).unwrap();
            assert!(a.contains(at, EPS_GEO) && b.contains(at, EPS_GEO));
            phi1.push(a.phi);
            gaps.push((b.phi - a.phi).rem_euclid(PI));
        }
        assert!(ks_one_sample(&phi1, |x| x / PI) < 0.01);
        assert!(ks_one_sample(&gaps, |x| (1.0 - x.cos()) / 2.0) < 0.01);
    }
}
