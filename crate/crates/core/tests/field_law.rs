use polyweb::activity::ActivityMeasure;
use polyweb::field::{check_admissible, sample_field};
use polyweb::geometry::{ConvexDomain, Point, Segment, WindowFamily, WindowKind};
use polyweb::stats::{ks_two_sample, Moments};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn unit_disc_family() -> WindowFamily {
    WindowFamily::homothety(ConvexDomain::unit_disc())
}

#[test]
fn vertex_birth_count_mean_is_intersection_measure() {
    let act = ActivityMeasure::homogeneous(1.0).unwrap();
    let fam = WindowFamily::homothety(ConvexDomain::square(0.0, 0.0, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let counts: Vec<f64> = (0..10_000)
        .map(|_| sample_field(&act, &fam, &mut rng).unwrap().stats.vertex_births as f64)
        .collect();
    let m = Moments::from_slice(&counts);
    assert!((m.mean - PI).abs() < 3.0 * m.se(), "{} +- {}", m.mean, m.se());
}

#[test]
fn probe_crossings_match_line_intensity() {
    // at one marker the normalised correlation is one, so the crossing
    // intensity of field edges equals that of the line process: 2 lambda L
    let act = ActivityMeasure::homogeneous(1.0).unwrap();
    let fam = unit_disc_family();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (k, angle) in [0.0f64, 1.1].iter().enumerate() {
        let d = Point::new(angle.cos(), angle.sin()) * 0.25;
        let probe = Segment::new(Point::new(0.1, 0.05) - d, Point::new(0.1, 0.05) + d).unwrap();
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_field(&act, &fam, &mut rng).unwrap().crossings(&probe) as f64)
            .collect();
        let m = Moments::from_slice(&xs);
        assert!(
            (m.mean - 1.0).abs() < 3.0 * m.se(),
            "probe {k}: {} +- {}",
            m.mean,
            m.se()
        );
    }
}

#[test]
fn restriction_matches_direct_sampling() {
    let act = ActivityMeasure::homogeneous(1.0).unwrap();
    let big = unit_disc_family();
    let sub = ConvexDomain::disc(Point::new(0.2, 0.1), 0.5).unwrap();
    let small = WindowFamily::homothety(sub.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 10_000;
    let restricted: Vec<f64> = (0..n)
        .map(|_| sample_field(&act, &big, &mut rng).unwrap().edges_meeting(&sub) as f64)
        .collect();
    let direct: Vec<f64> = (0..n)
        .map(|_| sample_field(&act, &small, &mut rng).unwrap().edges.len() as f64)
        .collect();
    let (_, p) = ks_two_sample(&restricted, &direct);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn window_family_does_not_change_the_law() {
    let act = ActivityMeasure::homogeneous(1.0).unwrap();
    let hom = unit_disc_family();
    let conc = WindowFamily::new(
        ConvexDomain::unit_disc(),
        Point::new(0.4, -0.3),
        WindowKind::ConcentricDisc,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 10_000;
    let a: Vec<f64> = (0..n)
        .map(|_| sample_field(&act, &hom, &mut rng).unwrap().edges.len() as f64)
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|_| sample_field(&act, &conc, &mut rng).unwrap().edges.len() as f64)
        .collect();
    let (_, p) = ks_two_sample(&a, &b);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn admissible_at_scale() {
    let act = ActivityMeasure::homogeneous(1.0).unwrap();
    let fam = unit_disc_family();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10_000 {
        let s = sample_field(&act, &fam, &mut rng).unwrap();
        assert!(check_admissible(&s).ok);
    }
}
