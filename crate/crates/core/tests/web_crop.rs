use polyweb::arrangement::count_marked;
use polyweb::crop::{crop, crop_graph_census, crop_subset_sum, signed_marker_terminal, SUBSET_CAP};
use polyweb::io::replica_rng;
use polyweb::stats::Moments;
use polyweb::web::zero_activity_web;
use polyweb::{ActivityMeasure, ConvexDomain, Marker, MarkerConfig, Point, StopRule, WindowFamily, WindowKind};
use rand::Rng;
use std::f64::consts::PI;

/// Random marker set in the disc of radius `r`, sometimes with a coupled pair.
fn random_markers<R: Rng>(k: usize, r: f64, rng: &mut R) -> MarkerConfig {
    loop {
        let mut ms: Vec<Marker> = Vec::new();
        while ms.len() < k {
            if !ms.is_empty() && rng.random::<f64>() < 0.25 {
                let m = ms[rng.random_range(0..ms.len())];
                let s = rng.random::<f64>() * 0.6 - 0.3;
                let p = m.point + m.line.direction() * s;
                if p.norm() < r && s.abs() > 0.05 {
                    ms.push(Marker::new(p, m.line.phi));
                }
                continue;
            }
            let rad = r * rng.random::<f64>().sqrt();
            let a = rng.random::<f64>() * 2.0 * PI;
            ms.push(Marker::new(
                Point::new(rad * a.cos(), rad * a.sin()),
                rng.random::<f64>() * PI,
            ));
        }
        if let Ok(mc) = MarkerConfig::new(ms) {
            if !mc.is_empty() && !mc.position().singular {
                return mc;
            }
        }
    }
}

fn windows() -> [WindowFamily; 2] {
    [
        WindowFamily::new(
            ConvexDomain::unit_disc(),
            Point::new(0.13, -0.21),
            WindowKind::Homothety,
        )
        .unwrap(),
        WindowFamily::new(
            ConvexDomain::polygon(vec![
                Point::new(-1.2, -0.9),
                Point::new(1.1, -1.0),
                Point::new(1.3, 1.2),
                Point::new(-1.0, 1.1),
            ])
            .unwrap(),
            Point::new(-0.3, 0.4),
            WindowKind::ConcentricDisc,
        )
        .unwrap(),
    ]
}

#[test]
fn zero_activity_crop_counts_marked_configurations() {
    let mut rng = replica_rng(11, "wn", 0);
    let fams = windows();
    for _ in 0..100 {
        let k = rng.random_range(1..=4);
        let mc = random_markers(k, 0.7, &mut rng);
        let n = count_marked(&mc, &ConvexDomain::unit_disc()).unwrap() as i64;
        for fam in &fams {
            for stop in [StopRule::AtTangency, StopRule::Immediate] {
                let w = zero_activity_web(fam, &mc, stop).unwrap();
                assert_eq!(crop(&w), n, "{:?} {stop:?}", mc.markers());
            }
        }
        assert_eq!(count_marked(&mc, fams[1].base()).unwrap() as i64, n);
    }
}

#[test]
fn crop_forms_agree() {
    let fam = &windows()[0];
    let mut seeds = 0u64;
    for lambda in [0.5, 1.0] {
        let act = ActivityMeasure::homogeneous(lambda).unwrap();
        for k in 1..=3 {
            for stop in [StopRule::AtTangency, StopRule::Immediate] {
                let mut mrng = replica_rng(12, "markers", seeds);
                for _ in 0..25 {
                    seeds += 1;
                    let mc = random_markers(k, 0.7, &mut mrng);
                    let (c, web) =
                        signed_marker_terminal(&act, fam, &mc, stop, &mut replica_rng(12, "web", seeds)).unwrap();
                    let census = crop_graph_census(&web).unwrap();
                    assert_eq!(census.sum, c);
                    assert_eq!(census.duplicates, 0);
                    if web.branches.len() <= SUBSET_CAP {
                        assert_eq!(crop_subset_sum(&web).unwrap(), c);
                    } else {
                        assert!(crop_subset_sum(&web).is_err());
                    }
                }
            }
        }
    }
}

#[test]
fn single_marker_mean_crop_is_one() {
    let act = ActivityMeasure::homogeneous(1.0).unwrap();
    let fam = &windows()[0];
    let mc = MarkerConfig::new(vec![Marker::new(Point::new(0.55, 0.35), 2.1)]).unwrap();
    let mut m = Moments::default();
    for i in 0..4000 {
        let (c, _) =
            signed_marker_terminal(&act, fam, &mc, StopRule::AtTangency, &mut replica_rng(13, "k1", i)).unwrap();
        m.push(c as f64);
    }
    assert!((m.mean - 1.0).abs() <= 3.0 * m.se(), "{} +- {}", m.mean, m.se());
}
