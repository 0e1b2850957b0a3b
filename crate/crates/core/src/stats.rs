//! Streaming moments, Kolmogorov–Smirnov statistics and estimate reports.

use serde::{Deserialize, Serialize};

/// Count, mean and centred second moment; merges are associative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub se: f64,
    pub n: u64,
    pub eps_x: Option<f64>,
    pub eps_phi: Option<f64>,
    pub seed: u64,
    pub wall_clock_secs: f64,
}

impl EstimateReport {
    pub fn from_moments(m: &Moments, seed: u64, wall_clock_secs: f64) -> EstimateReport {
        EstimateReport {
            estimate: m.mean,
            se: m.se(),
            n: m.n,
            eps_x: None,
            eps_phi: None,
            seed,
            wall_clock_secs,
        }
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value. Ties are
/// handled by advancing both samples past equal values.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 {
        return (0.0, 1.0);
    }
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_q((en + 0.12 + 0.11 / en) * d))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moments_basic() {
        let m = Moments::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.n, 4);
        assert!((m.mean - 2.5).abs() < 1e-15);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // classical critical values of the Kolmogorov distribution
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_two_sample_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert!(p > 0.99);
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert!((d - 0.3).abs() < 0.01);
        assert!(p < 1e-6);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in proptest::collection::vec(-1e3f64..1e3, 2..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let whole = Moments::from_slice(&xs);
            let merged = Moments::from_slice(&xs[..cut]).merge(Moments::from_slice(&xs[cut..]));
            prop_assert_eq!(whole.n, merged.n);
            prop_assert!((whole.mean - merged.mean).abs() <= 1e-9 * (1.0 + whole.mean.abs()));
            prop_assert!((whole.m2 - merged.m2).abs() <= 1e-7 * (1.0 + whole.m2.abs()));
        }
    }
}
