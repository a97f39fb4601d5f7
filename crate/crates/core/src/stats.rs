//! Interval estimates used by the Monte Carlo reports.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl From<[f64; 2]> for Interval {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

fn z_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `successes` out of `trials` at two-sided
/// confidence `level`. Empty samples give `[0, 1]`.
pub fn wilson(successes: usize, trials: usize, level: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let z = z_quantile(level);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Pin the endpoints that are exact in the degenerate cases.
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Interval { lo, hi }
}

/// Mean and Student-t interval of a set of (approximately independent)
/// batch means.
pub fn batch_means_ci(batches: &[f64], level: f64) -> (f64, Interval) {
    let n = batches.len();
    let mean = batches.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY });
    }
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let t = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0);
    let half = t * (var / n as f64).sqrt();
    (mean, Interval { lo: mean - half, hi: mean + half })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 8/10 at 95%: centre 0.7167, half-width 0.2266.
        let i = wilson(8, 10, 0.95);
        assert!((i.lo - 0.4902).abs() < 1e-3, "{i:?}");
        assert!((i.hi - 0.9433).abs() < 1e-3, "{i:?}");
        let none = wilson(0, 50, 0.95);
        assert_eq!(none.lo, 0.0);
        assert!(none.hi > 0.0 && none.hi < 0.1);
        let all = wilson(50, 50, 0.95);
        assert_eq!(all.hi, 1.0);
        assert!(all.lo > 0.9);
        assert_eq!(wilson(0, 0, 0.95), Interval { lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn batch_ci_covers_mean() {
        let b = [1.0, 2.0, 3.0, 4.0];
        let (m, ci) = batch_means_ci(&b, 0.95);
        assert_eq!(m, 2.5);
        // t_{0.975,3} = 3.182, sd/√n = 0.6455
        assert!((ci.hi - (2.5 + 3.182 * 0.6455)).abs() < 1e-2);
    }

    #[test]
    fn interval_serializes_as_pair() {
        let s = serde_json::to_string(&Interval { lo: 0.25, hi: 0.5 }).unwrap();
        assert_eq!(s, "[0.25,0.5]");
    }
}
