//! Gradient flow of the rotationally symmetric double-well potential with
//! additive white noise: `du = (1 − |u|²)u dt + dW`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cocycle, StateSpace, TimeKind};
use crate::error::{RdsError, Result};
use crate::noise::{sample_wiener, NoisePath};
use crate::seed::SeedLineage;

/// `b(y) = (1 − |y|²) y`.
pub fn drift(y: &[f64]) -> Vec<f64> {
    let c = 1.0 - norm_sq(y);
    y.iter().map(|v| c * v).collect()
}

/// `Db(y) = (1 − |y|²) I − 2 y yᵀ`, row-major.
pub fn drift_jacobian(y: &[f64]) -> Vec<f64> {
    let d = y.len();
    let c = 1.0 - norm_sq(y);
    let mut j = vec![0.0; d * d];
    for r in 0..d {
        for s in 0..d {
            j[r * d + s] = -2.0 * y[r] * y[s] + if r == s { c } else { 0.0 };
        }
    }
    j
}

/// One-sided Lipschitz constant of [`drift`].
///
/// `Db(y)` is symmetric with eigenvalues `1 − |y|²` (on `y^⊥`) and
/// `1 − 3|y|²` (along `y`), so the supremum of its spectrum is 1, attained
/// at the origin.
pub fn one_sided_lipschitz_constant() -> f64 {
    1.0
}

#[inline]
fn norm_sq(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

/// The double-well system integrated by (optionally tamed) Euler–Maruyama:
/// `u ← u + b(u)·dt / (1 + dt·|b(u)|) + ΔW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    d: usize,
    dt: f64,
    tamed: bool,
}

impl DoubleWell {
    pub const DEFAULT_DT: f64 = 1e-3;

    pub fn new(d: usize, dt: f64) -> Result<Self> {
        Self::with_taming(d, dt, true)
    }

    pub fn with_taming(d: usize, dt: f64, tamed: bool) -> Result<Self> {
        if d == 0 {
            return Err(RdsError::param("d", "must be at least 1"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(RdsError::param("dt", format!("must be positive, got {dt}")));
        }
        Ok(DoubleWell { d, dt, tamed })
    }

    pub fn tamed(&self) -> bool {
        self.tamed
    }

    /// Drift multiplier `dt / (1 + dt·|b|)` (or `dt` untamed) given
    /// `c = 1 − |y|²` and `|y|²`.
    #[inline]
    fn drift_scale(&self, c: f64, r2: f64) -> f64 {
        if self.tamed {
            self.dt / (1.0 + self.dt * c.abs() * r2.sqrt())
        } else {
            self.dt
        }
    }
}

impl Cocycle for DoubleWell {
    type Noise = NoisePath;

    fn name(&self) -> &'static str {
        "doublewell"
    }

    fn state_space(&self) -> StateSpace {
        StateSpace::Euclidean(self.d)
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Continuous
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("d".to_string(), self.d as f64),
            ("tamed".to_string(), if self.tamed { 1.0 } else { 0.0 }),
        ])
    }

    #[inline]
    fn step(&self, x: &mut [f64], noise: &[f64]) {
        let r2 = norm_sq(x);
        let c = 1.0 - r2;
        let gain = 1.0 + self.drift_scale(c, r2) * c;
        for (v, g) in x.iter_mut().zip(noise) {
            *v = *v * gain + g;
        }
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn step_tangent(&self, x: &mut [f64], v: &mut [f64], k: usize, noise: &[f64]) -> Result<()> {
        let d = self.d;
        let r2 = norm_sq(x);
        let c = 1.0 - r2;
        let h = self.drift_scale(c, r2);
        // The taming factor contributes −dt²·b·(bᵀ·Db·v) / (|b|·(1 + dt|b|)²),
        // which collapses to −dt²·c²·(c − 2|y|²)·(y·v) / (|b|·(1 + dt|b|)²) · y.
        let nb = c.abs() * r2.sqrt();
        let tame = if self.tamed && nb > 0.0 {
            let denom = 1.0 + self.dt * nb;
            self.dt * self.dt * c * c * (c - 2.0 * r2) / (denom * denom * nb)
        } else {
            0.0
        };
        for j in 0..k {
            let yv: f64 = (0..d).map(|i| x[i] * v[i * k + j]).sum();
            for i in 0..d {
                let col = &mut v[i * k + j];
                *col += h * (c * *col - 2.0 * x[i] * yv) - tame * yv * x[i];
            }
        }
        self.step(x, noise);
        Ok(())
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    }

    fn sample_noise(&self, lineage: SeedLineage, lo: i64, hi: i64) -> Result<NoisePath> {
        sample_wiener(lineage, self.d, lo as f64 * self.dt, hi as f64 * self.dt, self.dt)
    }

    /// A point of the unit sphere, where the potential is minimal.
    fn burn_in_start(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        x[0] = 1.0;
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn drift_values() {
        assert_eq!(drift(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(drift(&[1.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(drift(&[2.0, 0.0]), vec![-6.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(drift(&[s, s]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn jacobian_values() {
        assert_eq!(drift_jacobian(&[0.0, 0.0]), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(drift_jacobian(&[1.0, 0.0]), vec![-2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for _ in 0..100 {
            let y = loop {
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                if norm_sq(&y) <= 4.0 {
                    break y;
                }
            };
            let j = drift_jacobian(&y);
            for s in 0..3 {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[s] += h;
                ym[s] -= h;
                let (bp, bm) = (drift(&yp), drift(&ym));
                for r in 0..3 {
                    let fd = (bp[r] - bm[r]) / (2.0 * h);
                    assert!((fd - j[r * 3 + s]).abs() < 1e-6, "y={y:?} r={r} s={s}");
                }
            }
        }
    }

    #[test]
    fn one_sided_lipschitz_spot_checks() {
        let l = one_sided_lipschitz_constant();
        let (y1, y2) = ([0.0, 0.0], [1.0, 0.0]);
        let b2 = drift(&y2);
        let lhs: f64 = b2.iter().zip(y2.iter().zip(&y1)).map(|(b, (p, q))| b * (p - q)).sum();
        assert_eq!(lhs, 0.0);
        assert!(lhs <= l);
    }

    #[test]
    fn untamed_step_is_plain_euler() {
        let sys = DoubleWell::with_taming(2, 0.01, false).unwrap();
        let mut x = vec![2.0, 0.0];
        sys.step(&mut x, &[0.1, -0.2]);
        assert!((x[0] - (2.0 - 0.06 + 0.1)).abs() < 1e-15);
        assert_eq!(x[1], -0.2);
    }

    #[test]
    fn tamed_step_bounds_drift_increment() {
        let sys = DoubleWell::new(2, 0.01).unwrap();
        let mut x = vec![100.0, 0.0];
        sys.step(&mut x, &[0.0, 0.0]);
        assert!(x[0] > 99.0 && x[0] < 100.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DoubleWell::new(0, 1e-3).is_err());
        assert!(DoubleWell::new(2, 0.0).is_err());
        assert!(DoubleWell::new(2, f64::NAN).is_err());
    }
}
