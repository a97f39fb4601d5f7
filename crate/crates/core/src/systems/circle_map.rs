//! Random circle diffeomorphisms `x ↦ x + ε·sin(2(x − α))` with `α`
//! uniform on `[0, 2π)`, drawn afresh each step.
//!
//! The step commutes with rotation by π, so antipodal points stay antipodal
//! and every pullback cloud splits into (at least) two antipodal clusters.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cocycle, StateSpace, TimeKind};
use crate::error::{RdsError, Result};
use crate::noise::{NoiseSeq, StepLaw};
use crate::seed::SeedLineage;

#[inline]
fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// One step of the map at noise angle `alpha`, reduced mod 2π.
#[inline]
pub fn circle_step(x: f64, alpha: f64, eps_c: f64) -> f64 {
    wrap(x + eps_c * (2.0 * (x - alpha)).sin())
}

/// Arc-length distance on the circle, in `[0, π]`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleMap {
    eps_c: f64,
}

impl CircleMap {
    pub const DEFAULT_EPS: f64 = 0.3;

    /// `eps_c` must lie in `(0, 1/2)` for the step to be a diffeomorphism.
    pub fn new(eps_c: f64) -> Result<Self> {
        if !(eps_c > 0.0 && eps_c < 0.5) {
            return Err(RdsError::param("eps_c", format!("must lie in (0, 0.5), got {eps_c}")));
        }
        Ok(CircleMap { eps_c })
    }

    pub fn eps_c(&self) -> f64 {
        self.eps_c
    }
}

impl Cocycle for CircleMap {
    type Noise = NoiseSeq;

    fn name(&self) -> &'static str {
        "circlemap"
    }

    fn state_space(&self) -> StateSpace {
        StateSpace::Circle
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Discrete
    }

    fn dt(&self) -> f64 {
        1.0
    }

    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("eps_c".to_string(), self.eps_c)])
    }

    #[inline]
    fn step(&self, x: &mut [f64], noise: &[f64]) {
        x[0] = circle_step(x[0], noise[0], self.eps_c);
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn step_tangent(&self, x: &mut [f64], v: &mut [f64], _k: usize, noise: &[f64]) -> Result<()> {
        let slope = 1.0 + 2.0 * self.eps_c * (2.0 * (x[0] - noise[0])).cos();
        v.iter_mut().for_each(|c| *c *= slope);
        self.step(x, noise);
        Ok(())
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        circle_distance(a[0], b[0])
    }

    fn sample_noise(&self, lineage: SeedLineage, lo: i64, hi: i64) -> Result<NoiseSeq> {
        NoiseSeq::sample(lineage, StepLaw::uniform_angle(), lo, hi)
    }

    /// Lebesgue measure is stationary: for `x` independent of `α`, `x − α` is
    /// uniform and so is the image.
    fn exact_stationary(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        Some(vec![rng.random::<f64>() * TAU])
    }

    fn canonical(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 1 {
            return Err(RdsError::DimensionMismatch { expected: 1, got: x.len() });
        }
        Ok(vec![wrap(x[0])])
    }
}

#[cfg(test)]
/// Rotation by π, reduced mod 2π.
pub(crate) fn antipode(x: f64) -> f64 {
    wrap(x + std::f64::consts::PI)
}
