//! Random dynamical systems as cocycles over a grid noise window.
//!
//! A system supplies a deterministic one-cell stepper; the flow
//! `φ(t, ω)x` is the composition of that stepper over the cells of `[0, t)`.
//! Because shifting a noise window only re-indexes cells, the cocycle
//! identity `φ(s+t, ω) = φ(t, θ^s ω) ∘ φ(s, ω)` holds bit-for-bit.

mod circle_map;
mod double_well;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::ops::ControlFlow;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RdsError, Result};
use crate::noise::{cells_of, NoiseWindow};
use crate::seed::SeedLineage;

pub use circle_map::{circle_distance, circle_step, CircleMap};
pub use double_well::{drift, drift_jacobian, one_sided_lipschitz_constant, DoubleWell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "dim")]
pub enum StateSpace {
    Euclidean(usize),
    /// The circle `ℝ/2πℤ` with arc-length distance.
    Circle,
}

/// Serializable description of a system, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub name: String,
    pub state_space: StateSpace,
    pub time_kind: TimeKind,
    pub dt: f64,
    pub params: BTreeMap<String, f64>,
}

/// A random dynamical system driven by memoryless noise.
pub trait Cocycle: Send + Sync {
    type Noise: NoiseWindow;

    fn name(&self) -> &'static str;
    fn state_space(&self) -> StateSpace;
    fn time_kind(&self) -> TimeKind;
    /// Time per noise cell. Fixed at 1 for discrete time.
    fn dt(&self) -> f64;
    fn params(&self) -> BTreeMap<String, f64>;

    /// Dimension of the state vector.
    fn dim(&self) -> usize {
        match self.state_space() {
            StateSpace::Euclidean(d) => d,
            StateSpace::Circle => 1,
        }
    }

    /// Advances `x` across one cell with noise `noise`.
    fn step(&self, x: &mut [f64], noise: &[f64]);

    fn has_jacobian(&self) -> bool {
        false
    }

    /// Advances the tangent matrix `v` (`dim × k`, row-major) by the
    /// derivative of the one-cell map at `x`, then advances `x`.
    fn step_tangent(&self, _x: &mut [f64], _v: &mut [f64], _k: usize, _noise: &[f64]) -> Result<()> {
        Err(RdsError::MissingJacobian(self.name()))
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64;

    /// Fresh noise for cells `lo..hi` from `lineage`.
    fn sample_noise(&self, lineage: SeedLineage, lo: i64, hi: i64) -> Result<Self::Noise>;

    /// Exact draw from the stationary law, when it is known in closed form.
    fn exact_stationary(&self, _rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        None
    }

    /// Starting point for burn-in sampling of the stationary law.
    fn burn_in_start(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Brings a user-supplied state into canonical form (e.g. angles mod 2π).
    fn canonical(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(RdsError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.to_vec())
    }

    fn info(&self) -> SystemInfo {
        SystemInfo {
            name: self.name().to_string(),
            state_space: self.state_space(),
            time_kind: self.time_kind(),
            dt: self.dt(),
            params: self.params(),
        }
    }
}

/// Number of cells in `[0, t]`, checked against the window of `noise`.
pub fn horizon_cells<N: NoiseWindow>(noise: &N, t: f64) -> Result<i64> {
    let n = cells_of("t", t, noise.dt())?;
    let (lo, hi) = noise.cell_range();
    if n < 0 || lo > 0 || n > hi {
        let (a, b) = noise.window();
        return Err(RdsError::OutsideWindow { t, lo: a, hi: b });
    }
    Ok(n)
}

fn check_noise<S: Cocycle>(sys: &S, noise: &S::Noise) -> Result<()> {
    if noise.dt() != sys.dt() {
        return Err(RdsError::param(
            "dt",
            format!("noise dt {} differs from system dt {}", noise.dt(), sys.dt()),
        ));
    }
    Ok(())
}

/// `φ(t, ω)x₀`.
pub fn flow<S: Cocycle>(sys: &S, noise: &S::Noise, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    check_noise(sys, noise)?;
    let n = horizon_cells(noise, t)?;
    let mut x = sys.canonical(x0)?;
    for k in 0..n {
        sys.step(&mut x, noise.cell(k));
    }
    Ok(x)
}

/// The two-point motion `(φ(t, ω)x₀, φ(t, ω)y₀)`.
pub fn flow_pair<S: Cocycle>(
    sys: &S,
    noise: &S::Noise,
    x0: &[f64],
    y0: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut states = vec![sys.canonical(x0)?, sys.canonical(y0)?];
    flow_many(sys, noise, &mut states, t)?;
    let y = states.pop().unwrap();
    let x = states.pop().unwrap();
    Ok((x, y))
}

/// Advances every state in `states` by `φ(t, ω)` in lock-step.
pub fn flow_many<S: Cocycle>(sys: &S, noise: &S::Noise, states: &mut [Vec<f64>], t: f64) -> Result<()> {
    check_noise(sys, noise)?;
    let n = horizon_cells(noise, t)?;
    for s in states.iter() {
        if s.len() != sys.dim() {
            return Err(RdsError::DimensionMismatch { expected: sys.dim(), got: s.len() });
        }
    }
    for k in 0..n {
        let g = noise.cell(k);
        for s in states.iter_mut() {
            sys.step(s, g);
        }
    }
    Ok(())
}

/// Cells between merges of coinciding states in [`flow_many_merging`].
const MERGE_EVERY: i64 = 256;

/// Same result as [`flow_many`], but states that become bitwise equal are
/// merged and stepped once. Worth it when many states share one noise and
/// synchronise.
pub fn flow_many_merging<S: Cocycle>(
    sys: &S,
    noise: &S::Noise,
    states: &mut [Vec<f64>],
    t: f64,
) -> Result<()> {
    check_noise(sys, noise)?;
    let n = horizon_cells(noise, t)?;
    for s in states.iter() {
        if s.len() != sys.dim() {
            return Err(RdsError::DimensionMismatch { expected: sys.dim(), got: s.len() });
        }
    }
    let mut reps: Vec<Vec<f64>> = states.to_vec();
    let mut owner: Vec<usize> = (0..states.len()).collect();
    let mut k = 0;
    while k < n {
        let end = (k + MERGE_EVERY).min(n);
        for c in k..end {
            let g = noise.cell(c);
            for s in reps.iter_mut() {
                sys.step(s, g);
            }
        }
        k = end;
        if reps.len() > 1 {
            let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(reps.len());
            let mut merged = Vec::new();
            let remap: Vec<usize> = reps
                .into_iter()
                .map(|s| {
                    let key: Vec<u64> = s.iter().map(|v| v.to_bits()).collect();
                    *seen.entry(key).or_insert_with(|| {
                        merged.push(s);
                        merged.len() - 1
                    })
                })
                .collect();
            owner.iter_mut().for_each(|o| *o = remap[*o]);
            reps = merged;
        }
    }
    for (s, &o) in states.iter_mut().zip(&owner) {
        s.clone_from(&reps[o]);
    }
    Ok(())
}

/// Advances `states` cell by cell for `n` cells, calling `visit` at every
/// cell index listed in `checkpoints` (ascending; `0` allowed). Stops early
/// when `visit` breaks. Returns the number of cells advanced.
pub fn run_with_checkpoints<S, F>(
    sys: &S,
    noise: &S::Noise,
    states: &mut [Vec<f64>],
    n: i64,
    checkpoints: &[i64],
    mut visit: F,
) -> Result<i64>
where
    S: Cocycle,
    F: FnMut(i64, &[Vec<f64>]) -> ControlFlow<()>,
{
    check_noise(sys, noise)?;
    let (lo, hi) = noise.cell_range();
    if lo > 0 || n > hi || n < 0 {
        let (a, b) = noise.window();
        return Err(RdsError::OutsideWindow { t: n as f64 * noise.dt(), lo: a, hi: b });
    }
    let mut next = checkpoints.iter().copied().filter(|&c| c <= n).peekable();
    let mut k = 0;
    loop {
        while next.peek() == Some(&k) {
            next.next();
            if visit(k, states).is_break() {
                return Ok(k);
            }
        }
        if k == n {
            return Ok(k);
        }
        let g = noise.cell(k);
        for s in states.iter_mut() {
            sys.step(s, g);
        }
        k += 1;
    }
}

/// `(φ(t, ω)x₀, Dφ(t, ω)x₀ · v₀)` where `v0` is `dim × k`, row-major.
/// No renormalisation is applied.
pub fn flow_with_tangent<S: Cocycle>(
    sys: &S,
    noise: &S::Noise,
    x0: &[f64],
    v0: &[f64],
    k: usize,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !sys.has_jacobian() {
        return Err(RdsError::MissingJacobian(sys.name()));
    }
    if k == 0 || v0.len() != sys.dim() * k {
        return Err(RdsError::param("v0", format!("expected a {}x{k} matrix, k >= 1", sys.dim())));
    }
    check_noise(sys, noise)?;
    let n = horizon_cells(noise, t)?;
    let mut x = sys.canonical(x0)?;
    let mut v = v0.to_vec();
    for c in 0..n {
        sys.step_tangent(&mut x, &mut v, k, noise.cell(c))?;
    }
    Ok((x, v))
}

/// Largest coordinate difference between `φ(s+t, ω)x₀` and
/// `φ(t, θ^s ω)(φ(s, ω)x₀)`, for `ω` drawn from `lineage` on `[0, s+t]`.
pub fn cocycle_defect<S: Cocycle>(sys: &S, lineage: SeedLineage, x0: &[f64], s: f64, t: f64) -> Result<f64> {
    let dt = sys.dt();
    let (ns, nt) = (cells_of("s", s, dt)?, cells_of("t", t, dt)?);
    if ns < 0 || nt < 0 {
        return Err(RdsError::param("s", "s and t must be non-negative"));
    }
    let noise = sys.sample_noise(lineage, 0, ns + nt)?;
    let direct = flow(sys, &noise, x0, s + t)?;
    let mid = flow(sys, &noise, x0, s)?;
    let composed = flow(sys, &noise.shift(s)?, &mid, t)?;
    Ok(direct
        .iter()
        .zip(&composed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Writes `t, x_1..x_d` (or `t, angle`) every `every` cells along
/// `φ(·, ω)x₀` on `[0, t]`.
pub fn write_trajectory_csv<S: Cocycle, W: Write>(
    sys: &S,
    noise: &S::Noise,
    x0: &[f64],
    t: f64,
    every: usize,
    mut out: W,
) -> Result<()> {
    let n = horizon_cells(noise, t)?;
    let every = every.max(1) as i64;
    let mut checkpoints: Vec<i64> = (0..=n).step_by(every as usize).collect();
    if checkpoints.last() != Some(&n) {
        checkpoints.push(n);
    }
    let header = match sys.state_space() {
        StateSpace::Circle => "t,angle".to_string(),
        StateSpace::Euclidean(d) => {
            let cols: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
            format!("t,{}", cols.join(","))
        }
    };
    let mut lines = vec![header];
    let mut states = vec![sys.canonical(x0)?];
    run_with_checkpoints(sys, noise, &mut states, n, &checkpoints, |k, s| {
        let vals: Vec<String> = s[0].iter().map(|v| v.to_string()).collect();
        lines.push(format!("{},{}", k as f64 * noise.dt(), vals.join(",")));
        ControlFlow::Continue(())
    })?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    Ok(())
}
