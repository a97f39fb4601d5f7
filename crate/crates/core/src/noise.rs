//! Noise realisations on a finite time grid.
//!
//! A continuous-time realisation is stored as its increments over grid cells
//! `[k·dt, (k+1)·dt)`, with the anchor `ω(0) = 0`. Shifting the time origin is
//! a pure re-indexing of the cells, so a flow driven by a shifted path
//! consumes bit-identical increments in the same order as the original.
//!
//! Seeded paths draw each block of cells from its own RNG stream keyed by the
//! absolute cell index, which makes leftward extension order-independent.

use std::io::{self, Write};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{RdsError, Result};
use crate::seed::SeedLineage;

/// Cells per RNG block.
pub const BLOCK_CELLS: i64 = 256;

const GRID_TOL: f64 = 1e-9;

/// Converts a time to a whole number of cells, rejecting off-grid times.
pub fn cells_of(what: &'static str, t: f64, dt: f64) -> Result<i64> {
    if !t.is_finite() {
        return Err(RdsError::param(what, "must be finite"));
    }
    let n = (t / dt).round();
    if (t - n * dt).abs() > GRID_TOL * t.abs().max(1.0) {
        return Err(RdsError::NotGridAligned { what, value: t, dt });
    }
    Ok(n as i64)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(RdsError::param("dt", format!("must be positive, got {dt}")))
    }
}

/// Fills `out` with `width` values per cell for absolute cells `lo..hi`.
/// Each block of [`BLOCK_CELLS`] cells is generated in full from its own
/// stream and then cropped, so the value of a cell never depends on `lo`.
fn fill_cells(
    lineage: &SeedLineage,
    lo: i64,
    hi: i64,
    width: usize,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity((hi - lo).max(0) as usize * width);
    if hi <= lo {
        return out;
    }
    let mut scratch = vec![0.0; BLOCK_CELLS as usize * width];
    let first = lo.div_euclid(BLOCK_CELLS);
    let last = (hi - 1).div_euclid(BLOCK_CELLS);
    for block in first..=last {
        let mut rng = lineage.block_rng(block);
        for v in scratch.iter_mut() {
            *v = draw(&mut rng);
        }
        let start = block * BLOCK_CELLS;
        let a = (lo.max(start) - start) as usize;
        let b = (hi.min(start + BLOCK_CELLS) - start) as usize;
        out.extend_from_slice(&scratch[a * width..b * width]);
    }
    out
}

/// Common interface over continuous- and discrete-time noise windows.
pub trait NoiseWindow: Clone + Send + Sync {
    /// Time per cell.
    fn dt(&self) -> f64;
    /// Number of reals consumed per cell.
    fn width(&self) -> usize;
    /// Half-open range of local cell indices; the window is
    /// `[lo·dt, hi·dt]`.
    fn cell_range(&self) -> (i64, i64);
    /// Noise for local cell `k`.
    fn cell(&self, k: i64) -> &[f64];
    /// Re-index so that time `s·dt` becomes the new origin.
    fn shift_cells(&self, s: i64) -> Self;
    /// Extend the window leftward to start at cell `new_lo`.
    fn extend_left_cells(&self, new_lo: i64) -> Self;

    fn window(&self) -> (f64, f64) {
        let (lo, hi) = self.cell_range();
        (lo as f64 * self.dt(), hi as f64 * self.dt())
    }

    /// `θ^τ`: the realisation seen from time `tau`.
    fn shift(&self, tau: f64) -> Result<Self> {
        Ok(self.shift_cells(cells_of("tau", tau, self.dt())?))
    }

    fn extend_left(&self, new_t_lo: f64) -> Result<Self> {
        let new_lo = cells_of("new_t_lo", new_t_lo, self.dt())?;
        let (lo, _) = self.cell_range();
        if new_lo > lo {
            return Err(RdsError::param(
                "new_t_lo",
                format!("{new_t_lo} is right of the current window start"),
            ));
        }
        Ok(self.extend_left_cells(new_lo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PathOrigin {
    /// Wiener increments drawn from a seed lineage.
    Wiener(SeedLineage),
    /// A fixed, hand-constructed path; extensions are flat (zero increments).
    Deterministic,
}

/// A `d`-dimensional noise realisation `ω` on a grid window containing 0.
#[derive(Debug, Clone)]
pub struct NoisePath {
    dim: usize,
    dt: f64,
    lo: i64,
    hi: i64,
    /// Increments for local cells `lo..hi`, `dim` values each.
    increments: Arc<[f64]>,
    origin: PathOrigin,
    /// Absolute cell index of local cell 0.
    offset: i64,
}

impl NoisePath {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> PathOrigin {
        self.origin
    }

    /// Absolute cell index (relative to the unshifted realisation) of local
    /// cell 0.
    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn num_cells(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    /// All increments, cell-major.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Builds a deterministic path from its values at grid times `0..=n`
    /// (the first value must be the anchor 0).
    fn from_grid_values(dim: usize, dt: f64, values: &[Vec<f64>]) -> Self {
        let mut incs = Vec::with_capacity((values.len() - 1) * dim);
        for w in values.windows(2) {
            incs.extend(w[1].iter().zip(&w[0]).map(|(b, a)| b - a));
        }
        NoisePath {
            dim,
            dt,
            lo: 0,
            hi: values.len() as i64 - 1,
            increments: incs.into(),
            origin: PathOrigin::Deterministic,
            offset: 0,
        }
    }

    /// The identically zero path on `[0, t_hi]`.
    pub fn zero(dim: usize, dt: f64, t_hi: f64) -> Result<Self> {
        check_dt(dt)?;
        let hi = cells_of("t_hi", t_hi, dt)?;
        if hi < 0 {
            return Err(RdsError::InvalidWindow { lo: 0.0, hi: t_hi });
        }
        Ok(NoisePath {
            dim,
            dt,
            lo: 0,
            hi,
            increments: vec![0.0; hi as usize * dim].into(),
            origin: PathOrigin::Deterministic,
            offset: 0,
        })
    }

    /// `ω(t)`: exact partial sums at grid times, linear in between.
    ///
    /// Sums run outward from the anchor at 0, so values at existing grid
    /// times do not change when the window is extended.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let (t_lo, t_hi) = self.window();
        if !(t >= t_lo - GRID_TOL * t_lo.abs().max(1.0) && t <= t_hi + GRID_TOL * t_hi.abs().max(1.0))
        {
            return Err(RdsError::OutsideWindow { t, lo: t_lo, hi: t_hi });
        }
        let x = t / self.dt;
        let near = x.round();
        if (x - near).abs() <= GRID_TOL * x.abs().max(1.0) {
            return Ok(self.grid_value(near as i64));
        }
        let n = x.floor() as i64;
        let frac = x - n as f64;
        let a = self.grid_value(n);
        let inc = self.cell(n);
        Ok(a.iter().zip(inc).map(|(a, g)| a + frac * g).collect())
    }

    fn grid_value(&self, n: i64) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        if n >= 0 {
            for k in 0..n {
                for (a, g) in acc.iter_mut().zip(self.cell(k)) {
                    *a += g;
                }
            }
        } else {
            for k in (n..0).rev() {
                for (a, g) in acc.iter_mut().zip(self.cell(k)) {
                    *a -= g;
                }
            }
        }
        acc
    }

    /// Writes `t, w_1..w_d` at every grid time of the window.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for i in 1..=self.dim {
            write!(out, ",w_{i}")?;
        }
        writeln!(out)?;
        let mut rows: Vec<(i64, Vec<f64>)> = Vec::with_capacity(self.num_cells() + 1);
        let mut acc = vec![0.0; self.dim];
        for k in (self.lo..0).rev() {
            for (a, g) in acc.iter_mut().zip(self.cell(k)) {
                *a -= g;
            }
            rows.push((k, acc.clone()));
        }
        rows.reverse();
        acc.iter_mut().for_each(|a| *a = 0.0);
        if self.lo <= 0 && 0 <= self.hi {
            rows.push((0, acc.clone()));
        }
        for k in 0..self.hi {
            for (a, g) in acc.iter_mut().zip(self.cell(k)) {
                *a += g;
            }
            rows.push((k + 1, acc.clone()));
        }
        for (k, w) in rows {
            write!(out, "{}", k as f64 * self.dt)?;
            for v in w {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

impl NoiseWindow for NoisePath {
    fn dt(&self) -> f64 {
        self.dt
    }

    fn width(&self) -> usize {
        self.dim
    }

    fn cell_range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    #[inline]
    fn cell(&self, k: i64) -> &[f64] {
        let i = (k - self.lo) as usize * self.dim;
        &self.increments[i..i + self.dim]
    }

    fn shift_cells(&self, s: i64) -> Self {
        NoisePath {
            lo: self.lo - s,
            hi: self.hi - s,
            offset: self.offset + s,
            increments: Arc::clone(&self.increments),
            ..*self
        }
    }

    fn extend_left_cells(&self, new_lo: i64) -> Self {
        if new_lo >= self.lo {
            return self.clone();
        }
        let mut incs = match self.origin {
            PathOrigin::Wiener(lineage) => {
                let sd = self.dt.sqrt();
                fill_cells(
                    &lineage,
                    new_lo + self.offset,
                    self.lo + self.offset,
                    self.dim,
                    |rng| sd * rng.sample::<f64, _>(StandardNormal),
                )
            }
            PathOrigin::Deterministic => vec![0.0; (self.lo - new_lo) as usize * self.dim],
        };
        incs.extend_from_slice(&self.increments);
        NoisePath {
            lo: new_lo,
            increments: incs.into(),
            ..*self
        }
    }
}

/// Samples a Wiener path with independent `N(0, dt·I_d)` increments on
/// `[t_lo, t_hi]`.
pub fn sample_wiener(
    lineage: SeedLineage,
    dim: usize,
    t_lo: f64,
    t_hi: f64,
    dt: f64,
) -> Result<NoisePath> {
    check_dt(dt)?;
    if dim == 0 {
        return Err(RdsError::param("d", "must be at least 1"));
    }
    if !(t_lo <= 0.0 && 0.0 <= t_hi) {
        return Err(RdsError::InvalidWindow { lo: t_lo, hi: t_hi });
    }
    let lo = cells_of("t_lo", t_lo, dt)?;
    let hi = cells_of("t_hi", t_hi, dt)?;
    let sd = dt.sqrt();
    let increments = fill_cells(&lineage, lo, hi, dim, |rng| {
        sd * rng.sample::<f64, _>(StandardNormal)
    });
    Ok(NoisePath {
        dim,
        dt,
        lo,
        hi,
        increments: increments.into(),
        origin: PathOrigin::Wiener(lineage),
        offset: 0,
    })
}

/// The two deterministic steering realisations used to move trajectories
/// of an additive-noise system where we want them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Steering {
    /// `ω(t) = η₀·t·(y − x)` on `[0, 1/η₀]`, constant afterwards.
    Transit { x: Vec<f64>, y: Vec<f64>, eta0: f64 },
    /// `ω(t) = (η₁η₂·t, 0, …)` on `[0, 1/η₁]`, then `(η₂, 0, …)`.
    Contract { eta1: f64, eta2: f64 },
}

impl Steering {
    /// Value of the steering path at time `t ≥ 0`.
    pub fn value(&self, dim: usize, t: f64) -> Vec<f64> {
        match self {
            Steering::Transit { x, y, eta0 } => {
                let s = (eta0 * t).min(1.0);
                x.iter().zip(y).map(|(a, b)| s * (b - a)).collect()
            }
            Steering::Contract { eta1, eta2 } => {
                let mut w = vec![0.0; dim];
                w[0] = if t <= 1.0 / eta1 { eta1 * eta2 * t } else { *eta2 };
                w
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(RdsError::param(name, format!("must be positive, got {v}")))
            }
        };
        match self {
            Steering::Transit { x, y, eta0 } => {
                positive("eta0", *eta0)?;
                for v in [x, y] {
                    if v.len() != dim {
                        return Err(RdsError::DimensionMismatch { expected: dim, got: v.len() });
                    }
                }
                Ok(())
            }
            Steering::Contract { eta1, eta2 } => {
                positive("eta1", *eta1)?;
                positive("eta2", *eta2)
            }
        }
    }
}

/// Deterministic steering path on `[0, t_hi]`. Increments are the exact
/// differences of the closed-form values at grid times.
pub fn steering_path(kind: &Steering, dim: usize, dt: f64, t_hi: f64) -> Result<NoisePath> {
    check_dt(dt)?;
    kind.validate(dim)?;
    let n = cells_of("t_hi", t_hi, dt)?;
    if n < 0 {
        return Err(RdsError::InvalidWindow { lo: 0.0, hi: t_hi });
    }
    let values: Vec<Vec<f64>> = (0..=n).map(|k| kind.value(dim, k as f64 * dt)).collect();
    Ok(NoisePath::from_grid_values(dim, dt, &values))
}

/// One-step law for discrete-time noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum StepLaw {
    Uniform { low: f64, high: f64 },
    /// Uniform over a finite set of values.
    Choice { values: Vec<f64> },
}

impl StepLaw {
    pub fn uniform_angle() -> Self {
        StepLaw::Uniform {
            low: 0.0,
            high: std::f64::consts::TAU,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            StepLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            StepLaw::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

/// I.i.d. discrete-time noise `(ξ_k)` on integer indices `lo..hi`.
#[derive(Debug, Clone)]
pub struct NoiseSeq {
    lo: i64,
    hi: i64,
    draws: Arc<[f64]>,
    law: Arc<StepLaw>,
    lineage: SeedLineage,
    offset: i64,
}

impl NoiseSeq {
    pub fn sample(lineage: SeedLineage, law: StepLaw, lo: i64, hi: i64) -> Result<Self> {
        if !(lo <= 0 && 0 <= hi) {
            return Err(RdsError::InvalidWindow { lo: lo as f64, hi: hi as f64 });
        }
        if let StepLaw::Choice { values } = &law {
            if values.is_empty() {
                return Err(RdsError::param("law", "choice set is empty"));
            }
        }
        let draws = fill_cells(&lineage, lo, hi, 1, |rng| law.draw(rng));
        Ok(NoiseSeq {
            lo,
            hi,
            draws: draws.into(),
            law: Arc::new(law),
            lineage,
            offset: 0,
        })
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    pub fn lineage(&self) -> SeedLineage {
        self.lineage
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }
}

impl NoiseWindow for NoiseSeq {
    fn dt(&self) -> f64 {
        1.0
    }

    fn width(&self) -> usize {
        1
    }

    fn cell_range(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    #[inline]
    fn cell(&self, k: i64) -> &[f64] {
        let i = (k - self.lo) as usize;
        &self.draws[i..i + 1]
    }

    fn shift_cells(&self, s: i64) -> Self {
        NoiseSeq {
            lo: self.lo - s,
            hi: self.hi - s,
            offset: self.offset + s,
            draws: Arc::clone(&self.draws),
            law: Arc::clone(&self.law),
            lineage: self.lineage,
        }
    }

    fn extend_left_cells(&self, new_lo: i64) -> Self {
        if new_lo >= self.lo {
            return self.clone();
        }
        let law = &self.law;
        let mut draws = fill_cells(
            &self.lineage,
            new_lo + self.offset,
            self.lo + self.offset,
            1,
            |rng| law.draw(rng),
        );
        draws.extend_from_slice(&self.draws);
        NoiseSeq {
            lo: new_lo,
            draws: draws.into(),
            ..self.clone()
        }
    }
}

/// Summary statistics of a path's increments, per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementStats {
    pub cells: usize,
    pub dt: f64,
    pub mean: Vec<f64>,
    /// `mean / sqrt(dt / N)`.
    pub z: Vec<f64>,
    /// Sample variance divided by `dt`.
    pub variance_ratio: Vec<f64>,
    /// Largest absolute cross-coordinate correlation.
    pub max_abs_corr: f64,
}

impl IncrementStats {
    pub fn of(path: &NoisePath) -> Self {
        let n = path.num_cells();
        let d = path.dim();
        let nf = n as f64;
        let mut mean = vec![0.0; d];
        for c in path.increments().chunks_exact(d) {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut cov = vec![0.0; d * d];
        for c in path.increments().chunks_exact(d) {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (c[i] - mean[i]) * (c[j] - mean[j]);
                }
            }
        }
        cov.iter_mut().for_each(|v| *v /= nf - 1.0);
        let se = (path.dt / nf).sqrt();
        let mut max_abs_corr: f64 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                let r = cov[i * d + j] / (cov[i * d + i] * cov[j * d + j]).sqrt();
                max_abs_corr = max_abs_corr.max(r.abs());
            }
        }
        IncrementStats {
            cells: n,
            dt: path.dt,
            z: mean.iter().map(|m| m / se).collect(),
            mean,
            variance_ratio: (0..d).map(|i| cov[i * d + i] / path.dt).collect(),
            max_abs_corr,
        }
    }

    /// Mean within 4 standard errors, variance within 5% of `dt`, and
    /// cross-correlations below 0.05.
    pub fn passes(&self) -> bool {
        self.z.iter().all(|z| z.abs() < 4.0)
            && self.variance_ratio.iter().all(|r| (r - 1.0).abs() <= 0.05)
            && self.max_abs_corr < 0.05
    }
}
