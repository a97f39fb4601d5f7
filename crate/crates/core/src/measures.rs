//! Pullback sampling of the invariant random measure `μ_ω` and estimators of
//! the number of atoms it carries.
//!
//! For a fixed realisation `ω` on `(−∞, 0]`, pushing stationary draws through
//! `φ(T, θ^{−T}ω)` gives an empirical approximation of `μ_ω` that converges
//! as `T` grows. When `μ_ω` is a uniform mixture of `n` point masses, two
//! independent draws pulled back with the same `ω` end up in the same atom
//! with probability `1/n`; that gives one estimator of `n`. Counting
//! single-linkage clusters of a larger cloud gives a second, independent one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RdsError, Result};
use crate::noise::{cells_of, NoiseWindow};
use crate::seed::SeedLineage;
use crate::stats::{wilson, Interval};
use crate::systems::{flow_many, flow_many_merging, Cocycle};

/// Sub-stream tags under an experiment's master lineage.
const OMEGA_TAG: u64 = 0x6f6d;
const SAMPLER_TAG: u64 = 0x7268;

/// How draws from the stationary law `ρ` are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SamplerMode {
    /// Closed-form stationary law (circle map: uniform angle).
    Exact,
    /// Forward run of length `t_burn` from the system's burn-in start, with
    /// fresh noise per draw.
    BurnIn { t_burn: f64 },
}

impl SamplerMode {
    pub const DEFAULT_T_BURN: f64 = 100.0;

    /// `Exact` when the system has a closed-form stationary law, otherwise
    /// burn-in with the default length.
    pub fn default_for<S: Cocycle>(sys: &S) -> Self {
        let mut probe = SeedLineage::new(0).rng();
        if sys.exact_stationary(&mut probe).is_some() {
            SamplerMode::Exact
        } else {
            SamplerMode::BurnIn { t_burn: Self::DEFAULT_T_BURN }
        }
    }
}

/// Produces i.i.d. draws from `ρ`; draw `i` depends only on
/// `(lineage, i)`.
#[derive(Debug, Clone, Copy)]
pub struct StationarySampler {
    pub mode: SamplerMode,
    pub lineage: SeedLineage,
}

impl StationarySampler {
    pub fn new(mode: SamplerMode, lineage: SeedLineage) -> Self {
        StationarySampler { mode, lineage }
    }

    pub fn draw<S: Cocycle>(&self, sys: &S, i: u64) -> Result<Vec<f64>> {
        let lineage = self.lineage.derive(i);
        match self.mode {
            SamplerMode::Exact => sys
                .exact_stationary(&mut lineage.rng())
                .ok_or(RdsError::SamplerUnavailable(sys.name())),
            SamplerMode::BurnIn { t_burn } => {
                let n = cells_of("t_burn", t_burn, sys.dt())?;
                if n < 0 {
                    return Err(RdsError::param("t_burn", "must be non-negative"));
                }
                let noise = sys.sample_noise(lineage, 0, n)?;
                let mut x = vec![sys.burn_in_start()];
                flow_many(sys, &noise, &mut x, t_burn)?;
                Ok(x.pop().unwrap())
            }
        }
    }

    pub fn draws<S: Cocycle>(&self, sys: &S, m: usize) -> Result<Vec<Vec<f64>>> {
        (0..m as u64).map(|i| self.draw(sys, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub omega: SeedLineage,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub m: usize,
}

/// Uniformly weighted point cloud approximating `μ_ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRandomMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl EmpiricalRandomMeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![1.0 / self.atoms.len() as f64; self.atoms.len()]
    }

    /// Largest pairwise distance between atoms.
    pub fn diameter<S: Cocycle>(&self, sys: &S) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                d = d.max(sys.distance(a, b));
            }
        }
        d
    }
}

/// Pushes `atoms` through `φ(T, θ^{−T}ω)` where `ω` on `[−T, 0]` comes from
/// `omega`. Extending `T` keeps the noise on the overlap unchanged.
pub fn pullback_atoms<S: Cocycle>(
    sys: &S,
    omega: SeedLineage,
    horizon: f64,
    atoms: &mut [Vec<f64>],
) -> Result<()> {
    let n = cells_of("T", horizon, sys.dt())?;
    if n < 0 {
        return Err(RdsError::param("T", "must be non-negative"));
    }
    let past = sys.sample_noise(omega, -n, 0)?;
    flow_many_merging(sys, &past.shift_cells(-n), atoms, horizon)
}

/// `m` stationary draws pulled back over horizon `T` with the noise fixed by
/// `omega`.
pub fn pullback_sample<S: Cocycle>(
    sys: &S,
    omega: SeedLineage,
    horizon: f64,
    m: usize,
    sampler: &StationarySampler,
) -> Result<EmpiricalRandomMeasure> {
    if m == 0 {
        return Err(RdsError::param("m", "must be at least 1"));
    }
    let mut atoms = sampler.draws(sys, m)?;
    pullback_atoms(sys, omega, horizon, &mut atoms)?;
    Ok(EmpiricalRandomMeasure {
        atoms,
        provenance: Provenance { omega, horizon, m },
    })
}

/// Energy distance `2E d(X,Y) − E d(X,X') − E d(Y,Y')` between two
/// uniformly weighted clouds (V-statistic form, clamped at 0).
pub fn energy_distance<S: Cocycle>(sys: &S, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mean = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        let mut s = 0.0;
        for x in p {
            for y in q {
                s += sys.distance(x, y);
            }
        }
        s / (p.len() * q.len()) as f64
    };
    (2.0 * mean(a, b) - mean(a, a) - mean(b, b)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "T_prev")]
    pub prev: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dist: f64,
}

/// Pullback clouds at each horizon, all built from the same stationary
/// draws and the same `ω`.
pub fn pullback_clouds<S: Cocycle>(
    sys: &S,
    omega: SeedLineage,
    horizons: &[f64],
    m: usize,
    sampler: &StationarySampler,
) -> Result<Vec<EmpiricalRandomMeasure>> {
    if horizons.windows(2).any(|w| w[1] < w[0]) {
        return Err(RdsError::param("T_list", "horizons must be non-decreasing"));
    }
    if m == 0 {
        return Err(RdsError::param("m", "must be at least 1"));
    }
    let draws = sampler.draws(sys, m)?;
    horizons
        .iter()
        .map(|&horizon| {
            let mut atoms = draws.clone();
            pullback_atoms(sys, omega, horizon, &mut atoms)?;
            Ok(EmpiricalRandomMeasure {
                atoms,
                provenance: Provenance { omega, horizon, m },
            })
        })
        .collect()
}

/// Energy distance between consecutive clouds.
pub fn convergence_rows<S: Cocycle>(sys: &S, clouds: &[EmpiricalRandomMeasure]) -> Vec<ConvergenceRow> {
    clouds
        .windows(2)
        .map(|c| ConvergenceRow {
            prev: c[0].provenance.horizon,
            horizon: c[1].provenance.horizon,
            dist: energy_distance(sys, &c[0].atoms, &c[1].atoms),
        })
        .collect()
}

/// Energy distance between pullback clouds at consecutive horizons, all
/// built from the same stationary draws and the same `ω`.
pub fn pullback_convergence<S: Cocycle>(
    sys: &S,
    omega: SeedLineage,
    horizons: &[f64],
    m: usize,
    sampler: &StationarySampler,
) -> Result<Vec<ConvergenceRow>> {
    let clouds = pullback_clouds(sys, omega, horizons, m, sampler)?;
    Ok(convergence_rows(sys, &clouds))
}

/// Number of single-linkage clusters at threshold `eps`: connected
/// components of the graph joining atoms closer than `eps`.
pub fn single_linkage_count<S: Cocycle>(sys: &S, atoms: &[Vec<f64>], eps: f64) -> usize {
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut components = n;
    for i in 0..n {
        for j in i + 1..n {
            if sys.distance(&atoms[i], &atoms[j]) < eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                    components -= 1;
                }
            }
        }
    }
    components
}

/// Noise and sampler streams of trial `trial` under `master`.
pub fn trial_streams(master: SeedLineage, trial: usize) -> (SeedLineage, SeedLineage) {
    (
        master.derive2(OMEGA_TAG, trial as u64),
        master.derive2(SAMPLER_TAG, trial as u64),
    )
}

/// Final distances of independent stationary pairs pulled back with a
/// shared `ω`, one pair per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSample {
    pub distances: Vec<f64>,
}

impl DiagonalSample {
    pub fn hits(&self, eps: f64) -> usize {
        self.distances.iter().filter(|&&d| d < eps).count()
    }

    pub fn mass(&self, eps: f64) -> f64 {
        self.hits(eps) as f64 / self.distances.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMass {
    pub mass: f64,
    pub ci: Interval,
    pub hits: usize,
    pub trials: usize,
    pub eps: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Estimates `μ̄⁽²⁾` of the `eps`-neighbourhood of the diagonal. Trials run
/// in parallel; trial `i` uses streams derived from `(master, i)` only.
pub fn diagonal_sample<S: Cocycle>(
    sys: &S,
    master: SeedLineage,
    trials: usize,
    horizon: f64,
    mode: SamplerMode,
) -> Result<DiagonalSample> {
    let distances = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (omega, draws) = trial_streams(master, i);
            let cloud = pullback_sample(sys, omega, horizon, 2, &StationarySampler::new(mode, draws))?;
            Ok(sys.distance(&cloud.atoms[0], &cloud.atoms[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagonalSample { distances })
}

pub fn diagonal_mass<S: Cocycle>(
    sys: &S,
    master: SeedLineage,
    trials: usize,
    horizon: f64,
    eps: f64,
    mode: SamplerMode,
) -> Result<DiagonalMass> {
    if !(eps > 0.0) {
        return Err(RdsError::param("eps_cluster", "must be positive"));
    }
    if trials == 0 {
        return Err(RdsError::param("trials", "must be at least 1"));
    }
    let sample = diagonal_sample(sys, master, trials, horizon, mode)?;
    Ok(summarise_diagonal(&sample, eps, horizon))
}

fn summarise_diagonal(sample: &DiagonalSample, eps: f64, horizon: f64) -> DiagonalMass {
    let hits = sample.hits(eps);
    let trials = sample.distances.len();
    DiagonalMass {
        mass: hits as f64 / trials as f64,
        ci: wilson(hits, trials, 0.95),
        hits,
        trials,
        eps,
        horizon,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Most frequent per-trial single-linkage count.
    pub n_hat_cloud: usize,
    /// `1 / diag_mass`; `None` when no trial pair landed on the diagonal.
    pub n_hat_diag: Option<f64>,
    pub n_hat_diag_infinite: bool,
    pub diag_mass: f64,
    pub ci: Interval,
    pub eps: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub m: usize,
    pub trials: usize,
    pub per_trial_counts: Vec<usize>,
    /// No count reached a strict majority of trials.
    pub inconclusive: bool,
    /// `round(n_hat_diag) != n_hat_cloud`.
    pub disagreement: bool,
}

/// Estimates the number of atoms of `μ_ω` by cluster counting and by the
/// diagonal mass. The diagonal estimate uses the first two atoms of each
/// trial's cloud, which are exactly the pair [`diagonal_mass`] would draw.
pub fn cluster_count<S: Cocycle>(
    sys: &S,
    master: SeedLineage,
    trials: usize,
    horizon: f64,
    m: usize,
    eps: f64,
    mode: SamplerMode,
) -> Result<ClusterReport> {
    if m < 20 {
        return Err(RdsError::param("m", format!("must be at least 20, got {m}")));
    }
    if trials == 0 {
        return Err(RdsError::param("trials", "must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(RdsError::param("eps_cluster", "must be positive"));
    }
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (omega, draws) = trial_streams(master, i);
            let cloud = pullback_sample(sys, omega, horizon, m, &StationarySampler::new(mode, draws))?;
            Ok((
                single_linkage_count(sys, &cloud.atoms, eps),
                sys.distance(&cloud.atoms[0], &cloud.atoms[1]),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (per_trial_counts, distances): (Vec<usize>, Vec<f64>) = per_trial.into_iter().unzip();

    let (n_hat_cloud, votes) = majority(&per_trial_counts);
    let diag = summarise_diagonal(&DiagonalSample { distances }, eps, horizon);
    let n_hat_diag = (diag.mass > 0.0).then(|| 1.0 / diag.mass);
    Ok(ClusterReport {
        n_hat_cloud,
        n_hat_diag,
        n_hat_diag_infinite: n_hat_diag.is_none(),
        diag_mass: diag.mass,
        ci: diag.ci,
        eps,
        horizon,
        m,
        trials,
        inconclusive: 2 * votes <= trials,
        disagreement: n_hat_diag.map_or(true, |n| n.round() as usize != n_hat_cloud),
        per_trial_counts,
    })
}

/// Most common value (smallest on ties) and its number of votes.
fn majority(counts: &[usize]) -> (usize, usize) {
    let mut tally = std::collections::BTreeMap::new();
    for &c in counts {
        *tally.entry(c).or_insert(0usize) += 1;
    }
    tally
        .into_iter()
        .fold((1, 0), |best, (c, v)| if v > best.1 { (c, v) } else { best })
}
