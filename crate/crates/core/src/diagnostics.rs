//! Monte Carlo certificates for the pointwise notions of synchronisation:
//! pairwise synchronisation, asymptotic stability of a neighbourhood,
//! contractibility of a pair towards a point, transitivity into a ball,
//! the maximal Lyapunov exponent, and the Grönwall separation bound.
//!
//! Existence events (`∃ t ≥ 0 …`) are checked on a finite time grid, so a
//! hit is a certificate and a miss only says the event was not observed up
//! to the tested horizon.

use std::ops::ControlFlow;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RdsError, Result};
use crate::noise::{cells_of, steering_path, NoiseWindow, Steering};
use crate::seed::SeedLineage;
use crate::stats::{batch_means_ci, wilson, Interval};
use crate::systems::{
    horizon_cells, one_sided_lipschitz_constant, run_with_checkpoints, Cocycle, DoubleWell,
    SystemInfo,
};

const TRIAL_TAG: u64 = 0x7472;
const CONFIDENCE: f64 = 0.95;

/// Seeds, horizon, check times and tolerances shared by the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub seed: u64,
    pub trials: usize,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    pub t_grid: Vec<f64>,
    pub delta_sync: f64,
    pub eps_ball: f64,
}

impl TrialPlan {
    pub const DEFAULT_GRID_STEP: f64 = 0.25;
    pub const DEFAULT_DELTA_SYNC: f64 = 1e-3;
    pub const DEFAULT_EPS_BALL: f64 = 0.25;

    /// Plan with check times every `max(0.25, dt)` from 0 to `t_max`.
    pub fn new(seed: u64, trials: usize, t_max: f64, dt: f64) -> Self {
        let step = Self::DEFAULT_GRID_STEP.max(dt);
        let n = (t_max / step).floor() as usize;
        let mut t_grid: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        if t_grid.last().is_some_and(|&t| t < t_max) {
            t_grid.push(t_max);
        }
        TrialPlan {
            seed,
            trials,
            t_max,
            t_grid,
            delta_sync: Self::DEFAULT_DELTA_SYNC,
            eps_ball: Self::DEFAULT_EPS_BALL,
        }
    }

    pub fn with_delta_sync(mut self, delta: f64) -> Self {
        self.delta_sync = delta;
        self
    }

    pub fn with_eps_ball(mut self, eps: f64) -> Self {
        self.eps_ball = eps;
        self
    }

    /// Validated horizon and checkpoints, in cells of width `dt`.
    pub fn cells(&self, dt: f64) -> Result<(i64, Vec<i64>)> {
        if self.trials == 0 {
            return Err(RdsError::param("trials", "must be at least 1"));
        }
        let n = cells_of("T_max", self.t_max, dt)?;
        if n < 0 {
            return Err(RdsError::param("T_max", "must be non-negative"));
        }
        let mut grid = self
            .t_grid
            .iter()
            .map(|&t| cells_of("t_grid", t, dt))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = grid.iter().find(|&&c| c < 0 || c > n) {
            return Err(RdsError::param(
                "t_grid",
                format!("time {} outside [0, T_max]", bad as f64 * dt),
            ));
        }
        grid.sort_unstable();
        grid.dedup();
        Ok((n, grid))
    }

    /// Noise stream of trial `i`.
    pub fn trial_lineage(&self, i: usize) -> SeedLineage {
        SeedLineage::new(self.seed).derive2(TRIAL_TAG, i as u64)
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(RdsError::param(name, format!("must be positive, got {v}")))
    }
}

/// Synchronisation statistics for one initial pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSync {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub hits: usize,
    pub freq: f64,
    pub ci: Interval,
    /// First grid time with distance below `delta_sync`, per trial;
    /// `None` means right-censored at `T_max`.
    pub first_passage: Vec<Option<f64>>,
    pub median_first_passage: Option<f64>,
    pub final_distance_min: f64,
    pub final_distance_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub system: SystemInfo,
    pub plan: TrialPlan,
    pub trials: usize,
    pub pairs: Vec<PairSync>,
}

/// Frequency over independent `ω` that `d(φ(T,ω)x, φ(T,ω)y) < δ`, with first
/// passage times on the plan's grid. All pairs share the trial's `ω`.
pub fn sync_probability<S: Cocycle>(
    sys: &S,
    plan: &TrialPlan,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<SyncReport> {
    if pairs.is_empty() {
        return Err(RdsError::param("pairs", "at least one pair is required"));
    }
    check_positive("delta_sync", plan.delta_sync)?;
    let (n, grid) = plan.cells(sys.dt())?;
    let starts: Vec<Vec<f64>> = pairs
        .iter()
        .flat_map(|(x, y)| [sys.canonical(x), sys.canonical(y)])
        .collect::<Result<_>>()?;
    let dt = sys.dt();

    let per_trial = (0..plan.trials)
        .into_par_iter()
        .map(|i| {
            let noise = sys.sample_noise(plan.trial_lineage(i), 0, n)?;
            let mut states = starts.clone();
            let mut first = vec![None; pairs.len()];
            run_with_checkpoints(sys, &noise, &mut states, n, &grid, |k, s| {
                let mut all_merged = true;
                for (p, slot) in first.iter_mut().enumerate() {
                    let (a, b) = (&s[2 * p], &s[2 * p + 1]);
                    if slot.is_none() && sys.distance(a, b) < plan.delta_sync {
                        *slot = Some(k as f64 * dt);
                    }
                    all_merged &= a == b;
                }
                // Coincident states stay coincident: nothing left to learn.
                if all_merged { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
            })?;
            let finals: Vec<f64> = (0..pairs.len())
                .map(|p| sys.distance(&states[2 * p], &states[2 * p + 1]))
                .collect();
            Ok((first, finals))
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs = pairs
        .iter()
        .enumerate()
        .map(|(p, (x, y))| {
            let finals: Vec<f64> = per_trial.iter().map(|(_, f)| f[p]).collect();
            let first_passage: Vec<Option<f64>> = per_trial.iter().map(|(f, _)| f[p]).collect();
            let hits = finals.iter().filter(|&&d| d < plan.delta_sync).count();
            let mut times: Vec<f64> = first_passage.iter().flatten().copied().collect();
            times.sort_by(f64::total_cmp);
            // Censored trials count as +∞, so the median exists only when
            // more than half the trials passed.
            let median_first_passage =
                (2 * times.len() > plan.trials).then(|| times[(plan.trials - 1) / 2]);
            PairSync {
                x: x.clone(),
                y: y.clone(),
                hits,
                freq: hits as f64 / plan.trials as f64,
                ci: wilson(hits, plan.trials, CONFIDENCE),
                first_passage,
                median_first_passage,
                final_distance_min: finals.iter().copied().fold(f64::INFINITY, f64::min),
                final_distance_max: finals.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(SyncReport {
        system: sys.info(),
        plan: plan.clone(),
        trials: plan.trials,
        pairs,
    })
}

/// Outcome of a per-trial yes/no event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub op: String,
    pub event: String,
    pub system: SystemInfo,
    pub plan: TrialPlan,
    pub trials: usize,
    pub hits: usize,
    pub freq: f64,
    pub ci: Interval,
    pub horizon: f64,
    pub note: String,
}

impl HitReport {
    /// The event has been certified to have positive probability.
    pub fn certifies_positive(&self) -> bool {
        self.ci.lo > 0.0
    }
}

const ONE_SIDED_NOTE: &str =
    "existence checked on t_grid up to the horizon; a miss is not a refutation";

fn hit_report<S: Cocycle>(sys: &S, plan: &TrialPlan, op: &str, event: String, hits: usize, note: &str) -> HitReport {
    HitReport {
        op: op.to_string(),
        event,
        system: sys.info(),
        plan: plan.clone(),
        trials: plan.trials,
        hits,
        freq: hits as f64 / plan.trials as f64,
        ci: wilson(hits, plan.trials, CONFIDENCE),
        horizon: plan.t_max,
        note: note.to_string(),
    }
}

fn count_hits<F>(trials: usize, trial: F) -> Result<usize>
where
    F: Fn(usize) -> Result<bool> + Sync + Send,
{
    Ok((0..trials)
        .into_par_iter()
        .map(trial)
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&h| h)
        .count())
}

/// Probe points `x` and `x ± r·e_i`.
fn probes<S: Cocycle>(sys: &S, x: &[f64], r: f64) -> Result<Vec<Vec<f64>>> {
    let x = sys.canonical(x)?;
    let mut out = vec![x.clone()];
    for i in 0..x.len() {
        for sign in [1.0, -1.0] {
            let mut p = x.clone();
            p[i] += sign * r;
            out.push(sys.canonical(&p)?);
        }
    }
    Ok(out)
}

fn diameter<S: Cocycle>(sys: &S, pts: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(sys.distance(a, b));
        }
    }
    d
}

/// Frequency over `ω` that the images of the `2d + 1` probes of the ball
/// `B_r(x)` have diameter below `delta_sync` at `T_max`.
pub fn stability_test<S: Cocycle>(sys: &S, plan: &TrialPlan, x: &[f64], r: f64) -> Result<HitReport> {
    if !(r >= 0.0) {
        return Err(RdsError::param("r", "must be non-negative"));
    }
    check_positive("delta_sync", plan.delta_sync)?;
    let (n, grid) = plan.cells(sys.dt())?;
    let start = probes(sys, x, r)?;
    let hits = count_hits(plan.trials, |i| {
        let noise = sys.sample_noise(plan.trial_lineage(i), 0, n)?;
        let mut pts = start.clone();
        run_with_checkpoints(sys, &noise, &mut pts, n, &grid, |_, s| {
            if s.iter().all(|p| *p == s[0]) { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
        })?;
        Ok(diameter(sys, &pts) < plan.delta_sync)
    })?;
    Ok(hit_report(
        sys,
        plan,
        "stability",
        format!("diam of probes of B_{r}({x:?}) < {} at T_max", plan.delta_sync),
        hits,
        "diameter over 2d+1 probe points",
    ))
}

/// Frequency over `ω` that both `φ(t,ω)x` and `φ(t,ω)y` lie in
/// `B_ε(p)` at some grid time.
pub fn contractibility_test<S: Cocycle>(
    sys: &S,
    plan: &TrialPlan,
    x: &[f64],
    y: &[f64],
    p: &[f64],
    eps_ball: f64,
) -> Result<HitReport> {
    check_positive("eps_ball", eps_ball)?;
    let (n, grid) = plan.cells(sys.dt())?;
    let start = vec![sys.canonical(x)?, sys.canonical(y)?];
    let target = sys.canonical(p)?;
    let hits = count_hits(plan.trials, |i| {
        let noise = sys.sample_noise(plan.trial_lineage(i), 0, n)?;
        let mut pts = start.clone();
        let mut hit = false;
        run_with_checkpoints(sys, &noise, &mut pts, n, &grid, |_, s| {
            hit = s.iter().all(|q| sys.distance(q, &target) < eps_ball);
            if hit { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
        })?;
        Ok(hit)
    })?;
    Ok(hit_report(
        sys,
        plan,
        "contract",
        format!("both of {x:?}, {y:?} in B_{eps_ball}({p:?}) at some grid time"),
        hits,
        ONE_SIDED_NOTE,
    ))
}

/// Frequency over `ω` that `φ(t,ω)x` enters `B_radius(center)` at some grid
/// time.
pub fn transitivity_test<S: Cocycle>(
    sys: &S,
    plan: &TrialPlan,
    x: &[f64],
    center: &[f64],
    radius: f64,
) -> Result<HitReport> {
    check_positive("radius", radius)?;
    let (n, grid) = plan.cells(sys.dt())?;
    let start = vec![sys.canonical(x)?];
    let target = sys.canonical(center)?;
    let hits = count_hits(plan.trials, |i| {
        let noise = sys.sample_noise(plan.trial_lineage(i), 0, n)?;
        let mut pts = start.clone();
        let mut hit = false;
        run_with_checkpoints(sys, &noise, &mut pts, n, &grid, |_, s| {
            hit = sys.distance(&s[0], &target) < radius;
            if hit { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
        })?;
        Ok(hit)
    })?;
    Ok(hit_report(
        sys,
        plan,
        "transit",
        format!("{x:?} enters B_{radius}({center:?}) at some grid time"),
        hits,
        ONE_SIDED_NOTE,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub system: SystemInfo,
    pub lambda: f64,
    pub ci: Interval,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    pub renorm_interval: f64,
    pub batches: usize,
    pub k: usize,
    pub batch_means: Vec<f64>,
}

/// Renormalises the columns of a `d × k` row-major matrix by modified
/// Gram–Schmidt and returns the log of the first column's norm before
/// renormalisation.
fn orthonormalise(v: &mut [f64], d: usize, k: usize) -> f64 {
    let mut lead = 0.0;
    for j in 0..k {
        for prev in 0..j {
            let dot: f64 = (0..d).map(|i| v[i * k + j] * v[i * k + prev]).sum();
            for i in 0..d {
                v[i * k + j] -= dot * v[i * k + prev];
            }
        }
        let norm = (0..d).map(|i| v[i * k + j].powi(2)).sum::<f64>().sqrt();
        if j == 0 {
            lead = norm.ln();
        }
        for i in 0..d {
            v[i * k + j] /= norm;
        }
    }
    lead
}

/// Maximal Lyapunov exponent along the trajectory of `x0` driven by `noise`
/// on `[0, t_max]`, renormalising every unit of time. The interval comes
/// from `batches` contiguous batch means.
pub fn lyapunov_with_noise<S: Cocycle>(
    sys: &S,
    noise: &S::Noise,
    x0: &[f64],
    k: usize,
    t_max: f64,
    batches: usize,
) -> Result<LyapunovReport> {
    if !sys.has_jacobian() {
        return Err(RdsError::MissingJacobian(sys.name()));
    }
    let d = sys.dim();
    if k == 0 || k > d {
        return Err(RdsError::param("k", format!("must lie in 1..={d}")));
    }
    if batches < 2 {
        return Err(RdsError::param("batches", "at least 2 are needed for an interval"));
    }
    let n = horizon_cells(noise, t_max)?;
    let renorm_interval = 1.0_f64.max(sys.dt());
    let per = cells_of("renorm_interval", renorm_interval, sys.dt())?;
    let intervals = (n / per) as usize;
    if intervals < batches {
        return Err(RdsError::param(
            "T_max",
            format!("{intervals} renormalisation intervals cannot fill {batches} batches"),
        ));
    }

    let mut x = sys.canonical(x0)?;
    // Start from an orthonormalised generic frame.
    let mut v: Vec<f64> = (0..d * k)
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            if i == j { 1.0 } else { 0.5 / d as f64 }
        })
        .collect();
    orthonormalise(&mut v, d, k);

    let mut logs = Vec::with_capacity(intervals);
    let mut cell = 0;
    for _ in 0..intervals {
        for _ in 0..per {
            sys.step_tangent(&mut x, &mut v, k, noise.cell(cell))?;
            cell += 1;
        }
        logs.push(orthonormalise(&mut v, d, k));
    }
    let total: f64 = logs.iter().sum();
    let lambda = total / (intervals as f64 * renorm_interval);
    let batch_means: Vec<f64> = (0..batches)
        .map(|b| {
            let (lo, hi) = (b * intervals / batches, (b + 1) * intervals / batches);
            logs[lo..hi].iter().sum::<f64>() / ((hi - lo) as f64 * renorm_interval)
        })
        .collect();
    let (centre, ci) = batch_means_ci(&batch_means, CONFIDENCE);
    let half = (ci.hi - centre).max(0.0);
    Ok(LyapunovReport {
        system: sys.info(),
        lambda,
        ci: Interval { lo: lambda - half, hi: lambda + half },
        t_max,
        renorm_interval,
        batches,
        k,
        batch_means,
    })
}

/// [`lyapunov_with_noise`] along noise drawn from trial 0 of `plan`.
pub fn lyapunov_max<S: Cocycle>(
    sys: &S,
    plan: &TrialPlan,
    x0: &[f64],
    k: usize,
    batches: usize,
) -> Result<LyapunovReport> {
    let (n, _) = plan.cells(sys.dt())?;
    let noise = sys.sample_noise(plan.trial_lineage(0), 0, n)?;
    lyapunov_with_noise(sys, &noise, x0, k, plan.t_max, batches)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallWorst {
    pub trial: usize,
    pub pair: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub system: SystemInfo,
    pub plan: TrialPlan,
    pub lipschitz: f64,
    /// `max |Δu(t)| / (|Δu(0)|·e^{L t})` over trials, pairs and grid times.
    pub worst_ratio: f64,
    pub worst_at: Option<GronwallWorst>,
    /// `1 + 10·dt`.
    pub bound: f64,
    pub holds: bool,
    /// Indices of pairs with zero initial separation.
    pub skipped: Vec<usize>,
}

/// Checks the separation bound `|Δu(t)| ≤ |Δu(0)|·e^{L t}` on the plan's
/// grid for every pair and trial.
pub fn gronwall_check(
    sys: &DoubleWell,
    plan: &TrialPlan,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<GronwallReport> {
    let (n, grid) = plan.cells(sys.dt())?;
    let lipschitz = one_sided_lipschitz_constant();
    let mut skipped = Vec::new();
    let mut active = Vec::new();
    for (i, (x, y)) in pairs.iter().enumerate() {
        let (x, y) = (sys.canonical(x)?, sys.canonical(y)?);
        let d0 = sys.distance(&x, &y);
        if d0 == 0.0 {
            skipped.push(i);
        } else {
            active.push((i, x, y, d0));
        }
    }
    let dt = sys.dt();
    let per_trial = (0..plan.trials)
        .into_par_iter()
        .map(|trial| {
            let noise = sys.sample_noise(plan.trial_lineage(trial), 0, n)?;
            let mut states: Vec<Vec<f64>> =
                active.iter().flat_map(|(_, x, y, _)| [x.clone(), y.clone()]).collect();
            let mut worst = (0.0_f64, None);
            run_with_checkpoints(sys, &noise, &mut states, n, &grid, |k, s| {
                let t = k as f64 * dt;
                let growth = (lipschitz * t).exp();
                for (a, (idx, _, _, d0)) in active.iter().enumerate() {
                    let ratio = sys.distance(&s[2 * a], &s[2 * a + 1]) / (d0 * growth);
                    if ratio > worst.0 {
                        worst = (ratio, Some(GronwallWorst { trial, pair: *idx, t }));
                    }
                }
                ControlFlow::Continue(())
            })?;
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_ratio, worst_at) = per_trial
        .into_iter()
        .fold((0.0, None), |best, w| if w.0 > best.0 { w } else { best });
    let bound = 1.0 + 10.0 * dt;
    Ok(GronwallReport {
        system: sys.info(),
        plan: plan.clone(),
        lipschitz,
        worst_ratio,
        worst_at,
        bound,
        holds: worst_ratio <= bound,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SteerParams {
    /// Steer `x` to within `tol` of `y` with the transit path.
    Transit { eta0: f64, tol: f64 },
    /// Hold both trajectories in `B_eps((1, 0, …))` for `t ∈ [t_star, t_end]`.
    Contract { eta1: f64, eta2: f64, eps: f64, t_star: f64, t_end: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerReport {
    pub params: SteerParams,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub verdict: bool,
    /// Transit: final distance to the target. Contract: largest distance of
    /// either trajectory from the target point over `[t_star, t_end]`.
    pub metric: f64,
    pub trace: Vec<TracePoint>,
}

impl SteerReport {
    pub fn write_trace_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.x0.len();
        write!(out, "t")?;
        for i in 1..=d {
            write!(out, ",x_{i}")?;
        }
        for i in 1..=d {
            write!(out, ",y_{i}")?;
        }
        writeln!(out)?;
        for p in &self.trace {
            write!(out, "{}", p.t)?;
            for v in p.x.iter().chain(&p.y) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Runs the double-well flow under a deterministic steering path.
pub fn steer_demo(sys: &DoubleWell, x: &[f64], y: &[f64], params: &SteerParams) -> Result<SteerReport> {
    let d = sys.dim();
    let dt = sys.dt();
    let x0 = sys.canonical(x)?;
    let y0 = sys.canonical(y)?;
    let (path, t_end) = match *params {
        SteerParams::Transit { eta0, .. } => {
            check_positive("eta0", eta0)?;
            let kind = Steering::Transit { x: x0.clone(), y: y0.clone(), eta0 };
            (steering_path(&kind, d, dt, 1.0 / eta0)?, 1.0 / eta0)
        }
        SteerParams::Contract { eta1, eta2, t_end, t_star, eps } => {
            check_positive("eps", eps)?;
            if !(0.0 <= t_star && t_star <= t_end) {
                return Err(RdsError::param("t_star", "must satisfy 0 <= t_star <= t_end"));
            }
            (steering_path(&Steering::Contract { eta1, eta2 }, d, dt, t_end)?, t_end)
        }
    };
    let n = horizon_cells(&path, t_end)?;
    let trace_every = ((0.01 / dt).round() as i64).max(1);
    let checkpoints: Vec<i64> = (0..=n).collect();
    let mut target = vec![0.0; d];
    target[0] = 1.0;
    let star = match *params {
        SteerParams::Contract { t_star, .. } => cells_of("t_star", t_star, dt)?,
        SteerParams::Transit { .. } => n,
    };

    let mut states = vec![x0.clone(), y0.clone()];
    let mut trace = Vec::new();
    let mut worst: f64 = 0.0;
    run_with_checkpoints(sys, &path, &mut states, n, &checkpoints, |k, s| {
        if k % trace_every == 0 || k == n {
            trace.push(TracePoint { t: k as f64 * dt, x: s[0].clone(), y: s[1].clone() });
        }
        if k >= star {
            worst = worst.max(sys.distance(&s[0], &target)).max(sys.distance(&s[1], &target));
        }
        ControlFlow::Continue(())
    })?;
    let (verdict, metric) = match *params {
        SteerParams::Transit { tol, .. } => {
            let miss = sys.distance(&states[0], &y0);
            (miss < tol, miss)
        }
        SteerParams::Contract { eps, .. } => (worst < eps, worst),
    };
    Ok(SteerReport {
        params: params.clone(),
        x0,
        y0,
        verdict,
        metric,
        trace,
    })
}

/// Uniform point in the closed Euclidean ball of radius `radius` around 0.
pub fn random_ball_point<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return x;
        }
    }
}

/// `count` independent pairs of uniform points in the ball of radius
/// `radius`, drawn from `lineage`.
pub fn random_pairs(lineage: SeedLineage, d: usize, radius: f64, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = lineage.rng();
    (0..count)
        .map(|_| (random_ball_point(&mut rng, d, radius), random_ball_point(&mut rng, d, radius)))
        .collect()
}
