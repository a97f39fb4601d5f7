use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rds_core::diagnostics::{
    contractibility_test, gronwall_check, lyapunov_with_noise, random_ball_point, random_pairs,
    stability_test, steer_demo, sync_probability, transitivity_test, SteerParams, TrialPlan,
};
use rds_core::measures::{
    cluster_count, convergence_rows, pullback_clouds, trial_streams, ConvergenceRow, SamplerMode,
    StationarySampler,
};
use rds_core::noise::IncrementStats;
use rds_core::systems::cocycle_defect;
use rds_core::{CircleMap, Cocycle, DoubleWell, NoisePath, NoiseWindow, SeedLineage};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{
    to_config_file, ClustersArgs, CocycleArgs, Command, Common, ContractArgs, Cli,
    GronwallArgs, LyapunovArgs, NoiseStatsArgs, Pair, PullbackArgs, StabilityArgs, SteerArgs,
    SteerKind, SyncArgs, SystemKind, TransitArgs,
};
use crate::CliError;

/// Streams for randomly chosen starting points, kept apart from trial noise.
const POINTS_TAG: u64 = 0x7074;
/// Radius of the ball random starting points are drawn from.
const START_RADIUS: f64 = 3.0;

type Out = Result<(), CliError>;

enum System {
    DoubleWell(DoubleWell),
    Circle(CircleMap),
}

impl System {
    fn from_common(c: &Common) -> Result<Self, CliError> {
        Ok(match c.system {
            SystemKind::Doublewell => System::DoubleWell(DoubleWell::with_taming(c.d, c.dt, !c.untamed)?),
            SystemKind::Circlemap => System::Circle(CircleMap::new(c.eps_c)?),
        })
    }

    fn double_well(self, op: &str) -> Result<DoubleWell, CliError> {
        match self {
            System::DoubleWell(s) => Ok(s),
            System::Circle(_) => Err(CliError::Usage(format!("{op} supports --system doublewell only"))),
        }
    }
}

macro_rules! with_system {
    ($sys:expr, |$s:ident| $body:expr) => {
        match $sys {
            System::DoubleWell($s) => $body,
            System::Circle($s) => $body,
        }
    };
}

pub fn execute(cli: Cli) -> Out {
    let common = cli.command.common().clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Run(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Out {
    match command {
        Command::CocycleCheck(a) => cocycle(a),
        Command::Gronwall(a) => gronwall(a),
        Command::Lyapunov(a) => lyapunov(a),
        Command::Sync(a) => sync(a),
        Command::Stability(a) => stability(a),
        Command::Contract(a) => contract(a),
        Command::Transit(a) => transit(a),
        Command::Steer(a) => steer(a),
        Command::Pullback(a) => pullback(a),
        Command::Clusters(a) => clusters(a),
        Command::NoiseStats(a) => noise_stats(a),
    }
}

/// Echoes `args`, honours `--dump-config`, then writes the report.
struct Report<'a> {
    op: &'static str,
    common: &'a Common,
    params: Value,
}

impl<'a> Report<'a> {
    fn start<A: Serialize>(op: &'static str, common: &'a Common, args: &A) -> Result<Self, CliError> {
        let params = serde_json::to_value(args).map_err(|e| CliError::Run(e.to_string()))?;
        if let Some(path) = &common.dump_config {
            std::fs::write(path, to_config_file(&params))
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(Report { op, common, params })
    }

    fn finish<R: Serialize>(self, result: &R) -> Out {
        let mut doc = Map::new();
        doc.insert("schema".into(), json!(1));
        doc.insert("op".into(), json!(self.op));
        doc.insert("seed".into(), json!(self.common.seed));
        doc.insert("params".into(), self.params);
        if let Some(epoch) = &self.common.epoch {
            doc.insert("epoch".into(), json!(epoch));
        }
        match serde_json::to_value(result).map_err(|e| CliError::Run(e.to_string()))? {
            Value::Object(fields) => {
                for (k, v) in fields {
                    doc.entry(k).or_insert(v);
                }
            }
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| CliError::Run(e.to_string()))?;
        text.push('\n');
        match &self.common.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("cannot write {}: {e}", path.display()))
}

fn pairs_of(pairs: &[Pair]) -> Vec<(Vec<f64>, Vec<f64>)> {
    pairs.iter().map(|p| (p.0 .0.clone(), p.1 .0.clone())).collect()
}

fn cocycle(a: CocycleArgs) -> Out {
    let report = Report::start("cocycle-check", &a.common, &a)?;
    if a.cases == 0 {
        return Err(CliError::Usage("--cases must be at least 1".into()));
    }
    #[derive(Serialize)]
    struct Case {
        case: usize,
        x0: Vec<f64>,
        max_deviation: f64,
    }
    #[derive(Serialize)]
    struct Out {
        system: rds_core::systems::SystemInfo,
        cases: Vec<Case>,
        max_deviation: f64,
        bit_exact: bool,
    }
    let master = SeedLineage::new(a.common.seed);
    let result = with_system!(System::from_common(&a.common)?, |sys| {
        let cases = (0..a.cases)
            .map(|case| {
                let lineage = master.derive(case as u64);
                let x0 = match &a.x0 {
                    Some(x) => sys.canonical(&x.0)?,
                    None => {
                        let mut rng = master.derive2(POINTS_TAG, case as u64).rng();
                        match sys.exact_stationary(&mut rng) {
                            Some(x) => x,
                            None => random_ball_point(&mut rng, sys.dim(), START_RADIUS),
                        }
                    }
                };
                let max_deviation = cocycle_defect(&sys, lineage, &x0, a.s, a.t)?;
                Ok(Case { case, x0, max_deviation })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let max_deviation = cases.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
        Out { system: sys.info(), max_deviation, bit_exact: max_deviation == 0.0, cases }
    });
    report.finish(&result)
}

fn gronwall(a: GronwallArgs) -> Out {
    let report = Report::start("gronwall", &a.common, &a)?;
    let sys = System::from_common(&a.common)?.double_well("gronwall")?;
    let pairs = if a.pair.is_empty() {
        random_pairs(SeedLineage::new(a.common.seed).derive(POINTS_TAG), sys.dim(), START_RADIUS, a.random_pairs)
    } else {
        pairs_of(&a.pair)
    };
    let plan = TrialPlan::new(a.common.seed, a.trials, a.t_max, sys.dt());
    let result = gronwall_check(&sys, &plan, &pairs)?;
    report.finish(&json!({ "pairs": pairs.len(), "report": result }))
}

fn lyapunov(a: LyapunovArgs) -> Out {
    let report = Report::start("lyapunov", &a.common, &a)?;
    let system = System::from_common(&a.common)?;
    let plan = TrialPlan::new(a.common.seed, 1, a.t_max, 1.0);
    if a.zero_noise {
        let sys = system.double_well("lyapunov --zero-noise")?;
        let noise = NoisePath::zero(sys.dim(), sys.dt(), a.t_max)?;
        let x0 = a.x0.map_or_else(|| vec![0.0; sys.dim()], |c| c.0);
        let result = lyapunov_with_noise(&sys, &noise, &x0, a.k, a.t_max, a.batches)?;
        return report.finish(&result);
    }
    let result = with_system!(system, |sys| {
        let x0 = a.x0.as_ref().map_or_else(|| sys.burn_in_start(), |c| c.0.clone());
        let n = rds_core::noise::cells_of("T", a.t_max, sys.dt())?;
        let noise = sys.sample_noise(plan.trial_lineage(0), 0, n)?;
        serde_json::to_value(lyapunov_with_noise(&sys, &noise, &x0, a.k, a.t_max, a.batches)?)
    })
    .map_err(|e| CliError::Run(e.to_string()))?;
    report.finish(&result)
}

fn sync(a: SyncArgs) -> Out {
    let report = Report::start("sync", &a.common, &a)?;
    let pairs = pairs_of(&a.pair);
    let result = with_system!(System::from_common(&a.common)?, |sys| {
        let plan = TrialPlan::new(a.common.seed, a.trials, a.t_max, sys.dt()).with_delta_sync(a.delta);
        serde_json::to_value(sync_probability(&sys, &plan, &pairs)?)
    })
    .map_err(|e| CliError::Run(e.to_string()))?;
    // Lift the first pair's frequency to the top level for quick inspection.
    let freq = result["pairs"][0]["freq"].clone();
    let mut doc = json!({ "freq": freq });
    merge(&mut doc, result);
    report.finish(&doc)
}

fn stability(a: StabilityArgs) -> Out {
    let report = Report::start("stability", &a.common, &a)?;
    let result = with_system!(System::from_common(&a.common)?, |sys| {
        let plan = TrialPlan::new(a.common.seed, a.trials, a.t_max, sys.dt()).with_delta_sync(a.delta);
        stability_test(&sys, &plan, &a.x.0, a.r)?
    });
    report.finish(&result)
}

fn contract(a: ContractArgs) -> Out {
    let report = Report::start("contract", &a.common, &a)?;
    let result = with_system!(System::from_common(&a.common)?, |sys| {
        let plan = TrialPlan::new(a.common.seed, a.trials, a.t_max, sys.dt()).with_eps_ball(a.eps_ball);
        contractibility_test(&sys, &plan, &a.x.0, &a.y.0, &a.p.0, a.eps_ball)?
    });
    let certified = result.certifies_positive();
    let mut doc = json!({ "certified": certified });
    merge(&mut doc, serde_json::to_value(&result).map_err(|e| CliError::Run(e.to_string()))?);
    report.finish(&doc)
}

fn transit(a: TransitArgs) -> Out {
    let report = Report::start("transit", &a.common, &a)?;
    let result = with_system!(System::from_common(&a.common)?, |sys| {
        let plan = TrialPlan::new(a.common.seed, a.trials, a.t_max, sys.dt());
        transitivity_test(&sys, &plan, &a.x.0, &a.center.0, a.radius)?
    });
    let certified = result.certifies_positive();
    let mut doc = json!({ "certified": certified });
    merge(&mut doc, serde_json::to_value(&result).map_err(|e| CliError::Run(e.to_string()))?);
    report.finish(&doc)
}

fn steer(a: SteerArgs) -> Out {
    let report = Report::start("steer", &a.common, &a)?;
    let sys = System::from_common(&a.common)?.double_well("steer")?;
    let params = match a.kind {
        SteerKind::Transit => SteerParams::Transit { eta0: a.eta0, tol: a.tol },
        SteerKind::Contract => SteerParams::Contract {
            eta1: a.eta1,
            eta2: a.eta2,
            eps: a.eps,
            t_star: a.t_star,
            t_end: a.t_max,
        },
    };
    let result = steer_demo(&sys, &a.x.0, &a.y.0, &params)?;
    if let Some(path) = &a.csv {
        let mut w = csv_writer(path)?;
        result.write_trace_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(path))?;
    }
    // The trace goes to the CSV; the report keeps the verdict and endpoints.
    report.finish(&json!({
        "steer": result.params,
        "x0": result.x0,
        "y0": result.y0,
        "verdict": result.verdict,
        "metric": result.metric,
        "final": result.trace.last(),
        "trace_points": result.trace.len(),
    }))
}

fn pullback(a: PullbackArgs) -> Out {
    let report = Report::start("pullback", &a.common, &a)?;
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    #[derive(Serialize)]
    struct TrialRows {
        trial: usize,
        rows: Vec<ConvergenceRow>,
        diameter: f64,
    }
    let master = SeedLineage::new(a.common.seed);
    let horizons = a.horizons.0.clone();
    let mut csv = match &a.csv {
        Some(path) => Some((csv_writer(path)?, path)),
        None => None,
    };
    let (system, mode, per_trial) = with_system!(System::from_common(&a.common)?, |sys| {
        let mode = match SamplerMode::default_for(&sys) {
            SamplerMode::BurnIn { .. } => SamplerMode::BurnIn { t_burn: a.t_burn },
            exact => exact,
        };
        let mut per_trial = Vec::with_capacity(a.trials);
        if let Some((w, path)) = csv.as_mut() {
            let cols: Vec<String> = (1..=sys.dim()).map(|i| format!(",x_{i}")).collect();
            writeln!(w, "trial,atom{}", cols.concat()).map_err(io_err(path))?;
        }
        for trial in 0..a.trials {
            let (omega, draws) = trial_streams(master, trial);
            let clouds = pullback_clouds(&sys, omega, &horizons, a.m, &StationarySampler::new(mode, draws))?;
            let last = clouds.last().ok_or_else(|| CliError::Usage("--horizons must not be empty".into()))?;
            if let Some((w, path)) = csv.as_mut() {
                for (i, atom) in last.atoms.iter().enumerate() {
                    let vals: Vec<String> = atom.iter().map(|v| format!(",{v}")).collect();
                    writeln!(w, "{trial},{i}{}", vals.concat()).map_err(io_err(path))?;
                }
            }
            per_trial.push(TrialRows {
                trial,
                rows: convergence_rows(&sys, &clouds),
                diameter: last.diameter(&sys),
            });
        }
        (sys.info(), mode, per_trial)
    });
    if let Some((mut w, path)) = csv {
        w.flush().map_err(io_err(path))?;
    }
    let converged = per_trial
        .iter()
        .filter(|t| t.rows.last().is_some_and(|r| r.dist < a.tol))
        .count();
    report.finish(&json!({
        "system": system,
        "sampler": mode,
        "converged": converged,
        "converged_frac": converged as f64 / a.trials as f64,
        "trials": per_trial,
    }))
}

fn clusters(a: ClustersArgs) -> Out {
    let report = Report::start("clusters", &a.common, &a)?;
    let master = SeedLineage::new(a.common.seed);
    let system = System::from_common(&a.common)?;
    let default_eps = match system {
        System::DoubleWell(_) => 1e-2,
        System::Circle(_) => 0.05,
    };
    let eps = a.eps_cluster.unwrap_or(default_eps);
    let result = with_system!(system, |sys| {
        let mode = match SamplerMode::default_for(&sys) {
            SamplerMode::BurnIn { .. } => SamplerMode::BurnIn { t_burn: a.t_burn },
            exact => exact,
        };
        cluster_count(&sys, master, a.trials, a.t_max, a.m, eps, mode)?
    });
    report.finish(&result)
}

#[derive(Serialize)]
struct AngleStats {
    draws: usize,
    mean: f64,
    /// `(mean − π) / sqrt(π²/3 / N)`.
    z: f64,
    /// Sample variance over `π²/3`.
    variance_ratio: f64,
    lag1_corr: f64,
    passes: bool,
}

fn angle_stats(draws: &[f64]) -> AngleStats {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let lag: f64 = draws.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
    let target = PI * PI / 3.0;
    let z = (mean - PI) / (target / n).sqrt();
    let variance_ratio = var / target;
    let lag1_corr = lag / var;
    AngleStats {
        draws: draws.len(),
        mean,
        z,
        variance_ratio,
        lag1_corr,
        passes: z.abs() < 4.0 && (variance_ratio - 1.0).abs() <= 0.05 && lag1_corr.abs() < 0.05,
    }
}

fn noise_stats(a: NoiseStatsArgs) -> Out {
    let report = Report::start("noise-stats", &a.common, &a)?;
    let lineage = SeedLineage::new(a.common.seed);
    match System::from_common(&a.common)? {
        System::DoubleWell(sys) => {
            let n = rds_core::noise::cells_of("T", a.t_max, sys.dt())?;
            let path = sys.sample_noise(lineage, 0, n)?;
            if let Some(p) = &a.csv {
                let mut w = csv_writer(p)?;
                path.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(p))?;
            }
            let stats = IncrementStats::of(&path);
            let passes = stats.passes();
            let mut doc = json!({ "passes": passes, "window": path.window() });
            merge(&mut doc, serde_json::to_value(stats).map_err(|e| CliError::Run(e.to_string()))?);
            report.finish(&doc)
        }
        System::Circle(sys) => {
            let n = rds_core::noise::cells_of("T", a.t_max, sys.dt())?;
            let seq = sys.sample_noise(lineage, 0, n)?;
            if let Some(p) = &a.csv {
                let mut w = csv_writer(p)?;
                writeln!(w, "k,alpha").map_err(io_err(p))?;
                for (k, v) in seq.draws().iter().enumerate() {
                    writeln!(w, "{k},{v}").map_err(io_err(p))?;
                }
                w.flush().map_err(io_err(p))?;
            }
            report.finish(&angle_stats(seq.draws()))
        }
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(dst), Value::Object(src)) = (into, from) {
        for (k, v) in src {
            dst.entry(k).or_insert(v);
        }
    }
}
