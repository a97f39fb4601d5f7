use std::collections::BTreeMap;
use std::f64::consts::{E, PI, TAU};

use rds_core::diagnostics::{
    contractibility_test, gronwall_check, lyapunov_max, lyapunov_with_noise, random_pairs,
    stability_test, steer_demo, sync_probability, transitivity_test, SteerParams, TrialPlan,
};
use rds_core::noise::sample_wiener;
use rds_core::systems::{drift, flow_pair, run_with_checkpoints, StateSpace, TimeKind};
use rds_core::{CircleMap, Cocycle, DoubleWell, NoisePath, RdsError, SeedLineage};

fn well() -> DoubleWell {
    DoubleWell::new(2, 1e-3).unwrap()
}

fn circle() -> CircleMap {
    CircleMap::new(0.3).unwrap()
}

fn pair(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (x.to_vec(), y.to_vec())
}

/// Additive-noise scalar contraction without a tangent stepper.
#[derive(Clone)]
struct Leaky;

impl Cocycle for Leaky {
    type Noise = NoisePath;
    fn name(&self) -> &'static str {
        "leaky"
    }
    fn state_space(&self) -> StateSpace {
        StateSpace::Euclidean(1)
    }
    fn time_kind(&self) -> TimeKind {
        TimeKind::Continuous
    }
    fn dt(&self) -> f64 {
        0.01
    }
    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
    fn step(&self, x: &mut [f64], noise: &[f64]) {
        x[0] += -x[0] * 0.01 + noise[0];
    }
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }
    fn sample_noise(&self, lineage: SeedLineage, lo: i64, hi: i64) -> rds_core::Result<NoisePath> {
        sample_wiener(lineage, 1, lo as f64 * 0.01, hi as f64 * 0.01, 0.01)
    }
}

#[test]
fn plan_validation() {
    let plan = TrialPlan::new(1, 5, 2.0, 1e-3);
    assert_eq!(plan.t_grid.first(), Some(&0.0));
    assert_eq!(plan.t_grid.last(), Some(&2.0));
    assert_eq!(plan.t_grid.len(), 9);
    let mut bad = plan.clone();
    bad.t_grid.push(3.0);
    assert!(bad.cells(1e-3).is_err());
    let mut bad = plan.clone();
    bad.t_grid.push(0.00025);
    assert!(matches!(bad.cells(1e-3), Err(RdsError::NotGridAligned { .. })));
    let mut none = plan;
    none.trials = 0;
    assert!(none.cells(1e-3).is_err());
}

#[test]
fn diagonal_pair_synchronises_at_once() {
    let plan = TrialPlan::new(3, 20, 5.0, 1e-3);
    let r = sync_probability(&well(), &plan, &[pair(&[0.5, -0.5], &[0.5, -0.5])]).unwrap();
    let p = &r.pairs[0];
    assert_eq!(p.freq, 1.0);
    assert!(p.first_passage.iter().all(|t| *t == Some(0.0)));
    assert_eq!(p.median_first_passage, Some(0.0));
    assert!(sync_probability(&well(), &plan, &[]).is_err());
}

#[test]
fn separated_wells_synchronise_almost_surely() {
    let plan = TrialPlan::new(7, 200, 100.0, 1e-3);
    let r = sync_probability(&well(), &plan, &[pair(&[-2.0, 0.0], &[2.0, 0.0])]).unwrap();
    let p = &r.pairs[0];
    assert!(p.freq >= 0.99, "freq {}", p.freq);
    assert!(p.ci.lo <= p.freq && p.freq <= p.ci.hi);
    assert!(p.median_first_passage.is_some_and(|t| t > 0.0 && t <= 100.0));
}

#[test]
fn antipodal_circle_pair_never_synchronises() {
    let plan = TrialPlan::new(7, 20, 10_000.0, 1.0);
    let r = sync_probability(&circle(), &plan, &[pair(&[0.0], &[PI])]).unwrap();
    let p = &r.pairs[0];
    assert_eq!(p.freq, 0.0);
    assert!(p.first_passage.iter().all(Option::is_none));
    assert!((p.final_distance_min - PI).abs() < 1e-9 && (p.final_distance_max - PI).abs() < 1e-9);
}

#[test]
fn integer_time_closeness_persists_in_between() {
    // Once the pair is within δ at an integer time, every later grid time
    // stays within δ·e^{L} (with the discretisation slack).
    let sys = well();
    let delta = 1e-3;
    let bound = delta * E * (1.0 + 10.0 * sys.dt());
    for seed in 0..20 {
        let p = sample_wiener(SeedLineage::new(seed), 2, 0.0, 30.0, 1e-3).unwrap();
        let mut states = vec![vec![-2.0, 0.0], vec![2.0, 0.0]];
        let grid: Vec<i64> = (0..=120).map(|i| i * 250).collect();
        let mut armed = false;
        run_with_checkpoints(&sys, &p, &mut states, 30_000, &grid, |k, s| {
            let d = sys.distance(&s[0], &s[1]);
            if armed {
                assert!(d <= bound, "seed {seed}: {d} at cell {k}");
            } else if k % 1000 == 0 && d < delta {
                armed = true;
            }
            std::ops::ControlFlow::Continue(())
        })
        .unwrap();
    }
}

#[test]
fn stability_with_zero_radius_is_certain() {
    let plan = TrialPlan::new(1, 10, 1.0, 1e-3);
    let r = stability_test(&well(), &plan, &[0.3, 0.3], 0.0).unwrap();
    assert_eq!(r.freq, 1.0);
}

#[test]
fn double_well_ball_contracts() {
    let plan = TrialPlan::new(7, 200, 100.0, 1e-3);
    let r = stability_test(&well(), &plan, &[1.0, 0.0], 0.5).unwrap();
    assert!(r.freq >= 0.99, "freq {}", r.freq);
}

#[test]
fn circle_arc_contracts_unless_it_holds_a_repeller() {
    // Fails exactly when the arc of width 2r straddles one of the two
    // antipodal separating points: probability 2r/π.
    let r = 0.1;
    let plan = TrialPlan::new(7, 2000, 10_000.0, 1.0);
    let rep = stability_test(&circle(), &plan, &[1.0], r).unwrap();
    let want = 1.0 - 2.0 * r / PI;
    assert!(rep.ci.contains(want), "freq {} ci {:?} want {want}", rep.freq, rep.ci);
}

#[test]
fn contractibility_examples() {
    let plan = TrialPlan::new(3, 10, 1.0, 1e-3);
    let r = contractibility_test(&well(), &plan, &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], 0.25).unwrap();
    assert_eq!(r.freq, 1.0);

    let plan = TrialPlan::new(7, 500, 50.0, 1e-3).with_eps_ball(0.25);
    let r = contractibility_test(&well(), &plan, &[-2.0, 0.0], &[2.0, 0.0], &[1.0, 0.0], 0.25).unwrap();
    assert!(r.certifies_positive(), "{r:?}");

    let plan = TrialPlan::new(7, 100, 2000.0, 1.0);
    let r = contractibility_test(&circle(), &plan, &[0.0], &[PI], &[0.0], 0.1).unwrap();
    assert_eq!(r.hits, 0);
    assert!(!r.note.is_empty());
    assert!(contractibility_test(&circle(), &plan, &[0.0], &[PI], &[0.0], 0.0).is_err());
}

#[test]
fn transitivity_examples() {
    let plan = TrialPlan::new(3, 10, 1.0, 1e-3);
    let r = transitivity_test(&well(), &plan, &[0.0, -1.0], &[0.0, -1.0], 0.25).unwrap();
    assert_eq!(r.freq, 1.0);

    let plan = TrialPlan::new(7, 500, 50.0, 1e-3);
    let r = transitivity_test(&well(), &plan, &[0.0, 0.0], &[0.0, -1.0], 0.25).unwrap();
    assert!(r.certifies_positive(), "{r:?}");

    let plan = TrialPlan::new(7, 100, 1000.0, 1.0);
    for center in [0.5, 2.0, 4.0] {
        let r = transitivity_test(&circle(), &plan, &[3.0], &[center], 0.1).unwrap();
        assert!(r.certifies_positive(), "center {center}: {r:?}");
    }
}

#[test]
fn lyapunov_at_the_unstable_origin() {
    let sys = DoubleWell::new(2, 1e-4).unwrap();
    let zero = NoisePath::zero(2, 1e-4, 100.0).unwrap();
    let r = lyapunov_with_noise(&sys, &zero, &[0.0, 0.0], 1, 100.0, 20).unwrap();
    assert!((r.lambda - 1.0).abs() < 1e-2, "lambda {}", r.lambda);
    // Both directions grow at rate 1.
    let r2 = lyapunov_with_noise(&sys, &zero, &[0.0, 0.0], 2, 100.0, 20).unwrap();
    assert!((r2.lambda - 1.0).abs() < 1e-2);
}

#[test]
fn lyapunov_negative_under_noise() {
    let sys = well();
    let plan = TrialPlan::new(7, 1, 2000.0, sys.dt());
    let r = lyapunov_max(&sys, &plan, &[1.0, 0.0], 1, 20).unwrap();
    assert!(r.lambda < 0.0 && r.ci.hi < 0.0, "{:?}", (r.lambda, r.ci));
    assert_eq!(r.batch_means.len(), 20);
}

/// `(1/2π) ∫ log|1 + 2ε cos θ| dθ` by the periodic trapezoid rule.
fn circle_exponent_quadrature(eps: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| (1.0 + 2.0 * eps * (TAU * i as f64 / n as f64).cos()).abs().ln())
        .sum::<f64>()
        / n as f64
}

#[test]
fn circle_exponent_matches_quadrature() {
    let quad = circle_exponent_quadrature(0.3, 100_000);
    // Independent closed form: log((1 + sqrt(1 − (2ε)²)) / 2).
    assert!((quad - ((1.0 + (1.0 - 0.36f64).sqrt()) / 2.0).ln()).abs() < 1e-12);
    let sys = circle();
    let plan = TrialPlan::new(7, 1, 200_000.0, 1.0);
    let r = lyapunov_max(&sys, &plan, &[0.4], 1, 20).unwrap();
    assert!((r.lambda - quad).abs() < 5e-3, "{} vs {quad}", r.lambda);
    assert!(r.ci.hi < 0.0);
}

#[test]
fn lyapunov_errors() {
    let plan = TrialPlan::new(1, 1, 10.0, 0.01);
    assert!(matches!(lyapunov_max(&Leaky, &plan, &[0.0], 1, 5), Err(RdsError::MissingJacobian("leaky"))));
    let plan = TrialPlan::new(1, 1, 10.0, 1e-3);
    assert!(lyapunov_max(&well(), &plan, &[1.0, 0.0], 3, 5).is_err());
    assert!(lyapunov_max(&well(), &plan, &[1.0, 0.0], 1, 1).is_err());
}

#[test]
fn custom_systems_run_through_the_diagnostics() {
    // Additive noise with linear drift: the separation is 2·0.99^k exactly.
    let gap = |k: i32| 2.0 * 0.99f64.powi(k);
    let plan = TrialPlan::new(2, 50, 20.0, 0.01);
    let r = sync_probability(&Leaky, &plan, &[pair(&[-1.0], &[1.0])]).unwrap();
    let p = &r.pairs[0];
    assert_eq!(p.freq, 1.0);
    // First grid time (step 0.25) with gap below 1e-3.
    let first = (1..=80).map(|i| i as f64 * 0.25).find(|t| gap((t * 100.0) as i32) < 1e-3).unwrap();
    assert_eq!(p.median_first_passage, Some(first));
    assert!((p.final_distance_max - gap(2000)).abs() < 1e-15);

    let tight = TrialPlan::new(2, 50, 20.0, 0.01).with_delta_sync(1e-10);
    let r = sync_probability(&Leaky, &tight, &[pair(&[-1.0], &[1.0])]).unwrap();
    assert_eq!(r.pairs[0].freq, 0.0);
}

#[test]
fn gronwall_skips_identical_pairs() {
    let plan = TrialPlan::new(1, 3, 2.0, 1e-3);
    let pairs = vec![pair(&[1.0, 1.0], &[1.0, 1.0]), pair(&[0.0, 1.0], &[0.5, -1.0])];
    let r = gronwall_check(&well(), &plan, &pairs).unwrap();
    assert_eq!(r.skipped, vec![0]);
    assert!(r.holds);
    assert!(r.worst_at.as_ref().is_some_and(|w| w.pair == 1));
}

#[test]
fn gronwall_ratio_on_a_contracting_segment() {
    let sys = well();
    let zero = NoisePath::zero(2, 1e-3, 20.0).unwrap();
    let (x1, x2) = ([0.1, 0.0], [0.2, 0.0]);
    for i in 1..=80 {
        let t = i as f64 * 0.25;
        let (a, b) = flow_pair(&sys, &zero, &x1, &x2, t).unwrap();
        let ratio = sys.distance(&a, &b) / (0.1 * t.exp());
        assert!(ratio <= 1.0, "t={t} ratio={ratio}");
    }
}

#[test]
fn gronwall_random_pairs() {
    let sys = well();
    let pairs = random_pairs(SeedLineage::new(5), 2, 3.0, 20);
    assert!(pairs.iter().all(|(x, y)| x.iter().chain(y).all(|v| v.abs() <= 3.0)));
    let plan = TrialPlan::new(5, 10, 20.0, sys.dt());
    let r = gronwall_check(&sys, &plan, &pairs).unwrap();
    assert!(r.worst_ratio <= r.bound, "{r:?}");
    assert_eq!(r.bound, 1.0 + 10.0 * sys.dt());
}

#[test]
fn steering_transit_lands_on_target() {
    let params = SteerParams::Transit { eta0: 100.0, tol: 0.05 };
    let r = steer_demo(&well(), &[0.0, 0.0], &[0.0, 1.0], &params).unwrap();
    assert!(r.verdict && r.metric < 0.05, "metric {}", r.metric);
    let end = r.trace.last().unwrap();
    assert!((end.t - 0.01).abs() < 1e-12);
}

#[test]
fn steering_transit_without_displacement() {
    let eta0 = 100.0;
    let x = [0.5, 0.5];
    let r = steer_demo(&well(), &x, &x, &SteerParams::Transit { eta0, tol: 0.05 }).unwrap();
    let end = &r.trace.last().unwrap().x;
    let moved = ((end[0] - x[0]).powi(2) + (end[1] - x[1]).powi(2)).sqrt();
    let b = drift(&x);
    let speed = (b[0] * b[0] + b[1] * b[1]).sqrt();
    // Pure drift for time 1/η₀.
    assert!(moved <= 1.1 * speed / eta0, "moved {moved}");
}

#[test]
fn steering_contract_holds_both_trajectories() {
    let params = SteerParams::Contract { eta1: 20.0, eta2: 20.0, eps: 0.1, t_star: 5.0, t_end: 50.0 };
    let r = steer_demo(&well(), &[-2.0, 0.0], &[2.0, 0.0], &params).unwrap();
    assert!(r.verdict && r.metric < 0.1, "metric {}", r.metric);
    let target = [1.0, 0.0];
    for p in r.trace.iter().filter(|p| p.t >= 5.0) {
        for z in [&p.x, &p.y] {
            let d = ((z[0] - target[0]).powi(2) + (z[1] - target[1]).powi(2)).sqrt();
            assert!(d < 0.1, "t={} d={d}", p.t);
        }
    }
    let mut csv = Vec::new();
    r.write_trace_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,x_1,x_2,y_1,y_2\n"));
    assert_eq!(text.lines().count(), r.trace.len() + 1);
}

#[test]
fn steering_rejects_nonpositive_eta() {
    let bad = SteerParams::Transit { eta0: 0.0, tol: 0.05 };
    assert!(steer_demo(&well(), &[0.0, 0.0], &[1.0, 0.0], &bad).is_err());
    let bad = SteerParams::Contract { eta1: -1.0, eta2: 20.0, eps: 0.1, t_star: 5.0, t_end: 50.0 };
    assert!(steer_demo(&well(), &[0.0, 0.0], &[1.0, 0.0], &bad).is_err());
}

#[test]
fn reports_are_reproducible() {
    let plan = TrialPlan::new(11, 30, 10.0, 1e-3);
    let pairs = [pair(&[-1.0, 0.5], &[1.5, 0.0])];
    let a = serde_json::to_string(&sync_probability(&well(), &plan, &pairs).unwrap()).unwrap();
    let b = serde_json::to_string(&sync_probability(&well(), &plan, &pairs).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&sync_probability(&well(), &TrialPlan::new(12, 30, 10.0, 1e-3), &pairs).unwrap())
        .unwrap();
    assert_ne!(a, c);
}

#[test]
fn frequencies_and_intervals_are_valid() {
    let plan = TrialPlan::new(4, 40, 5.0, 1e-3);
    let r = transitivity_test(&well(), &plan, &[0.0, 0.0], &[1.0, 0.0], 0.3).unwrap();
    assert!((0.0..=1.0).contains(&r.freq));
    assert_eq!(r.freq, r.hits as f64 / r.trials as f64);
    assert!(0.0 <= r.ci.lo && r.ci.lo <= r.freq && r.freq <= r.ci.hi && r.ci.hi <= 1.0);
}
