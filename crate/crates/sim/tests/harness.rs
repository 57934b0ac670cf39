//! Closed-loop harness: disturbances, edge-case scenarios, batch summaries
//! and file round trips.

use asmpc_sim::config::{Family, ScenarioConfig};
use asmpc_sim::disturbance::{generate_disturbance, DisturbanceSpec};
use asmpc_sim::io::{export_summary, export_trace, import_summary, import_trace, read_trace, write_trace};
use asmpc_sim::montecarlo::run_monte_carlo;
use asmpc_sim::run::{run_closed_loop, run_estimate_only, run_with_disturbance, scenario_disturbance};
use asmpc_sim::{Mode, SimError};
use nalgebra::DVector;
use proptest::prelude::*;

fn bundled() -> asmpc_sim::Scenario {
    ScenarioConfig::bundled().build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disturbances_stay_in_bounds(seed in any::<u64>(), b0 in 0.0f64..3.0, b1 in 0.0f64..3.0, gaussian in any::<bool>()) {
        let spec = DisturbanceSpec {
            family: if gaussian { Family::TruncatedGaussian } else { Family::Uniform },
            bound: DVector::from_vec(vec![b0, b1]),
            sigma: DVector::from_vec(vec![0.7, 2.0]),
        };
        let seq = generate_disturbance(seed, 50, &spec);
        prop_assert_eq!(seq.len(), 50);
        for w in &seq {
            prop_assert!(w[0].abs() <= b0 && w[1].abs() <= b1);
        }
        prop_assert_eq!(generate_disturbance(seed, 50, &spec), seq);
    }
}

#[test]
fn zero_bound_gives_zero_sequence() {
    let spec = DisturbanceSpec {
        family: Family::Uniform,
        bound: DVector::zeros(1),
        sigma: DVector::zeros(1),
    };
    assert!(generate_disturbance(3, 30, &spec).iter().all(|w| w[0] == 0.0));
}

#[test]
fn uniform_samples_are_centred_with_the_declared_variance() {
    let sc = bundled();
    let w: Vec<f64> = (0..200)
        .flat_map(|s| scenario_disturbance(&sc, s))
        .map(|w| w[0])
        .collect();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
    assert!(mean.abs() < 0.03, "mean {mean}");
    assert!((var - sc.sigma_w2[(0, 0)]).abs() < 0.02, "variance {var}");
}

#[test]
fn trace_has_one_row_per_step() {
    let sc = bundled();
    let trace = run_closed_loop(&sc, 4).unwrap();
    assert!(trace.completed());
    assert_eq!(trace.steps.len(), 21);
    let mut buf = Vec::new();
    write_trace(&trace.steps, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 22);
    assert!(text.starts_with("t,u_0,y_0,w_0,stage_cost,status,"));
}

#[test]
fn csv_round_trip_is_byte_identical() {
    let sc = bundled();
    let trace = run_closed_loop(&sc, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    export_trace(&trace.steps, &a).unwrap();
    let back = import_trace(&a).unwrap();
    export_trace(&back, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // Values survive too; NaN witness at t = 0 is the only non-reflexive one.
    assert_eq!(back.len(), trace.steps.len());
    for (x, y) in back.iter().zip(&trace.steps) {
        assert_eq!(x.nominal, y.nominal);
        assert_eq!(x.stage_cost, y.stage_cost);
        assert_eq!(x.status, y.status);
    }
}

#[test]
fn empty_path_is_an_error() {
    let trace = run_closed_loop(&bundled(), 0).unwrap();
    assert!(matches!(
        export_trace(&trace.steps, std::path::Path::new("")),
        Err(SimError::Io(_))
    ));
    assert!(import_trace(std::path::Path::new("")).is_err());
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(read_trace("t,u_0\n0,1\n".as_bytes()).is_err());
    let trace = run_closed_loop(&bundled(), 0).unwrap();
    let mut buf = Vec::new();
    write_trace(&trace.steps, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap().replacen("optimal", "great", 1);
    assert!(matches!(read_trace(text.as_bytes()), Err(SimError::Format(_))));
}

#[test]
fn same_seed_same_trace() {
    let sc = bundled();
    for mode in [Mode::Stochastic, Mode::Robust] {
        let s = sc.with_mode(mode);
        let a = run_closed_loop(&s, 21).unwrap();
        let b = run_closed_loop(&s, 21).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_trace(&a.steps, &mut x).unwrap();
        write_trace(&b.steps, &mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.disturbance_hash, b.disturbance_hash);
    }
}

#[test]
fn modes_share_the_disturbance_sequence() {
    let sc = bundled();
    let s = run_closed_loop(&sc.with_mode(Mode::Stochastic), 8).unwrap();
    let r = run_closed_loop(&sc.with_mode(Mode::Robust), 8).unwrap();
    assert_eq!(s.disturbance_hash, r.disturbance_hash);
    for (a, b) in s.steps.iter().zip(&r.steps) {
        assert_eq!(a.w, b.w);
    }
}

/// Without noise the tightening vanishes and every vertex prediction is
/// bounded, so the realized output can never exceed the limit.
#[test]
fn noiseless_plant_never_violates() {
    let mut cfg = ScenarioConfig::bundled();
    cfg.disturbance.bound = vec![0.0];
    cfg.disturbance.variance = vec![vec![0.0]];
    let sc = cfg.build().unwrap();
    assert_eq!(sc.gamma.constant_tightening(&sc.chance).unwrap(), 0.0);
    for seed in 0..5 {
        let trace = run_closed_loop(&sc, seed).unwrap();
        assert!(trace.completed(), "{:?}", trace.outcome);
        assert!(trace.steps.iter().all(|s| s.w[0] == 0.0));
        assert_eq!(trace.violations(), 0);
        assert!(trace.steps.iter().all(|s| s.truth_in_fps));
    }
}

/// A noiseless plant whose estimator starts, with negligible covariance, at
/// the true model: the nominal never moves, so outputs are predicted exactly
/// and obey the limit.
#[test]
fn known_plant_follows_the_output_limit() {
    let mut cfg = ScenarioConfig::bundled();
    cfg.disturbance.bound = vec![0.0];
    cfg.disturbance.variance = vec![vec![0.0]];
    cfg.estimator.mean = vec![-4.0, 8.0, -9.0];
    cfg.estimator.covariance = vec![vec![1e-12, 0.0, 0.0], vec![0.0, 1e-12, 0.0], vec![0.0, 0.0, 1e-12]];
    let sc = cfg.build().unwrap();
    let trace = run_closed_loop(&sc, 0).unwrap();
    assert!(trace.completed());
    for s in &trace.steps {
        assert!((&s.nominal - sc.true_model.to_vector()).amax() < 1e-6);
        assert!(sc.chance.apply(&s.y) <= sc.chance.p() + 1e-9);
    }
}

#[test]
fn initial_measurement_is_needed_to_start() {
    let mut cfg = ScenarioConfig::bundled();
    cfg.fps.absorb_initial_measurement = false;
    let sc = cfg.build().unwrap();
    assert!(matches!(run_closed_loop(&sc, 0), Err(SimError::InitiallyInfeasible(_))));
}

#[test]
fn wrong_disturbance_length_is_rejected() {
    let sc = bundled();
    let w = vec![DVector::zeros(1); 3];
    assert!(matches!(run_with_disturbance(&sc, 0, &w), Err(SimError::Config(_))));
}

#[test]
fn single_run_summary_is_the_trace() {
    let sc = bundled();
    let out = run_monte_carlo(&sc, 1, 17, false).unwrap();
    let trace = run_closed_loop(&sc, 17).unwrap();
    let m = &out.summary.modes[0];
    assert_eq!(out.summary.seeds, vec![17]);
    assert_eq!(out.summary.disturbance_hashes[0], trace.disturbance_hash);
    assert_eq!(m.costs, vec![trace.total_cost()]);
    assert_eq!(m.mean_cost, trace.total_cost());
    assert_eq!(m.total_violations, trace.violations());
    for (p, s) in m.violation_probability.iter().zip(&trace.steps) {
        assert_eq!(*p, if s.violation { 1.0 } else { 0.0 });
    }
    let last = trace.steps.last().unwrap();
    assert_eq!(
        m.final_estimation_error[0],
        (&last.nominal - sc.true_model.to_vector()).norm()
    );
    assert_eq!(
        m.final_center_error[0],
        (&last.cheb_center - sc.true_model.to_vector()).norm()
    );
    assert!(run_monte_carlo(&sc, 0, 0, false).is_err());
}

#[test]
fn paired_batch_matches_individual_runs() {
    let sc = bundled();
    let out = run_monte_carlo(&sc, 4, 100, true).unwrap();
    assert_eq!(out.summary.modes.len(), 2);
    for (i, seed) in out.summary.seeds.iter().enumerate() {
        for (k, mode) in [Mode::Stochastic, Mode::Robust].into_iter().enumerate() {
            let t = run_closed_loop(&sc.with_mode(mode), *seed).unwrap();
            let (mut x, mut y) = (Vec::new(), Vec::new());
            write_trace(&out.traces[i][k].as_ref().unwrap().steps, &mut x).unwrap();
            write_trace(&t.steps, &mut y).unwrap();
            assert_eq!(x, y);
            assert_eq!(out.summary.modes[k].costs[i], t.total_cost());
        }
    }
    let c = out.summary.comparison.as_ref().unwrap();
    assert!((0.0..=1.0).contains(&c.stochastic_cheaper_fraction));
}

#[test]
fn summary_round_trip() {
    let out = run_monte_carlo(&bundled(), 3, 5, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("summary.toml");
    export_summary(&out.summary, &p).unwrap();
    assert_eq!(import_summary(&p).unwrap(), out.summary);
}

#[test]
fn estimation_without_control_keeps_the_truth() {
    let sc = bundled();
    let trace = run_estimate_only(&sc, 2, 3.0).unwrap();
    assert_eq!(trace.steps.len(), 21);
    assert!(trace.steps.iter().all(|s| s.truth_in_fps && s.fps_nested));
    let vols: Vec<f64> = trace.steps.iter().map(|s| s.fps_volume).collect();
    assert!(vols.windows(2).all(|v| v[1] <= v[0] * (1.0 + 1e-9)));
    let last = trace.steps.last().unwrap();
    assert!((&last.nominal - sc.true_model.to_vector()).norm() < 1.0);
}

#[test]
fn config_file_round_trip() {
    let cfg = ScenarioConfig::bundled();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(&p, cfg.to_toml()).unwrap();
    assert_eq!(ScenarioConfig::load(&p).unwrap(), cfg);
}
