use std::f64::consts::PI;

use rand::Rng;
use replaystat::env::{
    mdp_gamma,    ingest_csv, mdp_test_grid, mdp_transition_params, ou_transition_params, regression_surface, sample_regression,
    sample_trajectories, true_value, write_regression_csv, InitSpec, OuSpec, RegressionSpec, RewardSpec,
};
use replaystat::krr::LabeledPoint;
use replaystat::policy::Trajectory;
use replaystat::rng::stream;
use replaystat::Error;

#[test]
fn ou_transition_examples() {
    let spec = OuSpec::default();
    let (m0, v0) = ou_transition_params(&spec, 0.0);
    assert_eq!(m0, 0.0);
    assert!((v0 - (0.01_f64.exp() - 1.0) / 0.1).abs() < 1e-13);
    let (m, v) = ou_transition_params(&spec, 1.0);
    assert!((m - 1.005_012_520_859_401).abs() < 1e-14);
    assert!((v - 0.100_501_670_841_680_6).abs() < 1e-14);
    let tiny = OuSpec {
        lambda_drift: 1e-8,
        ..spec
    };
    assert!((ou_transition_params(&tiny, 2.0).1 / 0.1 - 1.0).abs() < 1e-6);
    let zero = OuSpec {
        lambda_drift: 0.0,
        ..spec
    };
    assert_eq!(ou_transition_params(&zero, 2.0), (2.0, 0.1));
}

#[test]
fn mdp_and_ou_transitions_agree_at_dt_one_tenth() {
    let spec = OuSpec::default();
    for s in [-2.0, 0.0, 0.4, 3.0] {
        let (a, b) = ou_transition_params(&spec, s);
        let (c, d) = mdp_transition_params(spec.lambda_drift, spec.sigma, s);
        assert!((a - c).abs() <= 2.0 * f64::EPSILON * a.abs());
        assert!((b - d).abs() <= 2.0 * f64::EPSILON * b);
    }
}

#[test]
fn degenerate_dynamics_give_constant_paths() {
    let spec = OuSpec {
        lambda_drift: 0.0,
        sigma: 0.0,
        dt: 0.1,
    };
    for t in sample_trajectories::<f64>(&spec, &InitSpec::default(), 20, 5, 1).unwrap() {
        assert!(t.states.iter().all(|s| *s == t.states[0]));
    }
}

#[test]
fn initial_states_stay_in_support() {
    let wide = InitSpec {
        sd: 3.0,
        ..InitSpec::default()
    };
    let trajs = sample_trajectories::<f64>(&OuSpec::default(), &wide, 5000, 1, 2).unwrap();
    assert!(trajs.iter().all(|t| (-PI..=PI).contains(&t.states[0])));
    assert!(trajs.iter().any(|t| t.states[0].abs() > 2.5));
}

fn slope_and_se(trajs: &[Trajectory<f64>], j: usize) -> (f64, f64, f64) {
    let sxx: f64 = trajs.iter().map(|t| t.states[j].powi(2)).sum();
    let sxy: f64 = trajs.iter().map(|t| t.states[j] * t.states[j + 1]).sum();
    let slope = sxy / sxx;
    let n = trajs.len() as f64;
    let resid_var = trajs
        .iter()
        .map(|t| (t.states[j + 1] - slope * t.states[j]).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (slope, (resid_var / sxx).sqrt(), resid_var)
}

#[test]
fn transition_mean_and_variance_match_closed_form() {
    let spec = OuSpec::default();
    let init = InitSpec {
        sd: 1.0,
        ..InitSpec::default()
    };
    let trajs = sample_trajectories::<f64>(&spec, &init, 100_000, 6, 3).unwrap();
    let (_, var) = ou_transition_params(&spec, 0.0);
    for j in [0, 5] {
        let (slope, se, resid) = slope_and_se(&trajs, j);
        assert!((slope - (spec.lambda_drift * spec.dt).exp()).abs() < 3.0 * se, "j={j}: {slope} ± {se}");
        let var_se = var * (2.0 / 100_000.0_f64).sqrt();
        assert!((resid - var).abs() < 3.0 * var_se, "j={j}: {resid} vs {var}");
    }
}

#[test]
fn trajectories_use_per_index_streams() {
    let spec = OuSpec::default();
    let a = sample_trajectories::<f64>(&spec, &InitSpec::default(), 10, 2, 9).unwrap();
    let b = sample_trajectories::<f64>(&spec, &InitSpec::default(), 25, 2, 9).unwrap();
    assert_eq!(a[..], b[..10]);
    let c = sample_trajectories::<f64>(&spec, &InitSpec::default(), 10, 2, 10).unwrap();
    assert_ne!(a, c);
    assert!(sample_trajectories::<f64>(&spec, &InitSpec::default(), 0, 2, 9).is_err());
}

#[test]
fn reward_examples() {
    let r = RewardSpec::default();
    assert!((r.reward_cont(0.0_f64) - 1.6).abs() < 1e-15);
    assert!((r.reward_mdp(0.0_f64) - 0.16).abs() < 1e-15);
    assert!(r.reward_cont(PI / 2.0).abs() < 1e-15);
    let mut rng = stream(4, &[]);
    for _ in 0..100 {
        let s: f64 = rng.random_range(-PI..PI);
        assert!((r.reward_mdp(s) - 0.1 * r.reward_cont(s)).abs() < 1e-12);
    }
    assert_eq!(mdp_gamma(1.0, 0.1), (-0.1_f64).exp());
}

#[test]
fn reward_solves_the_value_equation() {
    // βV − λ s V′ − ½σ² V″ = r for V = cos³, checked with finite differences
    let r = RewardSpec::default();
    let h = 1e-4;
    for s in [-2.5, -1.0, 0.0, 0.3, 2.0] {
        let v = true_value(s);
        let d1 = (true_value(s + h) - true_value(s - h)) / (2.0 * h);
        let d2 = (true_value(s + h) - 2.0 * v + true_value(s - h)) / (h * h);
        let lhs = r.beta * v - r.lambda_drift * s * d1 - 0.5 * r.sigma * r.sigma * d2;
        assert!((lhs - r.reward_cont(s)).abs() < 1e-6, "s={s}");
    }
}

#[test]
fn true_value_examples() {
    assert_eq!(true_value(0.0_f64), 1.0);
    assert!((true_value(PI / 3.0) - 0.125).abs() < 1e-15);
    assert!(true_value(PI / 2.0).abs() < 1e-15);
}

#[test]
fn regression_surface_examples() {
    assert!((regression_surface(&[0.25, 0.25]) - (1.0 + 0.5 * (-5.67_f64).exp())).abs() < 1e-12);
    assert!((regression_surface(&[0.25, 0.25]) - 1.00172).abs() < 1e-5);
    assert!((regression_surface(&[0.7, 0.7]) - 0.51742).abs() < 1e-5);
}

#[test]
fn regression_noise_has_stated_variance() {
    let n = 100_000;
    let pts: Vec<LabeledPoint<f64>> = sample_regression(&RegressionSpec::default(), n, 5).unwrap();
    assert!(pts.iter().all(|p| p.x.iter().all(|v| (0.0..1.0).contains(v))));
    let resid: Vec<f64> = pts.iter().map(|p| p.y - regression_surface(&p.x)).collect();
    let mean = resid.iter().sum::<f64>() / n as f64;
    let var = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = 0.25 * (2.0 / n as f64).sqrt();
    assert!((var - 0.25).abs() < 3.0 * se, "{var}");
    let again: Vec<LabeledPoint<f64>> = sample_regression(&RegressionSpec::default(), 10, 5).unwrap();
    assert_eq!(again[..], pts[..10]);
}

#[test]
fn test_grid_examples() {
    assert_eq!(mdp_test_grid::<f64>(2).unwrap(), vec![-PI, PI]);
    let three = mdp_test_grid::<f64>(3).unwrap();
    assert_eq!(three, vec![-PI, 0.0, PI]);
    let g = mdp_test_grid::<f64>(50).unwrap();
    assert_eq!(g.len(), 50);
    for w in g.windows(2) {
        assert!((w[1] - w[0] - 2.0 * PI / 49.0).abs() < 1e-14);
    }
    assert!(mdp_test_grid::<f64>(1).is_err());
}

#[test]
fn csv_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "a,b,y\n").unwrap();
    assert!(matches!(ingest_csv(&path), Err(Error::EmptyFile)));
    std::fs::write(&path, "").unwrap();
    assert!(matches!(ingest_csv(&path), Err(Error::EmptyFile)));
    std::fs::write(&path, "a,b,y\n1,2,3\n4.5,-1e-3,6\n").unwrap();
    let pts = ingest_csv(&path).unwrap();
    assert_eq!(pts, vec![LabeledPoint::new(vec![1.0, 2.0], 3.0), LabeledPoint::new(vec![4.5, -1e-3], 6.0)]);
    std::fs::write(&path, "a,b,y\n1,2,3\n4,five,6\n").unwrap();
    assert!(matches!(ingest_csv(&path), Err(Error::Parse { line: 3, .. })));
    std::fs::write(&path, "a,b,y\n1,2,3\n4,6\n").unwrap();
    assert!(matches!(ingest_csv(&path), Err(Error::Parse { line: 3, .. })));
}

#[test]
fn regression_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let pts: Vec<LabeledPoint<f64>> = sample_regression(&RegressionSpec::default(), 30, 8).unwrap();
    write_regression_csv(&path, &pts).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("x1,x2,y\n"));
    assert_eq!(ingest_csv(&path).unwrap(), pts);
}
