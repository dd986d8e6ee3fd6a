use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use replaystat::diagnostics::{
    blom_variance_check, complete_u, estimate_zeta, influence_values, lemma1_sigma, zeta_ratios, BlomSettings,
};
use replaystat::replay::{scalar_moments, FnMomentMap};
use replaystat::rng::{stream, StreamRng};
use replaystat::{estimate_full, eval_h_k, Error, MomentMap, ReplayBuffer};

fn mean_map() -> impl MomentMap<f64, f64> {
    scalar_moments(|_: &f64| 1.0, |z: &f64| *z)
}

fn ratio_map() -> impl MomentMap<f64, f64> {
    scalar_moments(|z: &f64| *z, |z: &f64| z * z)
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Independent enumerator: recursive include/exclude over buffer positions.
fn recursive_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        if start == n {
            return;
        }
        cur.push(start);
        go(start + 1, n, k, cur, out);
        cur.pop();
        go(start + 1, n, k, cur, out);
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn complete_by_recursion<M: MomentMap<f64, f64>>(data: &[f64], map: &M, k: usize) -> f64 {
    let subsets = recursive_subsets(data.len(), k);
    let total: f64 = subsets
        .iter()
        .map(|s| {
            let items: Vec<&f64> = s.iter().map(|&i| &data[i]).collect();
            eval_h_k(&items, map).unwrap()[0]
        })
        .sum();
    total / subsets.len() as f64
}

#[test]
fn complete_u_examples() {
    let data = [1.0, 2.0, 3.0, 4.0];
    let buf = ReplayBuffer::new(data.to_vec()).unwrap();
    assert!((complete_u(&buf, &mean_map(), 2).unwrap()[0] - 2.5).abs() < 1e-15);
    let full = estimate_full(&buf, &ratio_map()).unwrap().theta[0];
    assert_eq!(complete_u(&buf, &ratio_map(), 4).unwrap()[0], full);
    let small = ReplayBuffer::new(vec![1.0, 2.0]).unwrap();
    assert!((complete_u(&small, &ratio_map(), 1).unwrap()[0] - 1.5).abs() < 1e-15);
}

#[test]
fn complete_u_matches_recursive_enumerator() {
    let data: Vec<f64> = (0..9).map(|i| 0.4 + (i as f64 * 1.3).cos().abs()).collect();
    let buf = ReplayBuffer::new(data.clone()).unwrap();
    for k in 1..=9 {
        let a = complete_u(&buf, &ratio_map(), k).unwrap()[0];
        let b = complete_by_recursion(&data, &ratio_map(), k);
        assert!(((a - b) / b).abs() < 1e-13, "k={k}: {a} vs {b}");
    }
}

#[test]
fn complete_u_respects_cap() {
    let buf = ReplayBuffer::new(vec![1.0; 40]).unwrap();
    assert!(matches!(
        complete_u(&buf, &mean_map(), 20),
        Err(Error::CapExceeded { .. })
    ));
}

#[test]
fn zeta_of_sample_mean() {
    let reps = 40_000;
    for k in [1usize, 3, 6] {
        let z = estimate_zeta(&normal, &mean_map(), k, k, reps, 11).unwrap();
        let expect = 1.0 / k as f64;
        assert!(
            (z.zeta[(0, 0)] - expect).abs() < 3.0 * z.std_err[(0, 0)],
            "k={k}: {} ± {}",
            z.zeta[(0, 0)],
            z.std_err[(0, 0)]
        );
        let z1 = estimate_zeta(&normal, &mean_map(), 1, k, reps, 12).unwrap();
        let expect = 1.0 / (k * k) as f64;
        assert!(
            (z1.zeta[(0, 0)] - expect).abs() < 3.0 * z1.std_err[(0, 0)],
            "k={k}: {} ± {}",
            z1.zeta[(0, 0)],
            z1.std_err[(0, 0)]
        );
    }
}

#[test]
fn zeta_of_constant_generator_is_zero() {
    let z = estimate_zeta(&|_: &mut StreamRng| 0.7, &ratio_map(), 2, 4, 50, 1).unwrap();
    assert_eq!(z.zeta[(0, 0)], 0.0);
}

#[test]
fn zeta_input_validation() {
    assert!(estimate_zeta(&normal, &mean_map(), 0, 3, 10, 0).is_err());
    assert!(estimate_zeta(&normal, &mean_map(), 4, 3, 10, 0).is_err());
    assert!(estimate_zeta(&normal, &mean_map(), 1, 3, 1, 0).is_err());
}

#[test]
fn zeta_ratio_summaries() {
    let kk = estimate_zeta(&normal, &mean_map(), 5, 5, 20_000, 3).unwrap();
    let one = estimate_zeta(&normal, &mean_map(), 1, 5, 20_000, 4).unwrap();
    let r = zeta_ratios(&kk, &one);
    // ζ_kk / ζ_1k = k for the sample mean
    assert!((r.trace_ratio - 5.0).abs() < 1.0, "{r:?}");
    assert!((r.spectral_ratio - r.trace_ratio.abs()).abs() < 1e-9);
}

#[test]
fn scaled_first_order_component_matches_influence_variance() {
    for k in [5usize, 10, 20] {
        let z = estimate_zeta(&normal, &mean_map(), 1, k, 200_000, 100 + k as u64).unwrap();
        let k2 = (k * k) as f64;
        let est = k2 * z.zeta[(0, 0)];
        let se = k2 * z.std_err[(0, 0)];
        assert!((est - 1.0).abs() < 3.0 * se, "k={k}: {est} ± {se}");
    }
}

#[test]
fn blom_identity_small_instance() {
    let settings = BlomSettings::new(8, 3, 5, 1000, 2024);
    let report = blom_variance_check(&normal, &mean_map(), &settings).unwrap();
    // exact sides for the sample mean: Var(U_{8,3}) = 1/8, ζ_{3,3} = 1/3
    let exact = 0.8 / 8.0 + 0.2 / 3.0;
    assert!(report.ci_contains_zero(), "{report:?}");
    assert!((report.rhs - exact).abs() < 0.02, "{report:?}");
    assert_eq!(report.reps, 1000);
}

#[test]
fn blom_identity_degenerate_cases() {
    // B = 1: rhs is ζ_kk alone
    let one = blom_variance_check(&normal, &mean_map(), &BlomSettings::new(6, 2, 1, 400, 5)).unwrap();
    assert!((one.rhs - one.zeta_kk).abs() < 1e-15);
    assert!(one.ci_contains_zero(), "{one:?}");
    // k = n: the resampled statistic is the full estimator
    let full = blom_variance_check(&normal, &mean_map(), &BlomSettings::new(5, 5, 3, 400, 6)).unwrap();
    assert!((full.lhs - full.var_complete).abs() < 1e-12);
    assert!(full.ci_contains_zero(), "{full:?}");
}

#[test]
fn blom_rejects_bad_settings() {
    assert!(blom_variance_check(&normal, &mean_map(), &BlomSettings::new(8, 3, 5, 50, 0)).is_err());
    assert!(matches!(
        blom_variance_check(&normal, &mean_map(), &BlomSettings::new(40, 20, 5, 100, 0)),
        Err(Error::CapExceeded { .. })
    ));
}

fn sample_buffer(n: usize, seed: u64, draw: impl Fn(&mut StreamRng) -> f64) -> ReplayBuffer<f64> {
    let mut rng = stream(seed, &[]);
    ReplayBuffer::new((0..n).map(|_| draw(&mut rng)).collect()).unwrap()
}

#[test]
fn sigma_for_constant_g_is_variance_of_f() {
    let buf = sample_buffer(300, 1, normal);
    let cov = lemma1_sigma(&buf, &mean_map()).unwrap();
    let data: Vec<f64> = buf.payloads().copied().collect();
    let m = data.iter().sum::<f64>() / 300.0;
    let var = data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 299.0;
    assert!((cov.sigma[(0, 0)] - var).abs() < 1e-12);
    assert_eq!(cov.jacobian.shape(), (1, 2));
    assert_eq!(cov.sigma0.shape(), (2, 2));
}

#[test]
fn sigma_vanishes_when_f_equals_g() {
    let buf = sample_buffer(200, 2, |r| 1.0 + r.random::<f64>());
    let same = scalar_moments(|z: &f64| *z, |z: &f64| *z);
    let cov = lemma1_sigma(&buf, &same).unwrap();
    assert!((cov.theta[0] - 1.0).abs() < 1e-15);
    assert!(cov.sigma[(0, 0)].abs() < 1e-12);
}

#[test]
fn sigma_matches_monte_carlo_on_two_point_law() {
    let two_point = |r: &mut StreamRng| if r.random::<bool>() { 2.0 } else { 1.0 };
    let theta = 2.5 / 1.5;
    let n = 2000;
    let reps = 2000;
    let scaled: Vec<f64> = (0..reps)
        .map(|r| {
            let buf = sample_buffer(n, 1000 + r, two_point);
            (n as f64).sqrt() * (estimate_full(&buf, &ratio_map()).unwrap().theta[0] - theta)
        })
        .collect();
    let mean = scaled.iter().sum::<f64>() / reps as f64;
    let mc = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let plug = lemma1_sigma(&sample_buffer(n, 7, two_point), &ratio_map()).unwrap().sigma[(0, 0)];
    // closed form: Var(Z² − θZ) / (EZ)² with θ = 5/3
    let h = |z: f64| z * z - theta * z;
    let exact = (0.5 * h(1.0).powi(2) + 0.5 * h(2.0).powi(2)) / 2.25;
    assert!(((plug - mc) / mc).abs() < 0.10, "plug {plug} mc {mc} exact {exact}");
    assert!(((exact - mc) / mc).abs() < 0.10);
}

#[test]
fn sigma_in_two_dimensions_is_sandwich() {
    let buf = sample_buffer(150, 3, normal);
    let m = FnMomentMap::new(
        2,
        |z: &f64| DMatrix::from_row_slice(2, 2, &[2.0 + z.sin(), 0.3 * z, 0.1, 1.5 + z * z]),
        |z: &f64| DVector::from_vec(vec![*z, z.cos()]),
    );
    let cov = lemma1_sigma(&buf, &m).unwrap();
    assert_eq!(cov.jacobian.shape(), (2, 6));
    let rebuilt = &cov.jacobian * &cov.sigma0 * cov.jacobian.transpose();
    assert_eq!(rebuilt, cov.sigma);
    let asym = (&cov.sigma - cov.sigma.transpose()).amax();
    assert!(asym <= 1e-10 * cov.sigma.amax());
    let eig = cov.sigma.clone().symmetric_eigen().eigenvalues;
    assert!(eig.min() >= -1e-10 * cov.sigma.amax());
}

#[test]
fn sigma_needs_enough_data() {
    let buf = ReplayBuffer::new(vec![1.0, 2.0]).unwrap();
    assert!(lemma1_sigma(&buf, &mean_map()).is_err());
}

#[test]
fn influence_examples() {
    let constant = ReplayBuffer::new(vec![1.3; 5]).unwrap();
    for h in influence_values(&constant, &ratio_map()).unwrap() {
        assert_eq!(h[0], 0.0);
    }
    let buf = ReplayBuffer::new(vec![1.0, 4.0, -2.0, 0.5]).unwrap();
    let h = influence_values(&buf, &mean_map()).unwrap();
    for (hi, z) in h.iter().zip(buf.payloads()) {
        assert!((hi[0] - (z - 0.875)).abs() < 1e-15);
    }
    let zeros = ReplayBuffer::new(vec![0.0, 0.0]).unwrap();
    assert!(matches!(
        influence_values(&zeros, &ratio_map()),
        Err(Error::SingularSystem { .. })
    ));
}

proptest! {
    #[test]
    fn influence_values_average_to_zero(values in prop::collection::vec(0.2f64..5.0, 2..40)) {
        let buf = ReplayBuffer::new(values).unwrap();
        let m = FnMomentMap::new(
            2,
            |z: &f64| DMatrix::from_row_slice(2, 2, &[*z, 0.2, 0.1 * z, 1.0 + z]),
            |z: &f64| DVector::from_vec(vec![z * z, z.ln()]),
        );
        let h = influence_values(&buf, &m).unwrap();
        let n = h.len() as f64;
        let mean = h.iter().fold(DVector::zeros(2), |a, b| a + b) / n;
        prop_assert!(mean.amax() < 1e-10);
    }

    #[test]
    fn sigma_is_invariant_to_buffer_order(values in prop::collection::vec(0.2f64..5.0, 6..40), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut stream(seed, &[]));
        let a = lemma1_sigma(&ReplayBuffer::new(values).unwrap(), &ratio_map()).unwrap().sigma[(0, 0)];
        let b = lemma1_sigma(&ReplayBuffer::new(shuffled).unwrap(), &ratio_map()).unwrap().sigma[(0, 0)];
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
    }
}
