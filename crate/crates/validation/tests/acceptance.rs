//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//! Built with `harness = false` so the lines are printed by a plain `cargo test`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use replaystat::diagnostics::{blom_variance_check, estimate_zeta, lemma1_sigma, BlomSettings};
use replaystat::env::{sample_regression, sample_trajectories, InitSpec, OuSpec, RegressionSpec, RewardSpec};
use replaystat::krr::{auto_ridge, krls_bandwidth, krr_moments, make_feature_map, LabeledPoint};
use replaystat::policy::{lstd_moments, phibe_moments, phibe_mu_sigma, FourierBasis, PhibeOrder, Trajectory};
use replaystat::replay::scalar_moments;
use replaystat::rng::{stream, StreamRng};
use replaystat::{estimate, estimate_full, MomentMap, ReplayBuffer, ReplayConfig};
use replaystat_bench::{presets, run_experiment, run_experiment_with, ExperimentReport, KrrBaseline, RunOptions};

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn run(cfg: &replaystat_bench::ExperimentConfig) -> ExperimentReport {
    run_experiment(cfg).expect("experiment runs")
}

/// Median variance difference > 0 and at least 80% of test points positive, for U and V.
fn variance_rule(report: &ExperimentReport) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for label in ["u", "v"] {
        let s = &report.summary[label];
        let med = s.median_variance_diff.unwrap_or(f64::NAN);
        let pos = s.positive_fraction.unwrap_or(0.0);
        let rel = s.median_relative_reduction.unwrap_or(f64::NAN);
        pass &= med > 0.0 && pos >= 0.8;
        parts.push(format!("{label}: median diff {med:.4e}, positive {:.0}%, rel. reduction {rel:.3}", pos * 100.0));
    }
    (pass, parts.join("; "))
}

fn criterion_1(lstd: &ExperimentReport) -> Check {
    let (pass, detail) = variance_rule(lstd);
    check(pass, detail)
}

fn criterion_2(lstd: &ExperimentReport) -> Check {
    let phibe = run(&presets::phibe(true));
    let (mut pass, detail) = variance_rule(&phibe);
    let mut parts = vec![detail];
    for label in ["u", "v"] {
        let ours = phibe.summary[label].median_relative_reduction.unwrap_or(f64::NAN);
        let theirs = lstd.summary[label].median_relative_reduction.unwrap_or(f64::NAN);
        pass &= ours > theirs;
        parts.push(format!("{label} rel. reduction {ours:.3} vs LSTD {theirs:.3}"));
    }
    check(pass, parts.join("; "))
}

fn criterion_3() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [100, 200] {
        let (ok, detail) = variance_rule(&run(&presets::krr(n)));
        pass &= ok;
        parts.push(format!("n={n} [{detail}]"));
    }
    check(pass, parts.join(" "))
}

/// Per-scheme (solve, total) seconds, each the minimum over three timed runs.
fn min_timings(n: usize) -> [(f64, f64); 3] {
    let mut cfg = presets::krr(n);
    cfg.presets.krr_baseline = KrrBaseline::ExactKernel;
    let mut best = [(f64::INFINITY, f64::INFINITY); 3];
    for _ in 0..3 {
        let report = run_experiment_with(&cfg, &RunOptions { timed: true }).expect("timed run");
        let t = report.timings.expect("timed report has timings");
        for (slot, label) in best.iter_mut().zip(["full", "u", "v"]) {
            slot.0 = slot.0.min(t[label].solve_seconds);
            slot.1 = slot.1.min(t[label].total_seconds);
        }
    }
    best
}

fn criterion_4() -> (Check, String) {
    let small = min_timings(200);
    let large = min_timings(250);
    let saving = |t: &[(f64, f64); 3], i: usize| t[0].0 - t[i].0;
    let saving_total = |t: &[(f64, f64); 3], i: usize| t[0].1 - t[i].1;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, label) in [(1, "u"), (2, "v")] {
        let (s200, s250) = (saving(&small, i), saving(&large, i));
        pass &= s250 > 0.0 && s250 > s200;
        parts.push(format!("t - t_{label}: {s200:.4}s at n=200, {s250:.4}s at n=250"));
    }
    let info = format!(
        "including moment preparation: t - t_u {:.4}s / {:.4}s, t - t_v {:.4}s / {:.4}s at n=200 / 250",
        saving_total(&small, 1),
        saving_total(&large, 1),
        saving_total(&small, 2),
        saving_total(&large, 2)
    );
    (check(pass, parts.join("; ")), info)
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

fn criterion_5() -> Check {
    let t = Instant::now();
    let map = scalar_moments(|_: &f64| 1.0, |z: &f64| *z);
    let report = blom_variance_check(&normal, &map, &BlomSettings::new(8, 3, 5, 2000, 20240601)).expect("blom");
    let secs = t.elapsed().as_secs_f64();
    check(
        report.ci_contains_zero() && secs < 60.0,
        format!(
            "lhs {:.5}, rhs {:.5}, 99% CI on lhs - rhs [{:.5}, {:.5}], {secs:.1}s",
            report.lhs, report.rhs, report.ci_low, report.ci_high
        ),
    )
}

fn criterion_6() -> Check {
    let uniform = |r: &mut StreamRng| r.random_range(-1.0..1.0);
    let map = scalar_moments(|z: &f64| 1.0 + z * z, |z: &f64| *z);
    let buffer = |seed: u64, n: usize| {
        let mut rng = stream(seed, &[]);
        ReplayBuffer::new((0..n).map(|_| uniform(&mut rng)).collect::<Vec<f64>>()).expect("buffer")
    };
    let (n, reps) = (2000, 2000);
    let scaled: Vec<f64> = (0..reps)
        .map(|r| (n as f64).sqrt() * estimate_full(&buffer(10_000 + r, n), &map).expect("full").theta[0])
        .collect();
    let mean = scaled.iter().sum::<f64>() / reps as f64;
    let mc = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let plug = lemma1_sigma(&buffer(1, n), &map).expect("sigma").sigma[(0, 0)];
    let rel = (plug - mc).abs() / mc;
    check(
        rel < 0.10,
        format!("plug-in {plug:.5}, Monte Carlo {mc:.5}, relative gap {rel:.3} (exact 3/16)"),
    )
}

fn criterion_7() -> Check {
    let (lambda, dt, s) = (0.05_f64, 0.1, 1.0);
    let path = Trajectory::new(vec![s, s * (lambda * dt).exp(), s * (2.0 * lambda * dt).exp()], dt).expect("path");
    let e1 = (phibe_mu_sigma(&path, 0, PhibeOrder::First).expect("first").0 - lambda).abs();
    let e2 = (phibe_mu_sigma(&path, 0, PhibeOrder::Second).expect("second").0 - lambda).abs();
    check(
        (e1 - 1.2521e-4).abs() < 1e-8 && e2 <= 1e-6 && e1 / e2 >= 100.0,
        format!("first-order error {e1:.5e}, second-order error {e2:.3e}, ratio {:.0}", e1 / e2),
    )
}

fn full_vs_u<E: Sync, M: MomentMap<f64, E>>(buf: &ReplayBuffer<E>, map: &M) -> f64 {
    let n = buf.len();
    let full = estimate(buf, map, &ReplayConfig::full()).expect("full").theta;
    let u = estimate(buf, map, &ReplayConfig::u_stat(7, n, 3)).expect("u").theta;
    (full - u).amax()
}

fn criterion_8() -> Check {
    let n = 100;
    let trajs: Vec<Trajectory<f64>> =
        sample_trajectories(&OuSpec::default(), &InitSpec::default(), n, 2, 11).expect("trajectories");
    let buf = ReplayBuffer::new(trajs).expect("buffer");
    let basis = FourierBasis::new(4);
    let lstd_reward = RewardSpec {
        beta: 1.0,
        ..RewardSpec::default()
    };
    let lstd = full_vs_u(&buf, &lstd_moments(basis, (-0.1_f64).exp(), |s: f64| lstd_reward.reward_mdp(s)));
    let reward = RewardSpec::default();
    let phibe = full_vs_u(&buf, &phibe_moments(basis, reward.beta, |s: f64| reward.reward_cont(s), PhibeOrder::Second));
    let data: Vec<LabeledPoint<f64>> = sample_regression(&RegressionSpec::default(), n, 12).expect("regression");
    let fm = make_feature_map(2, 256, krls_bandwidth(2, RegressionSpec::INPUT_SD), 13).expect("features");
    let krr = full_vs_u(&ReplayBuffer::new(data).expect("buffer"), &krr_moments(fm, auto_ridge(n)));
    let worst = lstd.max(phibe).max(krr);
    check(
        worst <= 1e-12,
        format!("max |FULL - U(k=n)|: LSTD {lstd:.2e}, PhiBE {phibe:.2e}, KRR {krr:.2e}"),
    )
}

fn criterion_9() -> Check {
    let map = scalar_moments(|_: &f64| 1.0, |z: &f64| *z);
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [5usize, 10, 20] {
        let z = estimate_zeta(&normal, &map, 1, k, 200_000, 9000 + k as u64).expect("zeta");
        let k2 = (k * k) as f64;
        let (est, se) = (k2 * z.zeta[(0, 0)], k2 * z.std_err[(0, 0)]);
        pass &= (est - 1.0).abs() <= 3.0 * se;
        parts.push(format!("k={k}: {est:.4} ± {se:.4}"));
    }
    check(pass, parts.join(", "))
}

fn criterion_10(lstd: &ExperimentReport) -> Check {
    let full: Vec<f64> = lstd.rmse["full"].iter().map(|v| v.expect("full rmse")).collect();
    let mean_full = full.iter().sum::<f64>() / full.len() as f64;
    let mut parts = vec![format!("mean R~ {mean_full:.4e}")];
    let mut pass = true;
    for label in ["u", "v"] {
        let diff = lstd.summary[label].mean_rmse_diff.unwrap_or(f64::NAN);
        if label == "u" {
            pass = diff >= -0.01 * mean_full;
        }
        let five = &lstd.boxplots[&format!("rmse_diff_{label}")];
        parts.push(format!(
            "mean(R~ - R_{label}) {diff:.4e} [min {:.3e}, q1 {:.3e}, median {:.3e}, q3 {:.3e}, max {:.3e}]",
            five.min, five.q1, five.median, five.q3, five.max
        ));
    }
    check(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, c: Check| {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {name}: {}", c.detail);
        failed += usize::from(!c.pass);
    };
    let lstd = run(&presets::lstd());
    report(1, "variance reduction, LSTD", criterion_1(&lstd));
    report(2, "variance reduction, PhiBE second order", criterion_2(&lstd));
    report(3, "variance reduction, kernel ridge regression", criterion_3());
    let (timing, info) = criterion_4();
    report(4, "timing sign and growth (solve time)", timing);
    println!("             note: {info}");
    report(5, "incomplete U variance identity", criterion_5());
    report(6, "delta-method covariance", criterion_6());
    report(7, "drift estimator order", criterion_7());
    report(8, "U with k = n recovers the full estimator", criterion_8());
    report(9, "scaled first-order component", criterion_9());
    report(10, "RMSE tendency, LSTD", criterion_10(&lstd));
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
