use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use replaystat::Scheme;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::experiment::{RepResult, SchemeOutcome, TestSet};
use crate::stats::{mean, median, quantile_sorted, sample_variance, summarize_boxplot, FiveNumber};

const Z_975: f64 = 1.959_963_984_540_054;

/// Per-test-point 95% bands over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointIntervals {
    pub mean: Vec<f64>,
    /// `mean ± 1.96 sd / √M`.
    pub normal_low: Vec<f64>,
    pub normal_high: Vec<f64>,
    /// 2.5% and 97.5% empirical quantiles.
    pub percentile_low: Vec<f64>,
    pub percentile_high: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    /// Replications in which both FULL and this scheme succeeded.
    pub replications: usize,
    pub failures: usize,
    pub skipped_subsamples: usize,
    /// `None` when fewer than two replications succeeded.
    pub median_variance_diff: Option<f64>,
    pub positive_fraction: Option<f64>,
    /// Median over test points of `(Var_full − Var_scheme) / Var_full`.
    pub median_relative_reduction: Option<f64>,
    /// Mean over replications of `RMSE_full − RMSE_scheme`.
    pub mean_rmse_diff: Option<f64>,
    pub mean_rmse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Solves only, after per-experience moments are cached; summed over replications.
    pub solve_seconds: f64,
    /// Solves plus moment preparation plus one-off feature-map construction.
    pub total_seconds: f64,
}

/// Aggregates of one experiment. Maps are keyed by scheme label
/// (`full`, `u`, `v`, `w`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub subsample_size: usize,
    pub ridge: Option<f64>,
    pub replications_used: usize,
    /// Replications dropped because FULL failed.
    pub dropped_replications: usize,
    pub test_x: Vec<Vec<f64>>,
    pub truth: Vec<f64>,
    pub variance: BTreeMap<String, Vec<f64>>,
    pub variance_diff: BTreeMap<String, Vec<f64>>,
    pub rmse: BTreeMap<String, Vec<Option<f64>>>,
    pub summary: BTreeMap<String, SchemeSummary>,
    pub intervals: BTreeMap<String, PointIntervals>,
    pub boxplots: BTreeMap<String, FiveNumber>,
    /// Present only for timed runs, so untimed reports are reproducible.
    pub timings: Option<BTreeMap<String, Timing>>,
}

impl ExperimentReport {
    /// Labels of the resampled schemes, in config order.
    pub fn resampled_labels(&self) -> Vec<&'static str> {
        self.config.resampled_schemes().iter().map(|s| s.label()).collect()
    }
}

fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    (pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64).sqrt()
}

fn intervals(rows: &[&Vec<f64>], m: usize) -> PointIntervals {
    let mut out = PointIntervals {
        mean: Vec::with_capacity(m),
        normal_low: Vec::with_capacity(m),
        normal_high: Vec::with_capacity(m),
        percentile_low: Vec::with_capacity(m),
        percentile_high: Vec::with_capacity(m),
    };
    let r = rows.len() as f64;
    for j in 0..m {
        let mut col: Vec<f64> = rows.iter().map(|row| row[j]).collect();
        let mu = mean(&col);
        let half = Z_975 * (sample_variance(&col) / r).sqrt();
        col.sort_by(f64::total_cmp);
        out.mean.push(mu);
        out.normal_low.push(mu - half);
        out.normal_high.push(mu + half);
        out.percentile_low.push(quantile_sorted(&col, 0.025));
        out.percentile_high.push(quantile_sorted(&col, 0.975));
    }
    out
}

pub(crate) fn build_report(
    cfg: &ExperimentConfig,
    reps: &[RepResult],
    test: &TestSet,
    ridge: Option<f64>,
    feature_seconds: Option<f64>,
    uses_features: &dyn Fn(Scheme) -> bool,
) -> ExperimentReport {
    let kept: Vec<&RepResult> = reps.iter().filter(|r| r.full.is_ok()).collect();
    let m = test.truth.len();
    let schemes = cfg.resampled_schemes();

    let mut variance = BTreeMap::new();
    let mut variance_diff = BTreeMap::new();
    let mut rmse_map = BTreeMap::new();
    let mut summary = BTreeMap::new();
    let mut ints = BTreeMap::new();
    let mut boxplots = BTreeMap::new();
    let mut timings = BTreeMap::new();

    let full_rows: Vec<&Vec<f64>> = kept
        .iter()
        .map(|r| &r.full.as_ref().expect("kept").preds)
        .collect();
    let column_var = |rows: &[&Vec<f64>]| -> Vec<f64> {
        (0..m)
            .map(|j| sample_variance(&rows.iter().map(|row| row[j]).collect::<Vec<_>>()))
            .collect()
    };
    let var_full = column_var(&full_rows);
    let rmse_full: Vec<f64> = full_rows.iter().map(|p| rmse(p, &test.truth)).collect();
    variance.insert("full".to_string(), var_full.clone());
    rmse_map.insert("full".to_string(), rmse_full.iter().map(|v| Some(*v)).collect::<Vec<_>>());
    ints.insert("full".to_string(), intervals(&full_rows, m));
    if let Ok(b) = summarize_boxplot(&rmse_full) {
        boxplots.insert("rmse_full".to_string(), b);
    }
    if let Some(fs) = feature_seconds {
        let full = kept.iter().map(|r| r.full.as_ref().expect("kept"));
        timings.insert("full".to_string(), timing(full, uses_features(Scheme::Full).then_some(fs)));
    }

    for (si, scheme) in schemes.iter().enumerate() {
        let label = scheme.label().to_string();
        let outcomes: Vec<Option<&SchemeOutcome>> =
            kept.iter().map(|r| r.others[si].as_ref().ok()).collect();
        let rows: Vec<&Vec<f64>> = outcomes.iter().flatten().map(|o| &o.preds).collect();
        let failures = outcomes.iter().filter(|o| o.is_none()).count();
        let skipped = outcomes.iter().flatten().map(|o| o.skipped).sum();
        let scheme_rmse: Vec<Option<f64>> = outcomes
            .iter()
            .map(|o| o.map(|o| rmse(&o.preds, &test.truth)))
            .collect();
        let rmse_diffs: Vec<f64> = scheme_rmse
            .iter()
            .zip(&rmse_full)
            .filter_map(|(s, f)| s.map(|s| f - s))
            .collect();
        let present: Vec<f64> = scheme_rmse.iter().flatten().copied().collect();
        rmse_map.insert(label.clone(), scheme_rmse);

        let mut s = SchemeSummary {
            replications: rows.len(),
            failures,
            skipped_subsamples: skipped,
            median_variance_diff: None,
            positive_fraction: None,
            median_relative_reduction: None,
            mean_rmse_diff: (!rmse_diffs.is_empty()).then(|| mean(&rmse_diffs)),
            mean_rmse: (!present.is_empty()).then(|| mean(&present)),
        };
        if let Ok(b) = summarize_boxplot(&rmse_diffs) {
            boxplots.insert(format!("rmse_diff_{label}"), b);
        }
        if rows.len() >= 2 {
            let var = column_var(&rows);
            let diff: Vec<f64> = var_full.iter().zip(&var).map(|(f, v)| f - v).collect();
            let rel: Vec<f64> = var_full
                .iter()
                .zip(&diff)
                .filter(|(f, _)| **f > 0.0)
                .map(|(f, d)| d / f)
                .collect();
            s.median_variance_diff = Some(median(&diff));
            s.positive_fraction = Some(diff.iter().filter(|d| **d > 0.0).count() as f64 / m as f64);
            s.median_relative_reduction = (!rel.is_empty()).then(|| median(&rel));
            if let Ok(b) = summarize_boxplot(&diff) {
                boxplots.insert(format!("variance_diff_{label}"), b);
            }
            ints.insert(label.clone(), intervals(&rows, m));
            variance.insert(label.clone(), var);
            variance_diff.insert(label.clone(), diff);
        }
        summary.insert(label.clone(), s);
        if let Some(fs) = feature_seconds {
            timings.insert(label, timing(outcomes.iter().flatten().copied(), uses_features(*scheme).then_some(fs)));
        }
    }

    ExperimentReport {
        config: cfg.clone(),
        subsample_size: cfg.subsample_size(),
        ridge,
        replications_used: kept.len(),
        dropped_replications: reps.len() - kept.len(),
        test_x: test.x.clone(),
        truth: test.truth.clone(),
        variance,
        variance_diff,
        rmse: rmse_map,
        summary,
        intervals: ints,
        boxplots,
        timings: feature_seconds.map(|_| timings),
    }
}

fn timing<'a>(outcomes: impl Iterator<Item = &'a SchemeOutcome>, feature_seconds: Option<f64>) -> Timing {
    let (solve, prep) = outcomes.fold((0.0, 0.0), |(s, p), o| (s + o.seconds, p + o.prep_seconds));
    Timing {
        solve_seconds: solve,
        total_seconds: solve + prep + feature_seconds.unwrap_or(0.0),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Writes `report.json`, `variance_diffs.csv`, `rmse.csv`, `timings.csv`
/// and `boxplot.csv` into `dir`, creating it if needed.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("report.json"))?), report)?;

    let labels: Vec<&str> = report
        .resampled_labels()
        .into_iter()
        .filter(|l| report.variance.contains_key(*l))
        .collect();
    let mut w = csv::Writer::from_path(dir.join("variance_diffs.csv"))?;
    let mut header = vec!["test_index".to_string(), "var_full".to_string()];
    header.extend(labels.iter().map(|l| format!("var_{l}")));
    header.extend(labels.iter().map(|l| format!("diff_{l}")));
    w.write_record(&header)?;
    for j in 0..report.truth.len() {
        let mut row = vec![j.to_string(), fmt(report.variance["full"][j])];
        row.extend(labels.iter().map(|l| fmt(report.variance[*l][j])));
        row.extend(labels.iter().map(|l| fmt(report.variance_diff[*l][j])));
        w.write_record(&row)?;
    }
    w.flush()?;

    let all: Vec<&str> = report.resampled_labels();
    let mut w = csv::Writer::from_path(dir.join("rmse.csv"))?;
    let mut header = vec!["rep".to_string(), "rmse_full".to_string()];
    header.extend(all.iter().map(|l| format!("rmse_{l}")));
    w.write_record(&header)?;
    for r in 0..report.replications_used {
        let mut row = vec![r.to_string(), fmt_opt(report.rmse["full"][r])];
        row.extend(all.iter().map(|l| fmt_opt(report.rmse[*l][r])));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
    w.write_record(["scheme", "solve_seconds", "total_seconds"])?;
    if let Some(t) = &report.timings {
        for label in std::iter::once("full").chain(all.iter().copied()) {
            if let Some(t) = t.get(label) {
                w.write_record([label.to_string(), fmt(t.solve_seconds), fmt(t.total_seconds)])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("boxplot.csv"))?;
    w.write_record(["series", "min", "q1", "median", "q3", "max"])?;
    for (name, b) in &report.boxplots {
        w.write_record([name.clone(), fmt(b.min), fmt(b.q1), fmt(b.median), fmt(b.q3), fmt(b.max)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> anyhow::Result<ExperimentReport> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}
