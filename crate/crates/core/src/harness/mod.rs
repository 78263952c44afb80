//! Replica orchestration and statistical acceptance experiments.

mod runners;
mod spec;
mod stats;
pub mod verify;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::SeedSpec;
use crate::error::Result;

pub use spec::{ExperimentId, ExperimentSpec, Grid, GridPoint, Thresholds};
pub use stats::{fit_scaling, ScalingFit, Stats};

/// One row of the long-format table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub theta: f64,
    pub gamma: f64,
    pub replica: usize,
    pub observable: String,
    pub value: f64,
}

/// Aggregate of one observable at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub observable: String,
    /// Point estimate the thresholds are applied to.
    pub value: f64,
    /// Statistics of the per-replica values.
    pub replicas: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub point: GridPoint,
    pub regime: String,
    pub estimates: Vec<Estimate>,
    pub events: u64,
    pub estimated_events: f64,
    /// Set when the point was not run; the reason is the diagnostic.
    pub skipped: Option<String>,
    /// Named curves, e.g. a pooled profile `(u, rho)` or a mean trace `(t, m)`.
    #[serde(skip)]
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
    #[serde(skip)]
    pub records: Vec<Record>,
}

impl PointReport {
    pub fn estimate(&self, observable: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.observable == observable)
    }

    /// All estimates whose name is `metric` or `metric[...]`.
    pub fn metric_estimates<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a Estimate> + 'a {
        self.estimates.iter().filter(move |e| {
            e.observable == metric
                || (e.observable.starts_with(metric) && e.observable[metric.len()..].starts_with('['))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub line: String,
    pub observable: String,
    pub fit: Option<ScalingFit>,
    pub expected_slope: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: ExperimentId,
    pub name: String,
    pub master_seed: u64,
    pub metric: String,
    pub points: Vec<PointReport>,
    pub fits: Vec<FitReport>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.points.iter().flat_map(|p| p.records.iter())
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.checks.iter().map(|c| format!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)).collect()
    }
}

/// Seed for replica `replica` of grid point `point`.
pub fn replica_seed(master_seed: u64, point: usize, replica: usize) -> SeedSpec {
    let base = SeedSpec::new(master_seed, 0).derived(point as u64 + 1).master_seed;
    SeedSpec::new(base, replica as u64)
}

/// Run `f` for every replica in parallel; results come back in replica order.
pub(crate) fn run_replicas<T: Send>(replicas: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..replicas).into_par_iter().map(f).collect()
}

/// Mean with the terms summed in sorted order.
pub(crate) fn ordered_mean(xs: &[f64]) -> f64 {
    Stats::from_samples(xs).mean
}

/// Run every grid point of `spec`. Deterministic in `(spec, master_seed)`.
pub fn run_experiment(spec: &ExperimentSpec, master_seed: u64) -> Result<ExperimentReport> {
    spec.validate()?;
    let grid = spec.grid.points();
    let per_replica =
        grid.iter().map(|p| runners::events_per_replica(spec, p)).collect::<Result<Vec<f64>>>()?;
    let costliest = per_replica.iter().copied().fold(0.0, f64::max);
    let mut points = Vec::new();
    for (index, (point, &cost)) in grid.into_iter().zip(&per_replica).enumerate() {
        let replicas = spec.replicas_at(cost, costliest);
        let estimated = replicas as f64 * cost;
        if estimated > spec.max_events {
            let reason = format!(
                "estimated {estimated:.3e} events exceeds max_events = {:.3e}; point skipped",
                spec.max_events
            );
            log::warn!("{}: {reason}", point.label());
            points.push(PointReport {
                point,
                regime: crate::theory::Regime::classify(point.theta, point.gamma).name().into(),
                estimates: Vec::new(),
                events: 0,
                estimated_events: estimated,
                skipped: Some(reason),
                curves: BTreeMap::new(),
                records: Vec::new(),
            });
            continue;
        }
        log::info!("{} {}: running {replicas} replicas (~{estimated:.2e} events)", spec.id, point.label());
        let mut report = runners::run_point(spec, &point, replicas, index, master_seed)?;
        report.estimated_events = estimated;
        points.push(report);
    }
    let (checks, fits) = evaluate(spec, &points);
    let pass = checks.iter().all(|c| c.pass);
    Ok(ExperimentReport {
        id: spec.id,
        name: spec.name.clone(),
        master_seed,
        metric: spec.metric().to_string(),
        points,
        fits,
        checks,
        pass,
    })
}

fn evaluate(spec: &ExperimentSpec, points: &[PointReport]) -> (Vec<Check>, Vec<FitReport>) {
    let metric = spec.metric();
    let mut checks = Vec::new();
    let mut fits = Vec::new();

    for p in points.iter().filter(|p| p.skipped.is_some()) {
        checks.push(Check {
            name: format!("{} {}", spec.id, p.point.label()),
            pass: false,
            detail: p.skipped.clone().unwrap_or_default(),
        });
    }

    // group points into ladders over N
    let mut lines: BTreeMap<[u64; 5], Vec<&PointReport>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.skipped.is_none()) {
        lines.entry(p.point.line_key()).or_default().push(p);
    }
    for line in lines.values_mut() {
        line.sort_by_key(|p| p.point.n);
    }

    if spec.id.is_ladder() {
        for line in lines.values() {
            let label = line[0].point.line_label();
            for (k, _) in line[0].metric_estimates(metric).map(|e| (e.observable.clone(), ())).collect::<Vec<_>>() {
                let series: Vec<(usize, f64)> =
                    line.iter().filter_map(|p| p.estimate(&k).map(|e| (p.point.n, e.value))).collect();
                let shown = series.iter().map(|(n, v)| format!("N={n}: {v:.4e}")).collect::<Vec<_>>().join(", ");
                if spec.monotone() {
                    let pass = series.len() >= 2 && series.windows(2).all(|w| w[1].1 < w[0].1);
                    checks.push(Check { name: format!("{k} decreasing in N ({label})"), pass, detail: shown.clone() });
                }
                if let (Some(max), Some(&(n, v))) = (spec.thresholds.max_error, series.last()) {
                    if spec.id != ExperimentId::QV {
                        checks.push(Check {
                            name: format!("{k} < {max} at N={n} ({label})"),
                            pass: v < max,
                            detail: format!("{v:.4e}"),
                        });
                    }
                }
                if spec.id == ExperimentId::QV {
                    let pt = &line[0].point;
                    let expected = spec.thresholds.slope.unwrap_or(pt.gamma - pt.theta);
                    let tolerance = spec.thresholds.slope_tolerance.unwrap_or(0.3);
                    let pairs: Vec<(f64, f64)> = series.iter().map(|&(n, v)| (n as f64, v)).collect();
                    let fit = fit_scaling(&pairs).ok();
                    let pass = fit.is_some_and(|f| (f.slope - expected).abs() <= tolerance);
                    checks.push(Check {
                        name: format!("{k} log-log slope = {expected} +/- {tolerance} ({label})"),
                        pass,
                        detail: match fit {
                            Some(f) => format!("slope {:.4}, residual {:.3e}; {shown}", f.slope, f.residual),
                            None => format!("fit failed; {shown}"),
                        },
                    });
                    fits.push(FitReport { line: label.clone(), observable: k.clone(), fit, expected_slope: expected, tolerance, pass });
                }
            }
        }
    } else if let Some(max) = spec.thresholds.max_error {
        for p in points.iter().filter(|p| p.skipped.is_none()) {
            for e in p.metric_estimates(metric) {
                checks.push(Check {
                    name: format!("{} < {max} ({})", e.observable, p.point.label()),
                    pass: e.value < max,
                    detail: format!("{:.4e} (replica mean {:.4e}, 95% CI [{:.4e}, {:.4e}])", e.value, e.replicas.mean, e.replicas.ci_low, e.replicas.ci_high),
                });
            }
        }
    }
    if checks.is_empty() {
        checks.push(Check { name: "no thresholds".into(), pass: true, detail: "spec sets no acceptance thresholds".into() });
    }
    (checks, fits)
}

/// Size the global worker pool (call once, before any experiment runs).
pub fn set_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| crate::Error::InvalidSpec(format!("thread pool: {e}")))
}
