//! The experiment protocols. Each trial is a pure function of its seed, so trials
//! run in parallel and are collected back in order.

pub mod geo;
pub mod harness;
pub mod metric_demo;
pub mod moons;

use rayon::prelude::*;
use reshape_ot::datasets::trial_seed;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::output::RunOutput;
use crate::results::ResultRow;

/// Runs `job(shift, trial, seed)` for every shift and trial in parallel; results
/// come back ordered by shift, then trial.
pub(crate) fn sweep<T, F>(config: &ExperimentConfig, shifts: &[f64], job: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(f64, usize, u64) -> Result<T, CliError> + Sync,
{
    let cells: Vec<(f64, usize)> =
        shifts.iter().flat_map(|&s| (0..config.trials).map(move |t| (s, t))).collect();
    cells
        .par_iter()
        .map(|&(s, t)| job(s, t, trial_seed(config.base_seed, t)))
        .collect()
}

pub(crate) fn trial_seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.trials).map(|t| trial_seed(config.base_seed, t)).collect()
}

type Samples = (f64, Vec<f64>);

/// Per-metric mean over trials, as `(shift, mean)` per method label.
pub(crate) fn curve(rows: &[ResultRow], metric: &str, x_of: impl Fn(&ResultRow) -> f64) -> Vec<crate::svg::Series> {
    let mut series: Vec<crate::svg::Series> = Vec::new();
    let mut acc: Vec<(String, Vec<Samples>)> = Vec::new();
    for r in rows.iter().filter(|r| r.metric_name == metric) {
        let idx = match acc.iter().position(|(m, _)| m == &r.method) {
            Some(i) => i,
            None => {
                acc.push((r.method.clone(), Vec::new()));
                acc.len() - 1
            }
        };
        let x = x_of(r);
        let points = &mut acc[idx].1;
        match points.iter_mut().find(|(px, _)| px.to_bits() == x.to_bits()) {
            Some((_, v)) => v.push(r.value),
            None => points.push((x, vec![r.value])),
        }
    }
    for (name, points) in acc {
        let mut pts: Vec<(f64, f64)> =
            points.into_iter().map(|(x, v)| (x, v.iter().sum::<f64>() / v.len() as f64)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push(crate::svg::Series { name, points: pts });
    }
    series
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    match config.experiment {
        ExperimentKind::MoonsTransport | ExperimentKind::MoonsDa => moons::run(config),
        ExperimentKind::ShiftHarness => harness::run(config),
        ExperimentKind::GeoFlows => geo::run(config),
        ExperimentKind::MetricDemo => metric_demo::run(config),
    }
}
