//! Corridor demonstration: guidance moving north makes north-south moves cheap
//! and leaves east-west moves nearly unchanged.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use reshape_ot::datasets::{rng_stream, DATA_STREAM};
use reshape_ot::geometry::{cost_matrix, DisplacementSet, PointCloud};

use super::{sweep, trial_seeds};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::methods::build_metric;
use crate::output::RunOutput;
use crate::results::ResultRow;
use crate::svg::{self, Bounds};

const CORRIDOR_STEP: f64 = 1.0;
const CORRIDOR_NOISE: f64 = 0.02;

fn corridor(n: usize, seed: u64) -> Result<DisplacementSet, CliError> {
    let mut rng = rng_stream(seed, DATA_STREAM);
    let mut xs = DMatrix::zeros(n, 2);
    let mut ys = DMatrix::zeros(n, 2);
    for k in 0..n {
        let x: f64 = rng.random_range(-0.5..0.5);
        let y: f64 = rng.random_range(-1.0..0.0);
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        xs[(k, 0)] = x;
        xs[(k, 1)] = y;
        ys[(k, 0)] = x + CORRIDOR_NOISE * ex;
        ys[(k, 1)] = y + CORRIDOR_STEP + CORRIDOR_NOISE * ey;
    }
    Ok(DisplacementSet::paired(xs, ys)?)
}

type TrialOutput = (Vec<ResultRow>, Vec<(String, String)>);

fn trial(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialOutput, CliError> {
    let n = config.n_displacements.max(1);
    let guidance = corridor(n, seed)?;
    let probes = PointCloud::from_rows(&[vec![0.0, 0.0]])?;
    let ends = PointCloud::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]])?;
    let exp = config.experiment.name();
    let mut rows = Vec::new();
    let mut figures = Vec::new();
    for method in &config.methods {
        let guided = build_metric(method, Some(&guidance), 2)?;
        let plain = build_metric(method, None, 2)?;
        let g = cost_matrix(&guided, &probes, &ends)?;
        let p = cost_matrix(&plain, &probes, &ends)?;
        let row = ResultRow::for_method(exp, method, n, 0.0, trial, seed);
        rows.push(row.metric("ns_cost", g[(0, 0)]));
        rows.push(row.metric("ew_cost", g[(0, 1)]));
        rows.push(row.metric("ns_cost_ratio", g[(0, 0)] / p[(0, 0)]));
        rows.push(row.metric("ew_cost_ratio", g[(0, 1)] / p[(0, 1)]));
        if config.svg && trial == 0 {
            let res = config.grid_resolution;
            let bounds = Bounds { x: (-1.0, 1.0), y: (-1.0, 1.0) };
            let cells: Vec<Vec<f64>> = (0..res * res)
                .map(|i| {
                    let (r, c) = (i / res, i % res);
                    vec![-1.0 + (c as f64 + 0.5) * 2.0 / res as f64, -1.0 + (r as f64 + 0.5) * 2.0 / res as f64]
                })
                .collect();
            let field = cost_matrix(&guided, &probes, &PointCloud::from_rows(&cells)?)?;
            let grid = DMatrix::from_fn(res, res, |r, c| field[(0, r * res + c)].sqrt());
            figures.push((
                format!("cost_field_{}.svg", method.label()),
                svg::heat_grid(
                    &format!("{}: square-root cost from the origin", method.label()),
                    "guidance moves north; cheap directions are pale",
                    bounds,
                    &grid,
                    Some((0.0, 0.0)),
                ),
            ));
        }
    }
    Ok((rows, figures))
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let trials = sweep(config, &[0.0], |_, t, seed| trial(config, t, seed))?;
    let mut out = RunOutput { seeds: trial_seeds(config), ..Default::default() };
    for (rows, figs) in trials {
        out.rows.extend(rows);
        out.figures.extend(figs);
    }
    out.notes.insert("corridor".into(), serde_json::json!({"step_north": CORRIDOR_STEP, "noise": CORRIDOR_NOISE}));
    Ok(out)
}
