//! Writing results, summaries, tables, figures and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::results::{summarize, with_aggregates, write_results, write_summary, write_table, ResultRow};

/// Version string of this build, `git describe`-style when available.
pub fn version_string() -> &'static str {
    match option_env!("RESHAPE_OT_GIT_DESCRIBE") {
        Some(v) if !v.is_empty() => v,
        _ => concat!("v", env!("CARGO_PKG_VERSION")),
    }
}

/// Everything an experiment produces before it is written to disk.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    /// `(file name, SVG document)`.
    pub figures: Vec<(String, String)>,
    /// Extra CSV files, `(file name, contents)`.
    pub extra_files: Vec<(String, String)>,
    /// Experiment-specific facts recorded in the manifest (dataset sizes, thresholds, ...).
    pub notes: BTreeMap<String, Value>,
    pub seeds: Vec<u64>,
}

/// Every numerical tolerance and fixed protocol choice used by a run.
pub fn tunables() -> BTreeMap<&'static str, Value> {
    use reshape_ot::{datasets, geometry, kernel, linalg, solvers};
    BTreeMap::from([
        ("trace_floor", json!(geometry::TRACE_FLOOR)),
        ("negative_distance_clamp_rel", json!(geometry::NEGATIVE_CLAMP_REL)),
        ("kernel_negative_distance_tol", json!(kernel::KERNEL_NEGATIVE_TOL)),
        ("cholesky_jitter_start_rel", json!(linalg::JITTER_START)),
        ("cholesky_jitter_max_rel", json!(linalg::JITTER_MAX)),
        ("marginal_sum_tol", json!(solvers::MARGINAL_SUM_TOL)),
        ("sinkhorn_default_max_iters", json!(solvers::DEFAULT_MAX_ITERS)),
        ("sinkhorn_default_marginal_tol", json!(solvers::DEFAULT_MARGINAL_TOL)),
        ("sinkhorn_domain", json!("log")),
        ("exact_solver", json!("shortest augmenting path for uniform square, network simplex otherwise")),
        ("attribution_negative_clamp", json!(1e-12)),
        ("geo_outlier_percentile", json!(datasets::geo_constants::OUTLIER_PERCENTILE)),
        ("geo_outlier_scope", json!("global over all candidate displacements")),
        ("geo_jitter_sigma", json!(datasets::geo_constants::JITTER_SIGMA)),
        ("geo_week", json!("ISO-8601")),
        ("geo_median", json!("lower-middle order statistic, per coordinate")),
        ("svg_arrow_threshold", json!("plan entry > (1/(n*m)) * 1e-2")),
        ("svg_projection", json!("equirectangular lat/lon (display only)")),
        ("rng", json!("ChaCha20; seed = base_seed + trial; stream 0 data, 1 selection, 2 jitter")),
        ("gaussian_sampler", json!("rand_distr StandardNormal (ziggurat)")),
        ("classifier", json!("1-nearest-neighbor, Euclidean, ties to lowest index")),
        ("attribution_split", json!("50/50 interleaved by sample index (even / odd)")),
        ("std_definition", json!("sample standard deviation, n-1 denominator")),
    ])
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    seeds: &'a [u64],
    tunables: BTreeMap<&'static str, Value>,
    notes: &'a BTreeMap<String, Value>,
    files: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes `results.csv`, `summary.csv`, one wide table per metric, figures and
/// `manifest.json` into the configured output directory.
pub fn emit_outputs(config: &ExperimentConfig, run: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();

    let results_path = dir.join("results.csv");
    write_results(create(&results_path)?, &with_aggregates(&run.rows))?;
    written.push(results_path);

    let summary = summarize(&run.rows);
    let summary_path = dir.join("summary.csv");
    write_summary(create(&summary_path)?, &summary)?;
    written.push(summary_path);

    let mut metrics: Vec<&str> = Vec::new();
    for s in &summary {
        if !metrics.contains(&s.metric_name.as_str()) {
            metrics.push(&s.metric_name);
        }
    }
    for m in metrics {
        let path = dir.join(format!("table_{m}.csv"));
        write_table(create(&path)?, &summary, m)?;
        written.push(path);
    }
    for (name, text) in run.extra_files.iter().chain(run.figures.iter()) {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }

    let manifest = Manifest {
        tool: "reshape-ot",
        version: version_string(),
        config,
        seeds: &run.seeds,
        tunables: tunables(),
        notes: &run.notes,
        files: written.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
    };
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", manifest_path.display())))?;
    written.push(manifest_path);
    Ok(written)
}
