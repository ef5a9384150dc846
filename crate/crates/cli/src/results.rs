//! Result rows, aggregation and CSV emission.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::config::MethodSpec;
use crate::error::CliError;

/// One measured value. Aggregate rows carry `trial = "mean"` and no seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub kernel: String,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_disp: usize,
    pub shift: f64,
    pub trial: String,
    pub seed: Option<u64>,
    pub metric_name: String,
    pub value: f64,
}

impl ResultRow {
    pub fn for_method(experiment: &str, method: &MethodSpec, n_disp: usize, shift: f64, trial: usize, seed: u64) -> RowBuilder {
        RowBuilder {
            row: ResultRow {
                experiment: experiment.to_string(),
                method: method.label(),
                kernel: method.kernel_label().to_string(),
                lambda: method.lambda(),
                alpha: method.alpha(),
                epsilon: method.epsilon(),
                n_disp,
                shift,
                trial: trial.to_string(),
                seed: Some(seed),
                metric_name: String::new(),
                value: f64::NAN,
            },
        }
    }

    /// A row for a reference that is not a configured method (e.g. an attribution baseline).
    pub fn for_baseline(experiment: &str, name: &str, n_disp: usize, shift: f64, trial: usize, seed: u64) -> RowBuilder {
        RowBuilder {
            row: ResultRow {
                experiment: experiment.to_string(),
                method: name.to_string(),
                kernel: "none".into(),
                lambda: None,
                alpha: None,
                epsilon: None,
                n_disp,
                shift,
                trial: trial.to_string(),
                seed: Some(seed),
                metric_name: String::new(),
                value: f64::NAN,
            },
        }
    }

    fn cell(&self) -> CellKey {
        CellKey {
            experiment: self.experiment.clone(),
            method: self.method.clone(),
            kernel: self.kernel.clone(),
            lambda: self.lambda.map(f64::to_bits),
            alpha: self.alpha.map(f64::to_bits),
            epsilon: self.epsilon.map(f64::to_bits),
            n_disp: self.n_disp,
            shift: self.shift.to_bits(),
            metric_name: self.metric_name.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RowBuilder {
    row: ResultRow,
}

impl RowBuilder {
    pub fn metric(&self, name: &str, value: f64) -> ResultRow {
        ResultRow { metric_name: name.to_string(), value, ..self.row.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    experiment: String,
    method: String,
    kernel: String,
    lambda: Option<u64>,
    alpha: Option<u64>,
    epsilon: Option<u64>,
    n_disp: usize,
    shift: u64,
    metric_name: String,
}

/// Mean and sample standard deviation of one table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub kernel: String,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub n_disp: usize,
    pub shift: f64,
    pub metric_name: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for a single trial.
    pub std: f64,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups per-trial rows into cells, in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<CellKey> = Vec::new();
    let mut cells: BTreeMap<CellKey, (ResultRow, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.seed.is_some()) {
        let key = r.cell();
        cells
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                (r.clone(), Vec::new())
            })
            .1
            .push(r.value);
    }
    order
        .into_iter()
        .map(|k| {
            let (r, values) = &cells[&k];
            let (mean, std) = mean_and_std(values);
            SummaryRow {
                experiment: r.experiment.clone(),
                method: r.method.clone(),
                kernel: r.kernel.clone(),
                lambda: r.lambda,
                alpha: r.alpha,
                epsilon: r.epsilon,
                n_disp: r.n_disp,
                shift: r.shift,
                metric_name: r.metric_name.clone(),
                n: values.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Per-trial rows followed by one aggregate (mean) row per cell.
pub fn with_aggregates(rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut out = rows.to_vec();
    for s in summarize(rows) {
        out.push(ResultRow {
            experiment: s.experiment,
            method: s.method,
            kernel: s.kernel,
            lambda: s.lambda,
            alpha: s.alpha,
            epsilon: s.epsilon,
            n_disp: s.n_disp,
            shift: s.shift,
            trial: "mean".into(),
            seed: None,
            metric_name: s.metric_name,
            value: s.mean,
        });
    }
    out
}

fn write_serialized<W: Write, T: Serialize>(w: W, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub const RESULTS_HEADER: &[&str] =
    &["experiment", "method", "kernel", "lambda", "alpha", "epsilon", "n_disp", "shift", "trial", "seed", "metric_name", "value"];

pub const SUMMARY_HEADER: &[&str] = &[
    "experiment", "method", "kernel", "lambda", "alpha", "epsilon", "n_disp", "shift", "metric_name", "n", "mean", "std",
];

pub fn write_results<W: Write>(w: W, rows: &[ResultRow]) -> Result<(), CliError> {
    write_serialized(w, RESULTS_HEADER, rows)
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), CliError> {
    write_serialized(w, SUMMARY_HEADER, rows)
}

/// Wide table for one metric: one row per (shift, n_disp), one `mean±std` column per method.
pub fn write_table<W: Write>(w: W, summary: &[SummaryRow], metric: &str) -> Result<(), CliError> {
    let cells: Vec<&SummaryRow> = summary.iter().filter(|s| s.metric_name == metric).collect();
    let mut methods: Vec<String> = Vec::new();
    let mut keys: Vec<(u64, usize)> = Vec::new();
    for s in &cells {
        if !methods.contains(&s.method) {
            methods.push(s.method.clone());
        }
        let k = (s.shift.to_bits(), s.n_disp);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["shift".to_string(), "n_disp".to_string()];
    header.extend(methods.iter().cloned());
    wtr.write_record(&header)?;
    for (shift, n_disp) in keys {
        let mut rec = vec![f64::from_bits(shift).to_string(), n_disp.to_string()];
        for m in &methods {
            let cell = cells.iter().find(|s| &s.method == m && s.shift.to_bits() == shift && s.n_disp == n_disp);
            rec.push(cell.map_or(String::new(), |s| format!("{:.3}±{:.3}", s.mean, s.std)));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ResultRow> {
        let m = MethodSpec::ClassicalExact {};
        (0..3)
            .map(|t| ResultRow::for_method("e", &m, 0, 10.0, t, t as u64).metric("err", [1.0, 2.0, 4.0][t]))
            .collect()
    }

    #[test]
    fn sample_statistics() {
        let s = summarize(&rows());
        assert_eq!(s.len(), 1);
        assert!((s[0].mean - 7.0 / 3.0).abs() < 1e-15);
        let var = ((1.0f64 - 7.0 / 3.0).powi(2) + (2.0f64 - 7.0 / 3.0).powi(2) + (4.0f64 - 7.0 / 3.0).powi(2)) / 2.0;
        assert!((s[0].std - var.sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn aggregates_appended() {
        let all = with_aggregates(&rows());
        assert_eq!(all.len(), 4);
        assert_eq!(all[3].trial, "mean");
        assert_eq!(all[3].seed, None);
    }

    #[test]
    fn empty_results_have_header_only() {
        let mut buf = Vec::new();
        write_results(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", RESULTS_HEADER.join(",")));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_results(&mut buf, &rows()[..1]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "e,classical_exact,none,,,,0,10.0,0,0,err,1.0");
    }
}
