//! JSON experiment configuration with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MoonsTransport,
    MoonsDa,
    ShiftHarness,
    GeoFlows,
    MetricDemo,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::MoonsTransport => "moons_transport",
            ExperimentKind::MoonsDa => "moons_da",
            ExperimentKind::ShiftHarness => "shift_harness",
            ExperimentKind::GeoFlows => "geo_flows",
            ExperimentKind::MetricDemo => "metric_demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Rbf,
}

/// One transport method: a ground metric plus a solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    ClassicalExact {},
    Sinkhorn {
        epsilon: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_marginal_tol")]
        marginal_tol: f64,
    },
    Reshape {
        kernel: KernelChoice,
        #[serde(default)]
        lambda: Option<f64>,
        alpha: f64,
    },
    ReshapeRng {
        kernel: KernelChoice,
        #[serde(default)]
        lambda: Option<f64>,
        alpha: f64,
    },
}

fn default_max_iters() -> usize {
    reshape_ot::solvers::DEFAULT_MAX_ITERS
}

fn default_marginal_tol() -> f64 {
    reshape_ot::solvers::DEFAULT_MARGINAL_TOL
}

impl MethodSpec {
    /// Label used in result tables, e.g. `reshape_rbf` or `classical_exact`.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::ClassicalExact {} => "classical_exact".into(),
            MethodSpec::Sinkhorn { .. } => "sinkhorn".into(),
            MethodSpec::Reshape { kernel, .. } => format!("reshape_{}", kernel_name(*kernel)),
            MethodSpec::ReshapeRng { kernel, .. } => format!("reshape_rng_{}", kernel_name(*kernel)),
        }
    }

    pub fn kernel_label(&self) -> &'static str {
        match self {
            MethodSpec::Reshape { kernel, .. } | MethodSpec::ReshapeRng { kernel, .. } => kernel_name(*kernel),
            _ => "none",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            MethodSpec::Reshape { kernel: KernelChoice::Rbf, lambda, .. }
            | MethodSpec::ReshapeRng { kernel: KernelChoice::Rbf, lambda, .. } => *lambda,
            _ => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            MethodSpec::Reshape { alpha, .. } | MethodSpec::ReshapeRng { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            MethodSpec::Sinkhorn { epsilon, .. } => Some(*epsilon),
            _ => None,
        }
    }

    pub fn is_guided(&self) -> bool {
        matches!(self, MethodSpec::Reshape { .. } | MethodSpec::ReshapeRng { .. })
    }

    pub fn permutes_guidance(&self) -> bool {
        matches!(self, MethodSpec::ReshapeRng { .. })
    }

    fn validate(&self) -> Result<(), CliError> {
        match self {
            MethodSpec::ClassicalExact {} => Ok(()),
            MethodSpec::Sinkhorn { epsilon, max_iters, marginal_tol } => {
                reshape_ot::SinkhornParams { epsilon: *epsilon, max_iters: *max_iters, marginal_tol: *marginal_tol }
                    .validate()
                    .map_err(|e| CliError::Config(format!("method sinkhorn: {e}")))
            }
            MethodSpec::Reshape { kernel, lambda, alpha } | MethodSpec::ReshapeRng { kernel, lambda, alpha } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(CliError::Config(format!("method {}: alpha must be >= 0", self.label())));
                }
                if *kernel == KernelChoice::Rbf {
                    match lambda {
                        Some(l) if l.is_finite() && *l > 0.0 => {}
                        _ => return Err(CliError::Config(format!("method {}: rbf needs lambda > 0", self.label()))),
                    }
                }
                Ok(())
            }
        }
    }
}

fn kernel_name(k: KernelChoice) -> &'static str {
    match k {
        KernelChoice::Linear => "linear",
        KernelChoice::Rbf => "rbf",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoonsSettings {
    pub n_per_moon: usize,
    pub noise: f64,
    pub n_test: usize,
}

impl Default for MoonsSettings {
    fn default() -> Self {
        Self { n_per_moon: 150, noise: 0.05, n_test: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSettings {
    pub n: usize,
    pub dim: usize,
    pub kind: String,
    pub noise: f64,
    pub spread: f64,
    /// Guidance sizes swept; 0 means no guidance.
    pub n_disp_sweep: Vec<usize>,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self {
            n: 150,
            dim: 10,
            kind: "translation".into(),
            noise: 0.5,
            spread: 1.0,
            n_disp_sweep: vec![0, 1, 3, 5, 10, 20],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeoSettings {
    pub data: Option<PathBuf>,
    pub guidance_ids: Option<PathBuf>,
    /// Inclusive ISO week range, e.g. `["2019-W36", "2019-W44"]`.
    pub window: Option<[String; 2]>,
    /// `[lat, lon]` of the cost-field reference point; defaults to the first guidance source.
    pub reference: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_n_disp")]
    pub n_displacements: usize,
    #[serde(default)]
    pub rotations: Vec<f64>,
    #[serde(default)]
    pub shifts: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub moons: MoonsSettings,
    #[serde(default)]
    pub harness: HarnessSettings,
    #[serde(default)]
    pub geo: GeoSettings,
    /// Emit SVG figures.
    #[serde(default = "default_true")]
    pub svg: bool,
    /// Cost-field heat-map resolution per axis.
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
    /// Run the split-and-average attribution protocol (moons_da only).
    #[serde(default)]
    pub attribution: bool,
}

fn default_n_disp() -> usize {
    40
}
fn default_trials() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_grid() -> usize {
    60
}

/// Every configuration key with a short description, for `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("experiment", "moons_transport | moons_da | shift_harness | geo_flows | metric_demo"),
    ("methods", "list of {kind: classical_exact | sinkhorn | reshape | reshape_rng, ...}"),
    ("methods.N.epsilon", "entropic regularization (sinkhorn)"),
    ("methods.N.max_iters", "Sinkhorn iteration cap (default 10000)"),
    ("methods.N.marginal_tol", "Sinkhorn marginal tolerance (default 1e-9)"),
    ("methods.N.kernel", "linear | rbf (reshape, reshape_rng)"),
    ("methods.N.lambda", "RBF bandwidth in exp(-lambda*|x-y|^2)"),
    ("methods.N.alpha", "trace-normalized guidance strength"),
    ("n_displacements", "guidance pairs drawn per trial (default 40)"),
    ("rotations", "moons rotation angles in degrees (default [10,30,50,70,90])"),
    ("shifts", "shift-harness magnitudes (default [2])"),
    ("trials", "repetitions per cell, seed = base_seed + trial (default 20)"),
    ("base_seed", "base RNG seed (default 0)"),
    ("output_dir", "directory for results.csv, summary.csv, manifest.json, *.svg"),
    ("moons.n_per_moon", "points per moon (default 150)"),
    ("moons.noise", "Gaussian noise sigma (default 0.05)"),
    ("moons.n_test", "held-out test points (default 1000)"),
    ("harness.n", "samples (default 150)"),
    ("harness.dim", "features (default 10)"),
    ("harness.kind", "translation | rotation | affine"),
    ("harness.noise", "target noise sigma (default 0.5)"),
    ("harness.spread", "per-sample shift speed variation (default 1)"),
    ("harness.n_disp_sweep", "guidance sizes (default [0,1,3,5,10,20])"),
    ("geo.data", "geo CSV with id,timestamp,lat,lon"),
    ("geo.guidance_ids", "file of newline-separated guidance individual ids"),
    ("geo.window", "[first, last] ISO weeks as YYYY-Www"),
    ("geo.reference", "[lat, lon] of the cost-field reference point"),
    ("svg", "write SVG figures (default true)"),
    ("grid_resolution", "cost-field grid cells per axis (default 60)"),
    ("attribution", "run the split-and-average attribution protocol (moons_da)"),
];

pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (JSON; override with --override key=value):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<24} {d}\n"));
    }
    s
}

/// Applies `a.b.c=value` to a JSON document. The value is parsed as JSON when
/// possible and taken as a string otherwise. Numeric path segments index arrays.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize =
                    part.parse().map_err(|_| CliError::Config(format!("'{part}' in '{key}' is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("index {idx} out of range ({len}) in '{key}'")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Config(format!("cannot descend into '{part}' of '{key}'"))),
        };
    }
    Err(CliError::Config(format!("empty override key in '{assignment}'")))
}

impl ExperimentConfig {
    pub fn from_value(doc: Value) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_value(doc)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, overrides)
    }

    fn fill_defaults(&mut self) {
        if self.rotations.is_empty() && matches!(self.experiment, ExperimentKind::MoonsTransport | ExperimentKind::MoonsDa)
        {
            self.rotations = vec![10.0, 30.0, 50.0, 70.0, 90.0];
        }
        if self.shifts.is_empty() && self.experiment == ExperimentKind::ShiftHarness {
            self.shifts = vec![2.0];
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        for m in &self.methods {
            m.validate()?;
        }
        if self.grid_resolution < 2 || self.grid_resolution > 1000 {
            return bad("grid_resolution must lie in [2, 1000]".into());
        }
        match self.experiment {
            ExperimentKind::MoonsTransport | ExperimentKind::MoonsDa => {
                if let Some(r) = self.rotations.iter().find(|r| !(0.0..=180.0).contains(*r)) {
                    return bad(format!("rotation {r} outside [0, 180]"));
                }
                if self.moons.n_per_moon == 0 || self.moons.n_test < 2 {
                    return bad("moons need n_per_moon >= 1 and n_test >= 2".into());
                }
                if !(self.moons.noise.is_finite() && self.moons.noise >= 0.0) {
                    return bad("moons.noise must be >= 0".into());
                }
                if self.n_displacements >= 2 * self.moons.n_per_moon {
                    return bad(format!("n_displacements must be < {}", 2 * self.moons.n_per_moon));
                }
                if self.n_displacements == 0 && self.methods.iter().any(MethodSpec::is_guided) {
                    return bad("guided methods need n_displacements >= 1".into());
                }
            }
            ExperimentKind::ShiftHarness => {
                let h = &self.harness;
                h.kind.parse::<reshape_ot::datasets::ShiftKind>().map_err(|e| CliError::Config(e.to_string()))?;
                if h.n < 2 || h.dim == 0 {
                    return bad("harness needs n >= 2 and dim >= 1".into());
                }
                if h.n_disp_sweep.is_empty() {
                    return bad("harness.n_disp_sweep must not be empty".into());
                }
                if h.n_disp_sweep.iter().any(|&k| k >= h.n) {
                    return bad("every harness.n_disp_sweep entry must be < harness.n".into());
                }
                if !(h.noise >= 0.0 && h.spread >= 0.0) {
                    return bad("harness.noise and harness.spread must be >= 0".into());
                }
                if self.shifts.iter().any(|s| !s.is_finite()) {
                    return bad("shifts must be finite".into());
                }
            }
            ExperimentKind::GeoFlows => {
                if self.geo.data.is_none() {
                    return bad("geo_flows needs geo.data".into());
                }
                if self.methods.iter().any(MethodSpec::is_guided) && self.geo.guidance_ids.is_none() {
                    return bad("guided methods need geo.guidance_ids".into());
                }
                if let Some([lat, lon]) = self.geo.reference {
                    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                        return bad("geo.reference outside valid lat/lon range".into());
                    }
                }
            }
            ExperimentKind::MetricDemo => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"experiment":"moons_transport","methods":[{"kind":"classical_exact"}],"output_dir":"out"}"#;

    #[test]
    fn defaults_filled() {
        let c = ExperimentConfig::from_json(MINIMAL, &[]).unwrap();
        assert_eq!(c.rotations, vec![10.0, 30.0, 50.0, 70.0, 90.0]);
        assert_eq!(c.trials, 20);
        assert_eq!(c.n_displacements, 40);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"output_dir\"", "\"bogus\":1,\"output_dir\"");
        assert!(matches!(ExperimentConfig::from_json(&text, &[]), Err(CliError::Config(_))));
        let text = MINIMAL.replace("{\"kind\":\"classical_exact\"}", "{\"kind\":\"classical_exact\",\"x\":1}");
        assert!(ExperimentConfig::from_json(&text, &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = ExperimentConfig::from_json(
            MINIMAL,
            &["trials=3".into(), "rotations=[45]".into(), "moons.noise=0.1".into(), "methods.0.kind=classical_exact".into()],
        )
        .unwrap();
        assert_eq!(c.trials, 3);
        assert_eq!(c.rotations, vec![45.0]);
        assert_eq!(c.moons.noise, 0.1);
        assert!(ExperimentConfig::from_json(MINIMAL, &["trials".into()]).is_err());
        assert!(ExperimentConfig::from_json(MINIMAL, &["methods.3.alpha=1".into()]).is_err());
    }

    #[test]
    fn ranges_checked() {
        assert!(ExperimentConfig::from_json(MINIMAL, &["trials=0".into()]).is_err());
        assert!(ExperimentConfig::from_json(MINIMAL, &["rotations=[200]".into()]).is_err());
        let rbf = r#"{"experiment":"moons_transport","methods":[{"kind":"reshape","kernel":"rbf","alpha":1}],"output_dir":"o"}"#;
        assert!(ExperimentConfig::from_json(rbf, &[]).is_err());
    }

    #[test]
    fn help_lists_every_top_level_key() {
        let c = ExperimentConfig::from_json(MINIMAL, &[]).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        let help = keys_help();
        for k in v.as_object().unwrap().keys() {
            assert!(help.contains(k.as_str()), "missing {k}");
        }
    }
}
