//! Input-space displacement statistics and the reshaped Mahalanobis ground metric.
//!
//! Observed displacements `x̃ₖ → ỹₗ`, linked by a coupling `γ̃`, are summarized by the
//! second-moment matrix `Σ = Σₖₗ γ̃ₖₗ (x̃ₖ − ỹₗ)(x̃ₖ − ỹₗ)ᵀ`. The reshaped metric
//! `d(x, y) = √((x − y)ᵀ (I + ηΣ)⁻¹ (x − y))` is never longer than the Euclidean
//! distance and shrinks along the `i`-th eigenvector of `Σ` by `√(1 / (1 + ηλᵢ))`.
//!
//! The coupling of a [`DisplacementSet`] is always normalized to unit mass, so the
//! trace normalization `η = α / Tr(Σ)` keeps `α` comparable across sample sizes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::kernel::KernelizedMetric;
use crate::linalg::{cholesky_with_jitter, symmetrize};

/// Traces below this are treated as "no displacement": `η` falls back to zero.
pub const TRACE_FLOOR: f64 = 1e-15;
/// Relative magnitude below which negative squared distances are clamped to zero.
pub const NEGATIVE_CLAMP_REL: f64 = 1e-8;

/// A weighted finite sample of `d`-dimensional points, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: DMatrix<f64>,
    weights: DVector<f64>,
}

impl PointCloud {
    /// Builds a cloud and normalizes the weights to unit mass.
    pub fn new(points: DMatrix<f64>, weights: DVector<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InvalidInput("point cloud needs at least one point".into()));
        }
        if weights.len() != points.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} points",
                weights.len(),
                points.nrows()
            )));
        }
        ensure_finite(points.iter(), "point coordinates")?;
        ensure_finite(weights.iter(), "point weights")?;
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput("negative point weight".into()));
        }
        let total = weights.sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("point weights sum to zero".into()));
        }
        Ok(Self { points, weights: weights / total })
    }

    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(points, DVector::from_element(n, 1.0))
    }

    /// Uniform cloud from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::uniform(matrix_from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// Weighted mean of the points.
    pub fn mean(&self) -> DVector<f64> {
        self.points.transpose() * &self.weights
    }

    /// Applies `x ↦ Wx` to every point, keeping the weights.
    pub fn transform(&self, w: &DMatrix<f64>) -> Result<Self> {
        if w.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "transform has {} columns, cloud has dimension {}",
                w.ncols(),
                self.dim()
            )));
        }
        Ok(Self { points: &self.points * w.transpose(), weights: self.weights.clone() })
    }
}

/// Stacks equally long row vectors into a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "row {bad} has {} entries, expected {d}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

/// Observed source and target samples linked through a unit-mass coupling `γ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSet {
    sources: DMatrix<f64>,
    targets: DMatrix<f64>,
    coupling: DMatrix<f64>,
}

impl DisplacementSet {
    /// General `M × N` coupled samples. The coupling is rescaled to unit mass.
    pub fn new(sources: DMatrix<f64>, targets: DMatrix<f64>, coupling: DMatrix<f64>) -> Result<Self> {
        if sources.nrows() == 0 || targets.nrows() == 0 {
            return Err(Error::InvalidInput("displacement set needs samples on both sides".into()));
        }
        if sources.ncols() != targets.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "sources have dimension {}, targets {}",
                sources.ncols(),
                targets.ncols()
            )));
        }
        if coupling.shape() != (sources.nrows(), targets.nrows()) {
            return Err(Error::DimensionMismatch(format!(
                "coupling is {:?}, expected {}x{}",
                coupling.shape(),
                sources.nrows(),
                targets.nrows()
            )));
        }
        ensure_finite(sources.iter(), "displacement sources")?;
        ensure_finite(targets.iter(), "displacement targets")?;
        ensure_finite(coupling.iter(), "displacement coupling")?;
        if coupling.iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidInput("negative coupling entry".into()));
        }
        let mass = coupling.sum();
        if mass <= 0.0 {
            return Err(Error::InvalidInput("displacement coupling has zero mass".into()));
        }
        Ok(Self { sources, targets, coupling: coupling / mass })
    }

    /// Paired observations `(x̃ₗ, ỹₗ)` with uniform mass `1/N` on each pair.
    pub fn paired(sources: DMatrix<f64>, targets: DMatrix<f64>) -> Result<Self> {
        if sources.nrows() != targets.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} sources paired with {} targets",
                sources.nrows(),
                targets.nrows()
            )));
        }
        let n = sources.nrows();
        Self::new(sources, targets, DMatrix::identity(n, n))
    }

    pub fn sources(&self) -> &DMatrix<f64> {
        &self.sources
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn dim(&self) -> usize {
        self.sources.ncols()
    }

    /// Number of source samples `M`.
    pub fn n_sources(&self) -> usize {
        self.sources.nrows()
    }

    /// Number of target samples `N`.
    pub fn n_targets(&self) -> usize {
        self.targets.nrows()
    }

    /// `M = N` and `γ̃ = I / N` exactly.
    pub fn is_paired_uniform(&self) -> bool {
        let n = self.n_sources();
        n == self.n_targets()
            && (0..n).all(|i| {
                (0..n).all(|j| {
                    let expected = if i == j { 1.0 / n as f64 } else { 0.0 };
                    (self.coupling[(i, j)] - expected).abs() <= 1e-15
                })
            })
    }

    /// Row sums of `γ̃`.
    pub fn source_marginal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_sources(), self.coupling.row_iter().map(|r| r.sum()))
    }

    /// Column sums of `γ̃`.
    pub fn target_marginal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_targets(), self.coupling.column_iter().map(|c| c.sum()))
    }
}

/// The coupling-weighted second moment `Σ` of the observed displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    pub sigma: DMatrix<f64>,
    pub trace: f64,
}

impl SecondMoment {
    /// Eigenvalues (ascending) and matching unit eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.sigma.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.sigma.nrows(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (values, vectors)
    }
}

/// Computes `Σ = Σₖₗ γ̃ₖₗ (x̃ₖ − ỹₗ)(x̃ₖ − ỹₗ)ᵀ`.
///
/// Expanded as `XᵀDₐX + YᵀD_bY − XᵀγY − YᵀγᵀX` and symmetrized afterwards.
pub fn compute_second_moment(d: &DisplacementSet) -> Result<SecondMoment> {
    let x = d.sources();
    let y = d.targets();
    let g = d.coupling();
    let a = d.source_marginal();
    let b = d.target_marginal();
    let xa = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * a[i]);
    let yb = DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * b[i]);
    let cross = x.transpose() * g * y;
    let sigma = x.transpose() * xa + y.transpose() * yb - &cross - cross.transpose();
    let sigma = symmetrize(&sigma);
    ensure_finite(sigma.iter(), "second moment")?;
    let trace = sigma.trace().max(0.0);
    Ok(SecondMoment { sigma, trace })
}

/// `η = α / Tr(Σ)`, or zero when the trace vanishes.
pub fn eta_from_alpha(sigma: &SecondMoment, alpha: f64) -> Result<f64> {
    eta_from_trace(sigma.trace, alpha)
}

/// Trace normalization shared by the input-space and kernelized metrics.
pub fn eta_from_trace(trace: f64, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if !trace.is_finite() {
        return Err(Error::NonFinite("second-moment trace".into()));
    }
    if trace < TRACE_FLOOR {
        return Ok(0.0);
    }
    Ok(alpha / trace)
}

/// The reshaped metric with precision `(I + ηΣ)⁻¹` and a whitening factor `W`,
/// `WᵀW = (I + ηΣ)⁻¹`.
#[derive(Debug, Clone)]
pub struct ReshapedMetric {
    precision: DMatrix<f64>,
    whitening: DMatrix<f64>,
    sigma: DMatrix<f64>,
    eta: f64,
    alpha: f64,
}

impl ReshapedMetric {
    /// The plain Euclidean metric in dimension `d` (`η = 0`).
    pub fn euclidean(d: usize) -> Self {
        Self {
            precision: DMatrix::identity(d, d),
            whitening: DMatrix::identity(d, d),
            sigma: DMatrix::zeros(d, d),
            eta: 0.0,
            alpha: 0.0,
        }
    }

    /// Builds the metric with the trace-normalized strength `η = α / Tr(Σ)`.
    pub fn from_alpha(sigma: &SecondMoment, alpha: f64) -> Result<Self> {
        let eta = eta_from_alpha(sigma, alpha)?;
        let mut m = build_reshaped_metric(sigma, eta)?;
        m.alpha = alpha;
        Ok(m)
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.whitening
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Dimensionless strength; `η·Tr(Σ)` when the metric was built from `η`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }

    /// Eigenvalues `λᵢ` of `Σ` (ascending), eigenvectors, and the distance shrink
    /// factors `√(1 / (1 + ηλᵢ))` along each eigenvector.
    pub fn shrink_factors(&self) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
        let sm = SecondMoment { sigma: self.sigma.clone(), trace: self.sigma.trace() };
        let (values, vectors) = sm.eigen();
        let factors = values.iter().map(|l| (1.0 / (1.0 + self.eta * l.max(0.0))).sqrt()).collect();
        (values, vectors, factors)
    }

    fn squared(&self, diff: &[f64]) -> Result<f64> {
        let mut q = 0.0;
        let mut scale = 0.0;
        for (i, di) in diff.iter().enumerate() {
            let row: f64 = diff.iter().enumerate().map(|(j, dj)| self.precision[(i, j)] * dj).sum();
            q += di * row;
            scale += di * di;
        }
        clamp_squared(q, scale)
    }
}

pub(crate) fn clamp_squared(q: f64, scale: f64) -> Result<f64> {
    if q >= 0.0 {
        Ok(q)
    } else if -q <= NEGATIVE_CLAMP_REL * scale || -q < 1e-12 {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("negative squared distance {q:e} at scale {scale:e}")))
    }
}

/// Builds `(I + ηΣ)⁻¹` by Cholesky factorization (with jitter escalation) and its
/// whitening factor `W = Lᵀ` where `LLᵀ` is the Cholesky factorization of the precision.
pub fn build_reshaped_metric(sigma: &SecondMoment, eta: f64) -> Result<ReshapedMetric> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidInput(format!("eta must be finite and >= 0, got {eta}")));
    }
    let d = sigma.sigma.nrows();
    if eta == 0.0 {
        let mut m = ReshapedMetric::euclidean(d);
        m.sigma = sigma.sigma.clone();
        return Ok(m);
    }
    let shaped = DMatrix::<f64>::identity(d, d) + &sigma.sigma * eta;
    let (ch, _) = cholesky_with_jitter(&shaped)?;
    let precision = symmetrize(&ch.inverse());
    let (pch, _) = cholesky_with_jitter(&precision)?;
    let whitening = pch.l().transpose();
    Ok(ReshapedMetric {
        precision,
        whitening,
        sigma: sigma.sigma.clone(),
        eta,
        alpha: eta * sigma.trace,
    })
}

fn check_dims(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what}: {a} vs {b}")))
    }
}

/// `√((x − y)ᵀ (I + ηΣ)⁻¹ (x − y))`.
pub fn mahalanobis_distance(m: &ReshapedMetric, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x.len(), y.len(), "query points")?;
    check_dims(x.len(), m.dim(), "query vs metric dimension")?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(m.squared(&diff)?.sqrt())
}

/// A ground metric whose square defines the transport cost.
#[derive(Debug, Clone)]
pub enum GroundMetric {
    Euclidean,
    Reshaped(ReshapedMetric),
    Kernelized(KernelizedMetric),
}

impl GroundMetric {
    /// Short name recorded alongside solver output.
    pub fn name(&self) -> &'static str {
        match self {
            GroundMetric::Euclidean => "euclidean",
            GroundMetric::Reshaped(_) => "reshaped",
            GroundMetric::Kernelized(_) => "kernelized",
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            GroundMetric::Euclidean => {
                check_dims(x.len(), y.len(), "query points")?;
                Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            }
            GroundMetric::Reshaped(m) => mahalanobis_distance(m, x, y),
            GroundMetric::Kernelized(m) => crate::kernel::kernel_distance(m, x, y),
        }
    }
}

/// Cost matrix `Cᵢⱼ = d(xᵢ, yⱼ)²` between two clouds.
pub fn cost_matrix(metric: &GroundMetric, source: &PointCloud, target: &PointCloud) -> Result<DMatrix<f64>> {
    check_dims(source.dim(), target.dim(), "source vs target dimension")?;
    match metric {
        GroundMetric::Euclidean => Ok(squared_euclidean_costs(source.points(), target.points())),
        GroundMetric::Reshaped(m) => {
            check_dims(source.dim(), m.dim(), "cloud vs metric dimension")?;
            let x = source.points();
            let y = target.points();
            let rows: Vec<Vec<f64>> = (0..x.nrows())
                .into_par_iter()
                .map(|i| {
                    let mut diff = vec![0.0; x.ncols()];
                    (0..y.nrows())
                        .map(|j| {
                            for (k, slot) in diff.iter_mut().enumerate() {
                                *slot = x[(i, k)] - y[(j, k)];
                            }
                            m.squared(&diff)
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            Ok(DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| rows[i][j]))
        }
        GroundMetric::Kernelized(m) => m.cost_matrix(source.points(), target.points()),
    }
}

/// Pairwise squared Euclidean distances between the rows of `x` and `y`.
pub fn squared_euclidean_costs(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| {
        (0..x.ncols()).map(|k| (x[(i, k)] - y[(j, k)]).powi(2)).sum()
    })
}
