//! Kernelized reshaped ground metric.
//!
//! With anchors `z = (x̃₁ … x̃_M, ỹ₁ … ỹ_N)`, Gram matrix `K = 𝒦(z, z)` and the
//! Laplacian `A` of the bipartite coupling graph, the reshaped distance in feature
//! space is
//!
//! ```text
//! d(Φx, Φy)² = 𝒦(x,x) − 2𝒦(x,y) + 𝒦(y,y) − gᵀΛg,   gₖ = 𝒦(zₖ,x) − 𝒦(zₖ,y)
//! Λ = η A^½ (I + η A^½ K A^½)⁻¹ A^½
//! ```
//!
//! For the linear kernel this is exactly the input-space metric of
//! [`crate::geometry`], because `Σ = zᵀAz` and the Woodbury identity gives
//! `(I + ηzᵀAz)⁻¹ = I − zᵀΛz`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{eta_from_trace, DisplacementSet};
use crate::linalg::{cholesky_with_jitter, is_symmetric, psd_sqrt, symmetrize};

/// Tolerance below which a negative squared kernel distance is treated as round-off.
pub const KERNEL_NEGATIVE_TOL: f64 = 1e-8;

/// Positive semi-definite kernels supported by the kernelized metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `𝒦(x, y) = ⟨x, y⟩`
    Linear,
    /// `𝒦(x, y) = exp(−λ‖x − y‖²)`
    Rbf { lambda: f64 },
}

impl Kernel {
    pub fn rbf(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(Kernel::Rbf { lambda })
        } else {
            Err(Error::InvalidInput(format!("RBF lambda must be finite and > 0, got {lambda}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Kernel::Rbf { lambda } => (-lambda * sq_dist(x, y)).exp(),
        }
    }

    /// `‖Φ(x) − Φ(y)‖² = 𝒦(x,x) − 2𝒦(x,y) + 𝒦(y,y)`, evaluated without cancellation.
    pub fn feature_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => sq_dist(x, y),
            Kernel::Rbf { lambda } => -2.0 * (-lambda * sq_dist(x, y)).exp_m1(),
        }
    }

    /// Kernel matrix `𝒦(aᵢ, bⱼ)` between the rows of `a` and `b`.
    pub fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ra = rows(a);
        let rb = rows(b);
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| self.eval(&ra[i], &rb[j]))
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Weighted Laplacian of the bipartite coupling graph,
/// `A = [[diag(a), −γ̃], [−γ̃ᵀ, diag(b)]]` with `a`, `b` the marginals of `γ̃`.
pub fn laplacian_from_coupling(d: &DisplacementSet) -> DMatrix<f64> {
    let (m, n) = (d.n_sources(), d.n_targets());
    let g = d.coupling();
    let a = d.source_marginal();
    let b = d.target_marginal();
    let mut lap = DMatrix::zeros(m + n, m + n);
    for i in 0..m {
        lap[(i, i)] = a[i];
        for j in 0..n {
            lap[(i, m + j)] = -g[(i, j)];
            lap[(m + j, i)] = -g[(i, j)];
        }
    }
    for j in 0..n {
        lap[(m + j, m + j)] = b[j];
    }
    lap
}

/// Closed-form `A^½ = (1/√(2N)) [[I, −I], [−I, I]]` for `N` uniformly weighted pairs.
pub fn paired_uniform_laplacian_sqrt(n: usize) -> DMatrix<f64> {
    let c = 1.0 / ((2 * n) as f64).sqrt();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i == j {
            c
        } else if i % n == j % n {
            -c
        } else {
            0.0
        }
    })
}

fn is_paired_uniform_laplacian(a: &DMatrix<f64>) -> bool {
    let size = a.nrows();
    if size == 0 || !size.is_multiple_of(2) {
        return false;
    }
    let n = size / 2;
    let c = 1.0 / n as f64;
    (0..size).all(|i| {
        (0..size).all(|j| {
            let expected = if i == j {
                c
            } else if i % n == j % n {
                -c
            } else {
                0.0
            };
            (a[(i, j)] - expected).abs() <= 1e-15
        })
    })
}

/// Symmetric PSD square root of a Laplacian.
///
/// Paired uniform Laplacians use the closed form; anything else goes through an
/// eigendecomposition with negative eigenvalues clamped to zero.
pub fn laplacian_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = a.amax().max(1.0);
    if !is_symmetric(a, 1e-12 * scale) {
        return Err(Error::InvalidInput("laplacian_sqrt needs a symmetric matrix".into()));
    }
    if is_paired_uniform_laplacian(a) {
        return Ok(paired_uniform_laplacian_sqrt(a.nrows() / 2));
    }
    Ok(psd_sqrt(a))
}

/// `Tr(Σ)` of the feature-space second moment, `Σₖₗ γ̃ₖₗ ‖Φ(x̃ₖ) − Φ(ỹₗ)‖² = Tr(AK)`.
pub fn feature_trace(kernel: &Kernel, d: &DisplacementSet) -> f64 {
    let xs = rows(d.sources());
    let ys = rows(d.targets());
    let g = d.coupling();
    let mut total = 0.0;
    for (k, x) in xs.iter().enumerate() {
        for (l, y) in ys.iter().enumerate() {
            if g[(k, l)] > 0.0 {
                total += g[(k, l)] * kernel.feature_sq_dist(x, y);
            }
        }
    }
    total
}

/// The kernelized reshaped metric.
#[derive(Debug, Clone)]
pub struct KernelizedMetric {
    kernel: Kernel,
    dim: usize,
    anchors: Vec<Vec<f64>>,
    anchor_matrix: DMatrix<f64>,
    gram_zz: DMatrix<f64>,
    laplacian_sqrt: DMatrix<f64>,
    lambda_matrix: DMatrix<f64>,
    // Λ = F Fᵀ; used by the batched cost matrix.
    factor: DMatrix<f64>,
    eta: f64,
}

impl KernelizedMetric {
    /// Kernel-space Euclidean metric without displacement guidance (`η = 0`).
    pub fn unguided(kernel: Kernel, dim: usize) -> Self {
        Self {
            kernel,
            dim,
            anchors: Vec::new(),
            anchor_matrix: DMatrix::zeros(0, dim),
            gram_zz: DMatrix::zeros(0, 0),
            laplacian_sqrt: DMatrix::zeros(0, 0),
            lambda_matrix: DMatrix::zeros(0, 0),
            factor: DMatrix::zeros(0, 0),
            eta: 0.0,
        }
    }

    /// Builds the metric with `η = α / Tr(Σ_feature)`.
    pub fn from_alpha(kernel: Kernel, d: &DisplacementSet, alpha: f64) -> Result<Self> {
        let eta = eta_from_trace(feature_trace(&kernel, d), alpha)?;
        build_kernelized_metric(kernel, d, eta)
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Anchors `z`, sources first, one per row.
    pub fn anchors(&self) -> &DMatrix<f64> {
        &self.anchor_matrix
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram_zz
    }

    pub fn laplacian_sqrt(&self) -> &DMatrix<f64> {
        &self.laplacian_sqrt
    }

    pub fn lambda_matrix(&self) -> &DMatrix<f64> {
        &self.lambda_matrix
    }

    fn check_query(&self, len: usize) -> Result<()> {
        if len == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!("query has dimension {len}, anchors {}", self.dim)))
        }
    }

    fn kernel_column(&self, x: &[f64]) -> Vec<f64> {
        self.anchors.iter().map(|z| self.kernel.eval(z, x)).collect()
    }

    /// Squared distances between the rows of `x` and `y`, reusing `𝒦(z, ·)` per row.
    pub fn cost_matrix(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_query(x.ncols())?;
        self.check_query(y.ncols())?;
        let xr = rows(x);
        let yr = rows(y);
        let project = |pts: &[Vec<f64>]| -> Vec<Vec<f64>> {
            pts.par_iter()
                .map(|p| {
                    let k = self.kernel_column(p);
                    (0..self.factor.ncols())
                        .map(|c| (0..k.len()).map(|r| self.factor[(r, c)] * k[r]).sum())
                        .collect()
                })
                .collect()
        };
        let px = project(&xr);
        let py = project(&yr);
        let out: Vec<Vec<f64>> = xr
            .par_iter()
            .zip(px.par_iter())
            .map(|(xi, pi)| {
                yr.iter()
                    .zip(py.iter())
                    .map(|(yj, pj)| {
                        let base = self.kernel.feature_sq_dist(xi, yj);
                        let shrink: f64 = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum();
                        clamp_kernel(base - shrink, base)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(x.nrows(), y.nrows(), |i, j| out[i][j]))
    }
}

fn clamp_kernel(q: f64, scale: f64) -> Result<f64> {
    if q >= 0.0 {
        Ok(q)
    } else if -q <= KERNEL_NEGATIVE_TOL * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("negative squared kernel distance {q:e}")))
    }
}

/// Assembles anchors, Gram matrix, `A^½` and `Λ` for the given `η`.
pub fn build_kernelized_metric(kernel: Kernel, d: &DisplacementSet, eta: f64) -> Result<KernelizedMetric> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidInput(format!("eta must be finite and >= 0, got {eta}")));
    }
    if let Kernel::Rbf { lambda } = kernel {
        Kernel::rbf(lambda)?;
    }
    let (m, n) = (d.n_sources(), d.n_targets());
    let size = m + n;
    let z = DMatrix::from_fn(size, d.dim(), |i, j| {
        if i < m {
            d.sources()[(i, j)]
        } else {
            d.targets()[(i - m, j)]
        }
    });
    let gram = symmetrize(&kernel.gram(&z, &z));
    let sqrt_a = laplacian_sqrt(&laplacian_from_coupling(d))?;

    let (lambda_matrix, factor) = if eta == 0.0 {
        (DMatrix::zeros(size, size), DMatrix::zeros(size, 0))
    } else {
        let inner = DMatrix::<f64>::identity(size, size) + (&sqrt_a * &gram * &sqrt_a) * eta;
        let (ch, _) = cholesky_with_jitter(&inner)?;
        let l_inv = ch
            .l()
            .solve_lower_triangular(&DMatrix::identity(size, size))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let factor = (&sqrt_a * l_inv.transpose()) * eta.sqrt();
        (symmetrize(&(&factor * factor.transpose())), factor)
    };

    Ok(KernelizedMetric {
        kernel,
        dim: d.dim(),
        anchors: rows(&z),
        anchor_matrix: z,
        gram_zz: gram,
        laplacian_sqrt: sqrt_a,
        lambda_matrix,
        factor,
        eta,
    })
}

/// `√(𝒦(x,x) − 2𝒦(x,y) + 𝒦(y,y) − gᵀΛg)` with `gₖ = 𝒦(zₖ,x) − 𝒦(zₖ,y)`.
pub fn kernel_distance(m: &KernelizedMetric, x: &[f64], y: &[f64]) -> Result<f64> {
    m.check_query(x.len())?;
    m.check_query(y.len())?;
    let base = m.kernel.feature_sq_dist(x, y);
    if m.anchors.is_empty() {
        return Ok(base.sqrt());
    }
    let kx = m.kernel_column(x);
    let ky = m.kernel_column(y);
    let g: Vec<f64> = kx.iter().zip(&ky).map(|(a, b)| a - b).collect();
    let mut quad = 0.0;
    for (i, gi) in g.iter().enumerate() {
        let row: f64 = g.iter().enumerate().map(|(j, gj)| m.lambda_matrix[(i, j)] * gj).sum();
        quad += gi * row;
    }
    Ok(clamp_kernel(base - quad, base)?.sqrt())
}
