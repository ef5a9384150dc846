//! Discrete Kantorovich solvers over arbitrary nonnegative cost matrices.

mod exact;
mod sinkhorn;

use nalgebra::{DMatrix, DVector};

pub use exact::{network_simplex, solve_assignment, solve_exact, TransportBasis};
pub use sinkhorn::{solve_sinkhorn, SinkhornParams, DEFAULT_MARGINAL_TOL, DEFAULT_MAX_ITERS};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{cost_matrix, GroundMetric, PointCloud};

/// Marginals whose total differs from one by at most this are renormalized.
pub const MARGINAL_SUM_TOL: f64 = 1e-9;

/// A transport plan `γ` together with the marginals it was solved for.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub plan: DMatrix<f64>,
    pub source_marginal: DVector<f64>,
    pub target_marginal: DVector<f64>,
    /// `Σᵢⱼ γᵢⱼ Cᵢⱼ` for the cost matrix the plan was solved on.
    pub objective: f64,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
    pub iterations: usize,
    /// Max-abs deviation of row and column sums from the marginals.
    pub marginal_violation: f64,
}

impl Coupling {
    pub(crate) fn from_plan(
        plan: DMatrix<f64>,
        a: DVector<f64>,
        b: DVector<f64>,
        costs: &DMatrix<f64>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let objective = plan.component_mul(costs).sum();
        let marginal_violation = marginal_violation(&plan, &a, &b);
        Self { plan, source_marginal: a, target_marginal: b, objective, converged, iterations, marginal_violation }
    }

    /// `n × n` coupling `(1/n)·I`.
    pub fn identity(n: usize) -> Self {
        let w = DVector::from_element(n, 1.0 / n as f64);
        Self {
            plan: DMatrix::identity(n, n) / n as f64,
            source_marginal: w.clone(),
            target_marginal: w,
            objective: 0.0,
            converged: true,
            iterations: 0,
            marginal_violation: 0.0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.plan.shape()
    }

    /// Recomputes the objective against a different cost matrix.
    pub fn cost_under(&self, costs: &DMatrix<f64>) -> f64 {
        self.plan.component_mul(costs).sum()
    }
}

pub fn marginal_violation(plan: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let rows = plan.row_iter().zip(a.iter()).map(|(r, ai)| (r.sum() - ai).abs());
    let cols = plan.column_iter().zip(b.iter()).map(|(c, bj)| (c.sum() - bj).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// Checks nonnegativity and unit mass (within [`MARGINAL_SUM_TOL`]) and renormalizes.
pub fn normalize_marginal(w: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    ensure_finite(w.iter(), what)?;
    if w.is_empty() {
        return Err(Error::InfeasibleMarginals(format!("{what} is empty")));
    }
    if w.iter().any(|&x| x < 0.0) {
        return Err(Error::InfeasibleMarginals(format!("{what} has negative entries")));
    }
    let total = w.sum();
    if (total - 1.0).abs() > MARGINAL_SUM_TOL {
        return Err(Error::InfeasibleMarginals(format!("{what} sums to {total}, expected 1")));
    }
    Ok(w / total)
}

pub(crate) fn validate_problem(
    c: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if c.shape() != (a.len(), b.len()) {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix is {:?}, marginals have lengths {} and {}",
            c.shape(),
            a.len(),
            b.len()
        )));
    }
    ensure_finite(c.iter(), "cost matrix")?;
    if c.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("cost matrix has negative entries".into()));
    }
    Ok((normalize_marginal(a, "source marginal")?, normalize_marginal(b, "target marginal")?))
}

/// Which solver the pipeline hands the cost matrix to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    Exact,
    Sinkhorn(SinkhornParams),
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Exact => "exact",
            SolverChoice::Sinkhorn(_) => "sinkhorn",
        }
    }

    pub fn solve(&self, c: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> Result<Coupling> {
        match self {
            SolverChoice::Exact => solve_exact(c, a, b),
            SolverChoice::Sinkhorn(p) => solve_sinkhorn(c, a, b, p),
        }
    }
}

/// Output of [`solve_pipeline`]: the plan, the costs it was solved on, and provenance.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub coupling: Coupling,
    pub costs: DMatrix<f64>,
    pub metric: &'static str,
    pub solver: SolverChoice,
}

/// Builds the cost matrix under `metric` and solves with the chosen solver.
pub fn solve_pipeline(
    source: &PointCloud,
    target: &PointCloud,
    metric: &GroundMetric,
    solver: SolverChoice,
) -> Result<PipelineOutput> {
    let costs = cost_matrix(metric, source, target)?;
    let coupling = solver.solve(&costs, source.weights(), target.weights())?;
    Ok(PipelineOutput { coupling, costs, metric: metric.name(), solver })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_normalization() {
        let w = DVector::from_vec(vec![0.5, 0.5 + 5e-10]);
        let n = normalize_marginal(&w, "w").unwrap();
        assert!((n.sum() - 1.0).abs() < 1e-15);
        assert!(normalize_marginal(&DVector::from_vec(vec![0.5, 0.6]), "w").is_err());
        assert!(normalize_marginal(&DVector::from_vec(vec![1.5, -0.5]), "w").is_err());
    }

    #[test]
    fn problem_validation() {
        let a = DVector::from_element(2, 0.5);
        let mut c = DMatrix::zeros(2, 2);
        assert!(validate_problem(&c, &a, &DVector::from_element(3, 1.0 / 3.0)).is_err());
        c[(0, 1)] = f64::INFINITY;
        assert!(matches!(validate_problem(&c, &a, &a), Err(Error::NonFinite(_))));
    }
}
