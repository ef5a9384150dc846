//! Turning a configured method plus guidance into a metric, a plan and predictions.

use nalgebra::DMatrix;
use reshape_ot::geometry::{compute_second_moment, DisplacementSet, GroundMetric, PointCloud, ReshapedMetric};
use reshape_ot::kernel::{Kernel, KernelizedMetric};
use reshape_ot::mapping::{barycentric_transport, BarycentricMap};
use reshape_ot::solvers::{solve_pipeline, Coupling, SinkhornParams, SolverChoice};

use crate::config::{KernelChoice, MethodSpec};
use crate::error::CliError;

fn kernel_of(kernel: KernelChoice, lambda: Option<f64>) -> Result<Kernel, CliError> {
    Ok(match kernel {
        KernelChoice::Linear => Kernel::Linear,
        KernelChoice::Rbf => Kernel::rbf(lambda.unwrap_or(1.0))?,
    })
}

/// The ground metric for `method`; guided methods fall back to their unguided form
/// when `guidance` is `None`.
///
/// The linear kernel is realized in input space, where it coincides with the
/// kernelized form and needs only a `d × d` solve.
pub fn build_metric(method: &MethodSpec, guidance: Option<&DisplacementSet>, dim: usize) -> Result<GroundMetric, CliError> {
    match method {
        MethodSpec::ClassicalExact {} | MethodSpec::Sinkhorn { .. } => Ok(GroundMetric::Euclidean),
        MethodSpec::Reshape { kernel, lambda, alpha } | MethodSpec::ReshapeRng { kernel, lambda, alpha } => {
            match (kernel, guidance) {
                (KernelChoice::Linear, None) => Ok(GroundMetric::Euclidean),
                (KernelChoice::Linear, Some(d)) => {
                    Ok(GroundMetric::Reshaped(ReshapedMetric::from_alpha(&compute_second_moment(d)?, *alpha)?))
                }
                (KernelChoice::Rbf, None) => {
                    Ok(GroundMetric::Kernelized(KernelizedMetric::unguided(kernel_of(*kernel, *lambda)?, dim)))
                }
                (KernelChoice::Rbf, Some(d)) => Ok(GroundMetric::Kernelized(KernelizedMetric::from_alpha(
                    kernel_of(*kernel, *lambda)?,
                    d,
                    *alpha,
                )?)),
            }
        }
    }
}

pub fn solver_of(method: &MethodSpec) -> SolverChoice {
    match method {
        MethodSpec::Sinkhorn { epsilon, max_iters, marginal_tol } => SolverChoice::Sinkhorn(SinkhornParams {
            epsilon: *epsilon,
            max_iters: *max_iters,
            marginal_tol: *marginal_tol,
        }),
        _ => SolverChoice::Exact,
    }
}

/// A solved transport problem and the barycentric image of every source point.
pub struct Transported {
    pub coupling: Coupling,
    pub costs: DMatrix<f64>,
    pub predicted: DMatrix<f64>,
    pub metric: GroundMetric,
}

pub fn transport(
    method: &MethodSpec,
    guidance: Option<&DisplacementSet>,
    sources: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> Result<Transported, CliError> {
    let metric = build_metric(method, guidance, sources.ncols())?;
    let src = PointCloud::uniform(sources.clone())?;
    let tgt = PointCloud::uniform(targets.clone())?;
    let out = solve_pipeline(&src, &tgt, &metric, solver_of(method))?;
    let predicted = barycentric_transport(&BarycentricMap::new(out.coupling.clone(), targets.clone())?);
    Ok(Transported { coupling: out.coupling, costs: out.costs, predicted, metric })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unguided_linear_is_euclidean() {
        let m = MethodSpec::Reshape { kernel: KernelChoice::Linear, lambda: None, alpha: 10.0 };
        assert!(matches!(build_metric(&m, None, 2).unwrap(), GroundMetric::Euclidean));
    }

    #[test]
    fn identity_transport_on_equal_clouds() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 3.0]);
        let t = transport(&MethodSpec::ClassicalExact {}, None, &x, &x).unwrap();
        assert_eq!(t.predicted, x);
    }
}
