//! Optimal transport with ground metrics reshaped by observed displacements.
//!
//! A handful of observed source-to-target pairs is turned into a Mahalanobis or
//! kernel-space metric that is cheap along the directions the data actually moved.
//! Classical OT solvers then run on the resulting cost matrix.

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod mapping;
pub mod solvers;

pub use error::{Error, Result};
pub use evaluation::{
    baseline_attributions, coupling_attribution, cosine_similarity, ground_truth_attribution, transport_error,
    Attribution, Baselines,
};
pub use geometry::{
    build_reshaped_metric, compute_second_moment, cost_matrix, eta_from_alpha, mahalanobis_distance,
    DisplacementSet, GroundMetric, PointCloud, ReshapedMetric, SecondMoment,
};
pub use kernel::{build_kernelized_metric, kernel_distance, Kernel, KernelizedMetric};
pub use mapping::{barycentric_transport, transport_labels, BarycentricMap, LabeledSet};
pub use solvers::{solve_exact, solve_pipeline, solve_sinkhorn, Coupling, SinkhornParams, SolverChoice};
