//! Barycentric maps induced by a coupling.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solvers::Coupling;

/// A coupling paired with the target positions it transports onto.
#[derive(Debug, Clone)]
pub struct BarycentricMap {
    coupling: Coupling,
    targets: DMatrix<f64>,
}

impl BarycentricMap {
    /// Rejects couplings with a zero-mass source row: such a row has no defined image.
    pub fn new(coupling: Coupling, targets: DMatrix<f64>) -> Result<Self> {
        let (n, m) = coupling.shape();
        if targets.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "coupling has {m} columns but {} target points were given",
                targets.nrows()
            )));
        }
        if let Some(k) = (0..n).find(|&k| coupling.plan.row(k).sum() <= 0.0) {
            return Err(Error::InvalidInput(format!("source row {k} carries no mass")));
        }
        Ok(Self { coupling, targets })
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }
}

/// `ŷₖ = Σⱼ γₖⱼ yⱼ / Σⱼ γₖⱼ` for every source row.
pub fn barycentric_transport(map: &BarycentricMap) -> DMatrix<f64> {
    let plan = &map.coupling.plan;
    let y = &map.targets;
    let d = y.ncols();
    let rows: Vec<Vec<f64>> = (0..plan.nrows())
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![0.0; d];
            let mut mass = 0.0;
            for j in 0..plan.ncols() {
                let w = plan[(k, j)];
                if w == 0.0 {
                    continue;
                }
                mass += w;
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += w * y[(j, c)];
                }
            }
            acc.iter().map(|a| a / mass).collect()
        })
        .collect();
    DMatrix::from_fn(rows.len(), d, |i, c| rows[i][c])
}

/// Points with class labels attached, row for row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub points: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn new(points: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Moves each source point to its barycentric image and keeps its label.
pub fn transport_labels(map: &BarycentricMap, source_labels: &[usize]) -> Result<LabeledSet> {
    if source_labels.len() != map.coupling.shape().0 {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} source points",
            source_labels.len(),
            map.coupling.shape().0
        )));
    }
    LabeledSet::new(barycentric_transport(map), source_labels.to_vec())
}
