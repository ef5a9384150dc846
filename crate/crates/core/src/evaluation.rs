//! Transport error, per-feature shift attributions and their comparison.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::solvers::Coupling;

const ATTRIBUTION_CLAMP: f64 = 1e-12;

/// Nonnegative per-feature contributions to a squared transport cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    values: Vec<f64>,
}

impl Attribution {
    /// Entries in `[-1e-12, 0)` are clamped to zero; anything more negative is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let mut values = values;
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("attribution entry {i}")));
            }
            if *v < 0.0 {
                if *v < -ATTRIBUTION_CLAMP {
                    return Err(Error::InvalidInput(format!("attribution entry {i} is negative ({v})")));
                }
                *v = 0.0;
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean Euclidean distance between matching rows.
pub fn transport_error(truth: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(truth, predicted, "transport error")?;
    if truth.nrows() == 0 {
        return Err(Error::InvalidInput("transport error over zero points".into()));
    }
    let total: f64 = (0..truth.nrows()).map(|k| (truth.row(k) - predicted.row(k)).norm()).sum();
    Ok(total / truth.nrows() as f64)
}

/// Per-feature mean squared displacement of row-paired clouds.
pub fn ground_truth_attribution(sources: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Attribution> {
    check_same_shape(sources, targets, "ground-truth attribution")?;
    let n = sources.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("ground-truth attribution over zero pairs".into()));
    }
    let w = 1.0 / n as f64;
    let values = (0..sources.ncols())
        .map(|i| (0..n).fold(0.0, |acc, k| acc + w * (sources[(k, i)] - targets[(k, i)]).powi(2)))
        .collect();
    Attribution::new(values)
}

/// `Rᵢ = Σₖₗ γₖₗ (xₖᵢ − yₗᵢ)²`, always with squared-Euclidean per-feature terms.
pub fn coupling_attribution(coupling: &Coupling, source: &PointCloud, target: &PointCloud) -> Result<Attribution> {
    if coupling.shape() != (source.len(), target.len()) {
        return Err(Error::DimensionMismatch(format!(
            "coupling is {:?} but clouds have {} and {} points",
            coupling.shape(),
            source.len(),
            target.len()
        )));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", source.dim(), target.dim())));
    }
    let (x, y, plan) = (source.points(), target.points(), &coupling.plan);
    let mut values = vec![0.0; source.dim()];
    for k in 0..source.len() {
        for l in 0..target.len() {
            let w = plan[(k, l)];
            if w == 0.0 {
                continue;
            }
            for (i, r) in values.iter_mut().enumerate() {
                *r += w * (x[(k, i)] - y[(l, i)]).powi(2);
            }
        }
    }
    Attribution::new(values)
}

/// The two reference attributions every method is compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct Baselines {
    pub constant: Attribution,
    pub mean_shift: Attribution,
}

pub fn baseline_attributions(source: &PointCloud, target: &PointCloud) -> Result<Baselines> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", source.dim(), target.dim())));
    }
    let diff = source.mean() - target.mean();
    Ok(Baselines {
        constant: Attribution::new(vec![1.0; source.dim()])?,
        mean_shift: Attribution::new(diff.iter().map(|v| v * v).collect())?,
    })
}

/// Cosine of the angle between two attributions; 0 (with a warning) if either is zero.
pub fn cosine_similarity(a: &Attribution, b: &Attribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("attribution lengths {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine similarity with a zero attribution vector; reporting 0");
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn attr(v: &[f64]) -> Attribution {
        Attribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn transport_error_examples() {
        let y = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(transport_error(&y, &y).unwrap(), 0.0);
        let off = y.map(|v| v) + DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 3.0, 4.0]);
        assert_abs_diff_eq!(transport_error(&y, &off).unwrap(), 5.0, epsilon = 1e-15);
        assert!(transport_error(&y, &DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn ground_truth_examples() {
        let x = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ground_truth_attribution(&x, &x).unwrap().values(), &[0.0; 3]);
        let mut y = x.clone();
        y.column_mut(0).add_scalar_mut(2.0);
        assert_eq!(ground_truth_attribution(&x, &y).unwrap().values(), &[4.0, 0.0, 0.0]);
    }

    #[test]
    fn single_point_attribution() {
        let x = PointCloud::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let y = PointCloud::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let r = coupling_attribution(&Coupling::identity(1), &x, &y).unwrap();
        assert_eq!(r.values(), &[1.0, 4.0]);
        assert_eq!(r.total(), 5.0);
    }

    #[test]
    fn baselines() {
        let x = PointCloud::from_rows(&[vec![1.0, 0.0], vec![3.0, 2.0]]).unwrap();
        let y = PointCloud::from_rows(&[vec![0.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let b = baseline_attributions(&x, &y).unwrap();
        assert_eq!(b.constant.values(), &[1.0, 1.0]);
        assert_eq!(b.mean_shift.values(), &[1.0, 4.0]);
        let same = baseline_attributions(&x, &x).unwrap();
        assert_eq!(same.mean_shift.values(), &[0.0, 0.0]);
        let w = PointCloud::new(x.points().clone(), DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(baseline_attributions(&w, &w).unwrap().mean_shift.values(), &[0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine_similarity(&attr(&[2.0, 3.0]), &attr(&[2.0, 3.0])).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine_similarity(&attr(&[1.0, 0.0]), &attr(&[0.0, 1.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine_similarity(&attr(&[1.0, 1.0]), &attr(&[1.0, 0.0])).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(cosine_similarity(&attr(&[0.0, 0.0]), &attr(&[1.0, 0.0])).unwrap(), 0.0);
        assert!(cosine_similarity(&attr(&[1.0]), &attr(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn tiny_negatives_clamped() {
        assert_eq!(attr(&[-1e-13, 1.0]).values(), &[0.0, 1.0]);
        assert!(Attribution::new(vec![-1e-6]).is_err());
    }
}
