//! 1-nearest-neighbor classification on a transported labeled set.

use nalgebra::DMatrix;
use reshape_ot::mapping::LabeledSet;

/// Label of the closest training point (Euclidean) for each query row; ties go to
/// the lowest training index.
pub fn nearest_neighbor(train: &LabeledSet, queries: &DMatrix<f64>) -> Vec<usize> {
    (0..queries.nrows())
        .map(|q| {
            let mut best = (f64::INFINITY, 0usize);
            for k in 0..train.len() {
                let d = (train.points.row(k) - queries.row(q)).norm_squared();
                if d < best.0 {
                    best = (d, k);
                }
            }
            train.labels[best.1]
        })
        .collect()
}

/// Percentage of mismatched labels.
pub fn error_rate_percent(predicted: &[usize], truth: &[usize]) -> f64 {
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    100.0 * wrong as f64 / truth.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_closest_label() {
        let train = LabeledSet::new(DMatrix::from_row_slice(2, 1, &[0.0, 10.0]), vec![0, 1]).unwrap();
        let q = DMatrix::from_row_slice(3, 1, &[1.0, 9.0, 5.0]);
        assert_eq!(nearest_neighbor(&train, &q), vec![0, 1, 0]);
    }

    #[test]
    fn single_class_has_zero_error() {
        let train = LabeledSet::new(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), vec![1, 1]).unwrap();
        let q = DMatrix::from_row_slice(2, 1, &[5.0, -5.0]);
        assert_eq!(error_rate_percent(&nearest_neighbor(&train, &q), &[1, 1]), 0.0);
    }
}
