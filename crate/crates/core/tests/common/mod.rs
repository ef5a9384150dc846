#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

pub fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-range..range, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// Strictly positive weights summing to one.
pub fn simplex(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        DVector::from_iterator(v.len(), v.iter().map(|x| x / s))
    })
}

pub fn nonneg_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(0.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

pub fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Minimum of `Σᵢ C[i, σ(i)] / n` over all permutations.
pub fn brute_force_assignment(c: &DMatrix<f64>) -> f64 {
    fn recurse(c: &DMatrix<f64>, i: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        let n = c.nrows();
        if i == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                recurse(c, i + 1, used, acc + c[(i, j)], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(c, 0, &mut vec![false; c.nrows()], 0.0, &mut best);
    best / c.nrows() as f64
}

/// Plain-domain Sinkhorn fixed point run far past convergence.
pub fn reference_sinkhorn(c: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>, eps: f64) -> DMatrix<f64> {
    let k = c.map(|v| (-v / eps).exp());
    let mut u = DVector::from_element(a.len(), 1.0);
    let mut v = DVector::from_element(b.len(), 1.0);
    for _ in 0..20_000 {
        u = a.component_div(&(&k * &v));
        v = b.component_div(&(k.transpose() * &u));
    }
    DMatrix::from_fn(a.len(), b.len(), |i, j| u[i] * k[(i, j)] * v[j])
}
