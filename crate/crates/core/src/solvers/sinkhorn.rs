//! Entropic OT by log-domain Sinkhorn iterations.

use nalgebra::{DMatrix, DVector};

use super::{marginal_violation, validate_problem, Coupling};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the max-abs marginal violation drops to this value.
    pub marginal_tol: f64,
}

impl SinkhornParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        let p = Self { epsilon, max_iters: DEFAULT_MAX_ITERS, marginal_tol: DEFAULT_MARGINAL_TOL };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.marginal_tol.is_finite() && self.marginal_tol > 0.0) {
            return Err(Error::InvalidInput(format!("marginal_tol must be > 0, got {}", self.marginal_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        Ok(())
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropy-regularized plan `γ = diag(u) exp(−C/ε) diag(v)`, iterated on the dual
/// potentials `f = ε ln u`, `g = ε ln v`.
///
/// Hitting `max_iters` is not an error: the result carries `converged = false`.
pub fn solve_sinkhorn(
    c: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
    params: &SinkhornParams,
) -> Result<Coupling> {
    params.validate()?;
    let (a, b) = validate_problem(c, a, b)?;
    let (n, m) = c.shape();
    let eps = params.epsilon;
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];

    let row_update = |g: &[f64], f: &mut [f64]| {
        for i in 0..n {
            f[i] = if log_a[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                eps * log_a[i] - eps * log_sum_exp((0..m).map(|j| (g[j] - c[(i, j)]) / eps))
            };
        }
    };
    let col_update = |f: &[f64], g: &mut [f64]| {
        for j in 0..m {
            g[j] = if log_b[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                eps * log_b[j] - eps * log_sum_exp((0..n).map(|i| (f[i] - c[(i, j)]) / eps))
            };
        }
    };
    let plan_of = |f: &[f64], g: &[f64]| {
        DMatrix::from_fn(n, m, |i, j| {
            if f[i] == f64::NEG_INFINITY || g[j] == f64::NEG_INFINITY {
                0.0
            } else {
                ((f[i] + g[j] - c[(i, j)]) / eps).exp()
            }
        })
    };

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iters {
        iterations = it;
        row_update(&g, &mut f);
        col_update(&f, &mut g);
        if f.iter().chain(g.iter()).any(|v| v.is_nan()) {
            return Err(Error::Numerical(format!("NaN in Sinkhorn potentials at iteration {it}")));
        }
        // Columns are exact after the g-update; only rows can be off.
        let row_violation = (0..n)
            .map(|i| {
                if f[i] == f64::NEG_INFINITY {
                    return 0.0;
                }
                let s: f64 = (0..m)
                    .filter(|&j| g[j] != f64::NEG_INFINITY)
                    .map(|j| ((f[i] + g[j] - c[(i, j)]) / eps).exp())
                    .sum();
                (s - a[i]).abs()
            })
            .fold(0.0, f64::max);
        if row_violation <= params.marginal_tol {
            converged = true;
            break;
        }
    }

    let plan = plan_of(&f, &g);
    if plan.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Sinkhorn plan".into()));
    }
    if !converged {
        log::warn!(
            "Sinkhorn stopped after {iterations} iterations with marginal violation {:e}",
            marginal_violation(&plan, &a, &b)
        );
    }
    Ok(Coupling::from_plan(plan, a, b, c, converged, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_cost_gives_product_plan() {
        let a = DVector::from_element(3, 1.0 / 3.0);
        let b = DVector::from_element(2, 0.5);
        let p = SinkhornParams::new(0.3).unwrap();
        let g = solve_sinkhorn(&DMatrix::zeros(3, 2), &a, &b, &p).unwrap();
        assert_abs_diff_eq!(g.plan, DMatrix::from_element(3, 2, 1.0 / 6.0), epsilon = 1e-12);
        assert!(g.converged);
    }

    #[test]
    fn one_by_one() {
        let one = DVector::from_element(1, 1.0);
        let g = solve_sinkhorn(&DMatrix::from_element(1, 1, 3.0), &one, &one, &SinkhornParams::new(0.01).unwrap())
            .unwrap();
        assert_abs_diff_eq!(g.plan[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn small_epsilon_does_not_underflow() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 50.0, 50.0, 0.0]);
        let w = DVector::from_element(2, 0.5);
        let g = solve_sinkhorn(&c, &w, &w, &SinkhornParams::new(1e-3).unwrap()).unwrap();
        assert_abs_diff_eq!(g.plan[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.3]);
        let a = DVector::from_vec(vec![0.3, 0.7]);
        let b = DVector::from_vec(vec![0.6, 0.4]);
        let p = SinkhornParams { epsilon: 0.01, max_iters: 1, marginal_tol: 1e-15 };
        let g = solve_sinkhorn(&c, &a, &b, &p).unwrap();
        assert!(!g.converged);
        assert_eq!(g.iterations, 1);
    }

    #[test]
    fn params_validated() {
        assert!(SinkhornParams::new(0.0).is_err());
        let p = SinkhornParams { epsilon: 0.1, max_iters: 10, marginal_tol: 0.0 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_weight_rows_get_no_mass() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let b = DVector::from_vec(vec![0.5, 0.5]);
        let g = solve_sinkhorn(&c, &a, &b, &SinkhornParams::new(0.1).unwrap()).unwrap();
        assert_eq!(g.plan.row(1).sum(), 0.0);
        assert!(g.marginal_violation < 1e-9);
    }
}
