mod common;

use common::{brute_force_assignment, matrix, nonneg_matrix, reference_sinkhorn, simplex};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use reshape_ot::evaluation::{coupling_attribution, cosine_similarity, transport_error, Attribution};
use reshape_ot::geometry::{squared_euclidean_costs, PointCloud};
use reshape_ot::mapping::{barycentric_transport, BarycentricMap};
use reshape_ot::solvers::{network_simplex, solve_exact, solve_sinkhorn, SinkhornParams};

fn uniform(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / n as f64)
}

fn square_costs() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=6).prop_flat_map(|n| nonneg_matrix(n, n))
}

fn rectangular_problem() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    (1usize..=7, 1usize..=7).prop_flat_map(|(n, m)| (nonneg_matrix(n, m), simplex(n), simplex(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_matches_permutation_oracle(c in square_costs()) {
        let n = c.nrows();
        let g = solve_exact(&c, &uniform(n), &uniform(n)).unwrap();
        prop_assert!((g.objective - brute_force_assignment(&c)).abs() <= 1e-12);
    }

    #[test]
    fn network_simplex_certifies_optimality((c, a, b) in rectangular_problem()) {
        let basis = network_simplex(&c, &a, &b).unwrap();
        let (n, m) = c.shape();
        let mut dual = 0.0;
        for i in 0..n {
            dual += a[i] * basis.row_potentials[i];
        }
        for j in 0..m {
            dual += b[j] * basis.col_potentials[j];
        }
        let primal = basis.plan.component_mul(&c).sum();
        prop_assert!((primal - dual).abs() <= 1e-10, "primal {primal} dual {dual}");
        for i in 0..n {
            prop_assert!((basis.plan.row(i).sum() - a[i]).abs() <= 1e-12);
            for j in 0..m {
                let reduced = c[(i, j)] - basis.row_potentials[i] - basis.col_potentials[j];
                prop_assert!(reduced >= -1e-10);
                prop_assert!(basis.plan[(i, j)] >= 0.0);
                if basis.plan[(i, j)] > 1e-14 {
                    prop_assert!(reduced.abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn simplex_and_assignment_agree(c in square_costs()) {
        let n = c.nrows();
        let basis = network_simplex(&c, &uniform(n), &uniform(n)).unwrap();
        let g = solve_exact(&c, &uniform(n), &uniform(n)).unwrap();
        prop_assert!((basis.plan.component_mul(&c).sum() - g.objective).abs() <= 1e-12);
    }

    #[test]
    fn sinkhorn_matches_reference((c, a, b) in (nonneg_matrix(4, 4), simplex(4), simplex(4))) {
        let g = solve_sinkhorn(&c, &a, &b, &SinkhornParams::new(0.05).unwrap()).unwrap();
        prop_assert!(g.converged);
        prop_assert!(g.marginal_violation <= 1e-7);
        let reference = reference_sinkhorn(&c, &a, &b, 0.05);
        prop_assert!((&g.plan - reference).amax() <= 1e-6);
    }

    #[test]
    fn sinkhorn_marginals_rectangular((c, a, b) in rectangular_problem(), eps in 0.01f64..1.0) {
        let g = solve_sinkhorn(&c, &a, &b, &SinkhornParams::new(eps).unwrap()).unwrap();
        prop_assert!(g.converged);
        prop_assert!(g.marginal_violation <= 1e-7);
        let exact = solve_exact(&c, &a, &b).unwrap();
        prop_assert!(g.objective >= exact.objective - 1e-9);
    }

    #[test]
    fn attribution_sums_to_cost((n, m, d) in (1usize..=6, 1usize..=6, 1usize..=4), seed in any::<u64>()) {
        let x = DMatrix::from_fn(n, d, |i, j| ((seed as usize + 7 * i + 3 * j) % 11) as f64 / 3.0);
        let y = DMatrix::from_fn(m, d, |i, j| ((seed as usize / 3 + 5 * i + j) % 13) as f64 / 4.0);
        let src = PointCloud::uniform(x.clone()).unwrap();
        let tgt = PointCloud::uniform(y.clone()).unwrap();
        let c = squared_euclidean_costs(&x, &y);
        let g = solve_exact(&c, src.weights(), tgt.weights()).unwrap();
        let r = coupling_attribution(&g, &src, &tgt).unwrap();
        prop_assert!((r.total() - g.objective).abs() <= 1e-10 * (1.0 + g.objective));
    }

    #[test]
    fn barycentric_images_stay_in_hull((c, a, b) in rectangular_problem(), ys in matrix(7, 2, 5.0)) {
        let g = solve_sinkhorn(&c, &a, &b, &SinkhornParams::new(0.1).unwrap()).unwrap();
        let targets = ys.rows(0, c.ncols()).into_owned();
        let map = BarycentricMap::new(g, targets.clone()).unwrap();
        let t = barycentric_transport(&map);
        prop_assert_eq!(t.nrows(), c.nrows());
        for k in 0..t.nrows() {
            for col in 0..2 {
                let lo = targets.column(col).min();
                let hi = targets.column(col).max();
                prop_assert!(t[(k, col)] >= lo - 1e-9 && t[(k, col)] <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn permutation_plan_maps_to_permuted_targets(c in square_costs(), ys in matrix(6, 2, 5.0)) {
        let n = c.nrows();
        let g = solve_exact(&c, &uniform(n), &uniform(n)).unwrap();
        let targets = ys.rows(0, n).into_owned();
        let t = barycentric_transport(&BarycentricMap::new(g.clone(), targets.clone()).unwrap());
        for k in 0..n {
            let j = (0..n).find(|&j| g.plan[(k, j)] > 0.0).unwrap();
            prop_assert!((t.row(k) - targets.row(j)).amax() <= 1e-12);
        }
    }

    #[test]
    fn transport_error_translation_invariant(y in matrix(5, 3, 2.0), p in matrix(5, 3, 2.0), shift in matrix(1, 3, 10.0)) {
        let move_rows = |m: &DMatrix<f64>| DMatrix::from_fn(5, 3, |i, j| m[(i, j)] + shift[(0, j)]);
        let e0 = transport_error(&y, &p).unwrap();
        let e1 = transport_error(&move_rows(&y), &move_rows(&p)).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-12 * (1.0 + e0));
    }

    #[test]
    fn cosine_scale_invariant(a in prop::collection::vec(0.0f64..5.0, 4), b in prop::collection::vec(0.01f64..5.0, 4), s in 0.01f64..100.0, t in 0.01f64..100.0) {
        prop_assume!(a.iter().any(|&v| v > 0.0));
        let base = cosine_similarity(&Attribution::new(a.clone()).unwrap(), &Attribution::new(b.clone()).unwrap()).unwrap();
        let scaled = cosine_similarity(
            &Attribution::new(a.iter().map(|v| v * s).collect()).unwrap(),
            &Attribution::new(b.iter().map(|v| v * t).collect()).unwrap(),
        ).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12);
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&base));
    }
}
