use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use proptest::prelude::*;
use reshape_ot::datasets::{
    latlon_to_cartesian, make_moons, synthetic_shift_harness, weekly_snapshots, GeoRecord, MoonsParams, ShiftKind,
    ShiftSpec,
};
use reshape_ot::evaluation::ground_truth_attribution;
use reshape_ot::geometry::{compute_second_moment, cost_matrix, DisplacementSet, GroundMetric};
use reshape_ot::mapping::{transport_labels, BarycentricMap};
use reshape_ot::solvers::{solve_pipeline, SolverChoice};

#[test]
fn moons_transport_moves_class_means_with_rotation() {
    let m = make_moons(&MoonsParams::new(40.0, 2)).unwrap();
    let out = solve_pipeline(&m.source, &m.target, &GroundMetric::Euclidean, SolverChoice::Exact).unwrap();
    let map = BarycentricMap::new(out.coupling, m.target.points().clone()).unwrap();
    let moved = transport_labels(&map, &m.source_labels).unwrap();
    let th = (-40.0f64).to_radians();
    let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
    for class in 0..2 {
        let idx: Vec<usize> = (0..moved.len()).filter(|&k| moved.labels[k] == class).collect();
        let mean = |pts: &DMatrix<f64>| {
            let mut s = [0.0; 2];
            for &k in &idx {
                s[0] += pts[(k, 0)];
                s[1] += pts[(k, 1)];
            }
            DMatrix::from_row_slice(1, 2, &[s[0] / idx.len() as f64, s[1] / idx.len() as f64])
        };
        let src = mean(m.source.points());
        let expected = &src * &rot - &src;
        let actual = mean(&moved.points) - &src;
        let cos = expected.dot(&actual) / (expected.norm() * actual.norm());
        assert!(cos > 0.0, "class {class}: cosine {cos}");
    }
}

#[test]
fn single_class_labels_survive_transport() {
    let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
    let src = reshape_ot::PointCloud::uniform(x.clone()).unwrap();
    let tgt = reshape_ot::PointCloud::uniform(x.map(|v| v + 5.0)).unwrap();
    let out = solve_pipeline(&src, &tgt, &GroundMetric::Euclidean, SolverChoice::Exact).unwrap();
    let map = BarycentricMap::new(out.coupling, tgt.points().clone()).unwrap();
    assert_eq!(transport_labels(&map, &[4, 4, 4]).unwrap().labels, vec![4, 4, 4]);
}

#[test]
fn planar_rotation_has_two_displacement_directions() {
    let h = synthetic_shift_harness(&ShiftSpec {
        n: 50,
        dim: 2,
        kind: ShiftKind::Rotation,
        magnitude: 0.6,
        noise: 0.0,
        spread: 0.0,
        seed: 3,
    })
    .unwrap();
    let d = DisplacementSet::paired(h.sources, h.targets).unwrap();
    let s = compute_second_moment(&d).unwrap();
    let (vals, _) = s.eigen();
    assert!(vals[0] > 1e-6 * s.trace, "eigenvalues {vals:?}");
}

#[test]
fn translation_attribution_is_squared_vector() {
    let h = synthetic_shift_harness(&ShiftSpec {
        n: 30,
        dim: 4,
        kind: ShiftKind::Translation,
        magnitude: 1.5,
        noise: 0.0,
        spread: 0.0,
        seed: 8,
    })
    .unwrap();
    let r = ground_truth_attribution(&h.sources, &h.targets).unwrap();
    for (i, v) in r.values().iter().enumerate() {
        assert!((v - (1.5 * h.direction[i]).powi(2)).abs() <= 1e-12);
    }
}

#[test]
fn chordal_is_shorter_than_great_circle() {
    let a = latlon_to_cartesian(0.0, 0.0).unwrap();
    let b = latlon_to_cartesian(0.0, 90.0).unwrap();
    let chord = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!((chord - 2f64.sqrt()).abs() <= 1e-15);
    assert!(chord < std::f64::consts::FRAC_PI_2);
}

#[test]
fn single_outlier_jump_is_filtered() {
    // One step of 0.01° latitude per week for 200 individuals, one of which jumps 10× as far.
    let start = NaiveDate::from_ymd_opt(2021, 5, 3).unwrap();
    let next = start.checked_add_days(Days::new(7)).unwrap();
    let mut recs = Vec::new();
    for k in 0..201 {
        let id = format!("b{k}");
        let lon = -100.0 + k as f64 * 0.5;
        let step = if k == 200 { 0.1 } else { 0.01 };
        recs.push(GeoRecord::new(id.clone(), start, 40.0, lon).unwrap());
        recs.push(GeoRecord::new(id, next, 40.0 + step, lon).unwrap());
    }
    let s = weekly_snapshots(&recs, None, &[], 1).unwrap();
    assert_eq!(s.removed_outliers, 1);
    assert_eq!(s.pairs[0].ids.len(), 200);
    assert!(!s.pairs[0].ids.contains(&"b200".to_string()));
    let unit = 0.01f64.to_radians();
    assert!(s.threshold < 2.0 * unit);
}

#[test]
fn euclidean_cost_matches_squared_distances() {
    let m = make_moons(&MoonsParams::new(20.0, 0)).unwrap();
    let c = cost_matrix(&GroundMetric::Euclidean, &m.source, &m.target).unwrap();
    let p = m.source.points();
    let q = m.target.points();
    for &(i, j) in &[(0, 0), (3, 200), (299, 17)] {
        let d2 = (p.row(i) - q.row(j)).norm_squared();
        assert!((c[(i, j)] - d2).abs() <= 1e-14);
    }
}

proptest! {
    #[test]
    fn sphere_embedding_has_unit_norm(lat in -90.0f64..=90.0, lon in -180.0f64..=180.0) {
        let p = latlon_to_cartesian(lat, lon).unwrap();
        prop_assert!((p.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn moons_are_bitwise_reproducible(seed in any::<u64>(), rotation in 0.0f64..=180.0) {
        let p = MoonsParams { n_per_moon: 20, n_test: 40, ..MoonsParams::new(rotation, seed) };
        prop_assert_eq!(make_moons(&p).unwrap(), make_moons(&p).unwrap());
    }
}
