use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{rng_stream, DATA_STREAM};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoonsParams {
    pub rotation_deg: f64,
    pub n_per_moon: usize,
    pub noise: f64,
    pub n_test: usize,
    pub seed: u64,
}

impl MoonsParams {
    pub fn new(rotation_deg: f64, seed: u64) -> Self {
        Self { rotation_deg, n_per_moon: 150, noise: 0.05, n_test: 1000, seed }
    }
}

/// Two interleaved half circles and their rotated copy.
///
/// Row `k` of `target` is row `k` of `source` rotated, so the identity coupling is
/// the ground truth. Class 0 is the outer moon, class 1 the inner one.
#[derive(Debug, Clone, PartialEq)]
pub struct MoonsInstance {
    pub source: PointCloud,
    pub source_labels: Vec<usize>,
    pub target: PointCloud,
    pub target_labels: Vec<usize>,
    pub test: PointCloud,
    pub test_labels: Vec<usize>,
    pub rotation_deg: f64,
    pub seed: u64,
}

fn linspace_pi(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { 0.0 } else { PI * i as f64 / (n - 1) as f64 })
}

/// Noisy, centered moons with `n_outer` and `n_inner` points.
fn noisy_moons<R: Rng>(n_outer: usize, n_inner: usize, noise: f64, rng: &mut R) -> (DMatrix<f64>, Vec<usize>) {
    let mut rows: Vec<[f64; 2]> = linspace_pi(n_outer).map(|t| [t.cos(), t.sin()]).collect();
    rows.extend(linspace_pi(n_inner).map(|t| [1.0 - t.cos(), 0.5 - t.sin()]));
    let mut labels = vec![0; n_outer];
    labels.extend(std::iter::repeat_n(1, n_inner));
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += noise * z;
        }
        row[0] -= 0.5;
    }
    (DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]), labels)
}

/// Right-multiplies each row by `[[cos θ, −sin θ], [sin θ, cos θ]]` with `θ = −rotation`.
fn rotate_rows(x: &DMatrix<f64>, rotation_deg: f64) -> DMatrix<f64> {
    let th = (-rotation_deg).to_radians();
    let (s, c) = th.sin_cos();
    let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    x * r
}

pub fn make_moons(params: &MoonsParams) -> Result<MoonsInstance> {
    let MoonsParams { rotation_deg, n_per_moon, noise, n_test, seed } = *params;
    if !(0.0..=180.0).contains(&rotation_deg) {
        return Err(Error::InvalidInput(format!("rotation must lie in [0, 180], got {rotation_deg}")));
    }
    if n_per_moon == 0 {
        return Err(Error::InvalidInput("n_per_moon must be at least 1".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidInput(format!("noise must be nonnegative, got {noise}")));
    }
    if n_test < 2 {
        return Err(Error::InvalidInput("n_test must be at least 2".into()));
    }
    let mut rng = rng_stream(seed, DATA_STREAM);
    let (xs, labels) = noisy_moons(n_per_moon, n_per_moon, noise, &mut rng);
    let xt = rotate_rows(&xs, rotation_deg);
    let (test, test_labels) = noisy_moons(n_test - n_test / 2, n_test / 2, noise, &mut rng);
    Ok(MoonsInstance {
        source: PointCloud::uniform(xs)?,
        source_labels: labels.clone(),
        target: PointCloud::uniform(xt)?,
        target_labels: labels,
        test: PointCloud::uniform(rotate_rows(&test, rotation_deg))?,
        test_labels,
        rotation_deg,
        seed,
    })
}
