use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{rng_stream, DATA_STREAM};
use crate::error::{Error, Result};

const MIXTURE_COMPONENTS: usize = 3;
const MIXTURE_SPREAD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    /// Move every point along one random unit direction.
    Translation,
    /// Rotate about the origin in the plane of the first two features.
    Rotation,
    /// Random linear distortion plus a translation.
    Affine,
}

impl ShiftKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShiftKind::Translation => "translation",
            ShiftKind::Rotation => "rotation",
            ShiftKind::Affine => "affine",
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(ShiftKind::Translation),
            "rotation" => Ok(ShiftKind::Rotation),
            "affine" => Ok(ShiftKind::Affine),
            other => Err(Error::InvalidInput(format!("unknown shift kind '{other}'"))),
        }
    }
}

/// Parameters of a synthetic paired shift.
///
/// `spread` scales each sample's shift by `1 + spread·sₖ` with `sₖ ~ N(0, 1)`, so
/// samples travel at different speeds along the shift. For rotations `magnitude`
/// is the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpec {
    pub n: usize,
    pub dim: usize,
    pub kind: ShiftKind,
    pub magnitude: f64,
    pub noise: f64,
    pub spread: f64,
    pub seed: u64,
}

/// Row-paired clouds with the identity as ground-truth coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftHarness {
    pub sources: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    /// Unit direction of the translation component (zero for pure rotations).
    pub direction: DVector<f64>,
    /// Linear part applied before translation (identity for translations).
    pub linear: DMatrix<f64>,
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn synthetic_shift_harness(spec: &ShiftSpec) -> Result<ShiftHarness> {
    let ShiftSpec { n, dim: d, kind, magnitude, noise, spread, seed } = *spec;
    if n < 2 || d == 0 {
        return Err(Error::InvalidInput(format!("harness needs n >= 2 and d >= 1, got n={n}, d={d}")));
    }
    if kind == ShiftKind::Rotation && d < 2 {
        return Err(Error::InvalidInput("rotation shift needs at least two features".into()));
    }
    for (name, v) in [("magnitude", magnitude), ("noise", noise), ("spread", spread)] {
        if !v.is_finite() || (name != "magnitude" && v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid {name}: {v}")));
        }
    }
    let mut rng = rng_stream(seed, DATA_STREAM);
    let means: Vec<DVector<f64>> =
        (0..MIXTURE_COMPONENTS).map(|_| gaussian_vec(&mut rng, d) * MIXTURE_SPREAD).collect();
    let mut sources = DMatrix::zeros(n, d);
    for k in 0..n {
        let c = rng.random_range(0..MIXTURE_COMPONENTS);
        let p = &means[c] + gaussian_vec(&mut rng, d);
        sources.row_mut(k).copy_from(&p.transpose());
    }
    let mut direction = gaussian_vec(&mut rng, d);
    direction /= direction.norm();
    let speeds: Vec<f64> = (0..n).map(|_| 1.0 + spread * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut linear = DMatrix::identity(d, d);
    let mut targets = DMatrix::zeros(n, d);
    match kind {
        ShiftKind::Translation => {
            for (k, speed) in speeds.iter().enumerate() {
                let y = sources.row(k) + direction.transpose() * (magnitude * speed);
                targets.row_mut(k).copy_from(&y);
            }
        }
        ShiftKind::Rotation => {
            direction.fill(0.0);
            for (k, speed) in speeds.iter().enumerate() {
                let (s, c) = (magnitude * speed).sin_cos();
                let mut y = sources.row(k).into_owned();
                let (a, b) = (y[0], y[1]);
                y[0] = c * a - s * b;
                y[1] = s * a + c * b;
                targets.row_mut(k).copy_from(&y);
            }
            let (s, c) = magnitude.sin_cos();
            linear[(0, 0)] = c;
            linear[(0, 1)] = -s;
            linear[(1, 0)] = s;
            linear[(1, 1)] = c;
        }
        ShiftKind::Affine => {
            let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal)) / (d as f64).sqrt();
            linear += g * magnitude;
            for (k, speed) in speeds.iter().enumerate() {
                let x = sources.row(k).transpose();
                let y = &linear * x + &direction * (magnitude * speed);
                targets.row_mut(k).copy_from(&y.transpose());
            }
        }
    }
    for v in targets.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += noise * z;
    }
    Ok(ShiftHarness { sources, targets, direction, linear })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(kind: ShiftKind, magnitude: f64, noise: f64) -> ShiftSpec {
        ShiftSpec { n: 40, dim: 3, kind, magnitude, noise, spread: 0.0, seed: 5 }
    }

    #[test]
    fn zero_shift_is_identity() {
        for kind in [ShiftKind::Translation, ShiftKind::Rotation, ShiftKind::Affine] {
            let h = synthetic_shift_harness(&spec(kind, 0.0, 0.0)).unwrap();
            assert_eq!(h.sources, h.targets);
        }
    }

    #[test]
    fn translation_moves_along_direction() {
        let h = synthetic_shift_harness(&spec(ShiftKind::Translation, 2.0, 0.0)).unwrap();
        for k in 0..40 {
            let diff = (h.targets.row(k) - h.sources.row(k)).transpose();
            assert_abs_diff_eq!(diff, &h.direction * 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_keeps_other_features() {
        let h = synthetic_shift_harness(&spec(ShiftKind::Rotation, 0.7, 0.0)).unwrap();
        assert_eq!(h.sources.column(2), h.targets.column(2));
        assert!(synthetic_shift_harness(&ShiftSpec { dim: 1, ..spec(ShiftKind::Rotation, 0.7, 0.0) }).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("affine".parse::<ShiftKind>().unwrap(), ShiftKind::Affine);
        assert!("shear".parse::<ShiftKind>().is_err());
    }

    #[test]
    fn rejects_tiny_inputs() {
        assert!(synthetic_shift_harness(&ShiftSpec { n: 1, ..spec(ShiftKind::Translation, 1.0, 0.0) }).is_err());
        assert!(synthetic_shift_harness(&ShiftSpec { dim: 0, ..spec(ShiftKind::Translation, 1.0, 0.0) }).is_err());
    }
}
