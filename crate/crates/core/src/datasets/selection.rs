use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::{rng_stream, SELECTION_STREAM};
use crate::error::{Error, Result};
use crate::geometry::DisplacementSet;

/// Ground-truth pairs drawn as guidance, and what is left over.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Row indices of the drawn pairs, in draw order.
    pub selected: Vec<usize>,
    /// `pairing[i] = j` links drawn source `i` to drawn target `j`; identity unless permuted.
    pub pairing: Vec<usize>,
    /// Row indices not drawn, in increasing order.
    pub remaining_indices: Vec<usize>,
    pub remaining_sources: DMatrix<f64>,
    pub remaining_targets: DMatrix<f64>,
    sources: DMatrix<f64>,
    targets: DMatrix<f64>,
    seed: u64,
    permuted: bool,
}

/// Streams above this offset give each prefix length of a permuted selection its own shuffle.
const PREFIX_STREAM_OFFSET: u64 = 16;

fn take_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

impl Selection {
    /// Guidance from the first `k` drawn pairs, with uniform mass on each pair.
    ///
    /// For a permuted selection, the full prefix uses [`Selection::pairing`] and
    /// shorter prefixes draw an independent uniform permutation of their own targets.
    pub fn prefix(&self, k: usize) -> Result<DisplacementSet> {
        if k == 0 || k > self.selected.len() {
            return Err(Error::InvalidInput(format!(
                "prefix of {k} pairs requested from {} drawn",
                self.selected.len()
            )));
        }
        let src: Vec<usize> = self.selected[..k].to_vec();
        let tgt: Vec<usize> = if k == self.selected.len() {
            self.pairing.iter().map(|&j| self.selected[j]).collect()
        } else if self.permuted {
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng_stream(self.seed, PREFIX_STREAM_OFFSET + k as u64));
            order.iter().map(|&j| self.selected[j]).collect()
        } else {
            src.clone()
        };
        DisplacementSet::paired(take_rows(&self.sources, &src), take_rows(&self.targets, &tgt))
    }

    /// All drawn pairs as guidance.
    pub fn displacements(&self) -> Result<DisplacementSet> {
        self.prefix(self.selected.len())
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Draws `count` ground-truth pairs uniformly without replacement from row-paired
/// clouds and removes them from both. With `permute`, the drawn targets are
/// reassigned to the drawn sources by a uniform random permutation.
pub fn select_displacements(
    sources: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    count: usize,
    seed: u64,
    permute: bool,
) -> Result<Selection> {
    if sources.shape() != targets.shape() {
        return Err(Error::DimensionMismatch(format!(
            "paired clouds have shapes {:?} and {:?}",
            sources.shape(),
            targets.shape()
        )));
    }
    let n = sources.nrows();
    if count == 0 || count > n {
        return Err(Error::InvalidInput(format!("cannot draw {count} pairs from {n}")));
    }
    let mut rng = rng_stream(seed, SELECTION_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let selected = order[..count].to_vec();
    let mut pairing: Vec<usize> = (0..count).collect();
    if permute {
        pairing.shuffle(&mut rng);
    }
    let mut remaining_indices = order[count..].to_vec();
    remaining_indices.sort_unstable();
    Ok(Selection {
        remaining_sources: take_rows(sources, &remaining_indices),
        remaining_targets: take_rows(targets, &remaining_indices),
        selected,
        pairing,
        remaining_indices,
        sources: sources.clone(),
        targets: targets.clone(),
        seed,
        permuted: permute,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compute_second_moment;

    fn data(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let x = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        let y = x.map(|v| v + 0.5);
        (x, y)
    }

    #[test]
    fn full_draw_leaves_nothing() {
        let (x, y) = data(5);
        let s = select_displacements(&x, &y, 5, 0, false).unwrap();
        assert_eq!(s.remaining_sources.nrows(), 0);
        let d = s.displacements().unwrap();
        assert_eq!(d.n_sources(), 5);
        assert!(d.is_paired_uniform());
    }

    #[test]
    fn single_pair_has_rank_one_moment() {
        let (x, y) = data(6);
        let d = select_displacements(&x, &y, 1, 3, false).unwrap().displacements().unwrap();
        let (vals, _) = compute_second_moment(&d).unwrap().eigen();
        assert!(vals[0].abs() < 1e-12);
    }

    #[test]
    fn draws_and_remainder_partition() {
        let (x, y) = data(10);
        let s = select_displacements(&x, &y, 4, 8, false).unwrap();
        let mut all: Vec<usize> = s.selected.iter().chain(&s.remaining_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for (r, &i) in s.remaining_indices.iter().enumerate() {
            assert_eq!(s.remaining_sources.row(r), x.row(i));
            assert_eq!(s.remaining_targets.row(r), y.row(i));
        }
    }

    #[test]
    fn invalid_counts() {
        let (x, y) = data(3);
        assert!(select_displacements(&x, &y, 0, 0, false).is_err());
        assert!(select_displacements(&x, &y, 4, 0, false).is_err());
    }

    #[test]
    fn permuted_pairing_is_uniform_over_seeds() {
        let (x, y) = data(8);
        let swaps = (0..1000u64)
            .filter(|&seed| select_displacements(&x, &y, 2, seed, true).unwrap().pairing == vec![1, 0])
            .count();
        assert!((450..=550).contains(&swaps), "{swaps} swaps out of 1000");
    }

    #[test]
    fn prefixes_nest() {
        let (x, y) = data(12);
        let s = select_displacements(&x, &y, 6, 2, false).unwrap();
        let p3 = s.prefix(3).unwrap();
        let p6 = s.prefix(6).unwrap();
        assert_eq!(p3.sources().rows(0, 3), p6.sources().rows(0, 3));
        assert!(s.prefix(7).is_err());
    }

    #[test]
    fn permuted_prefixes_pair_drawn_points() {
        let (x, y) = data(12);
        let s = select_displacements(&x, &y, 6, 2, true).unwrap();
        let p = s.prefix(4).unwrap();
        let mut got: Vec<f64> = p.targets().column(0).iter().copied().collect();
        let mut want: Vec<f64> = s.selected[..4].iter().map(|&i| y[(i, 0)]).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        assert_eq!(got, want);
    }
}
