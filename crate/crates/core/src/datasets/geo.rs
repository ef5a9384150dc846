use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{rng_stream, JITTER_STREAM};
use crate::error::{Error, Result};
use crate::geometry::DisplacementSet;

/// Percentile of candidate displacement lengths above which displacements are dropped.
pub const OUTLIER_PERCENTILE: f64 = 99.0;
/// Standard deviation of the Gaussian jitter added to each Cartesian coordinate.
pub const JITTER_SIGMA: f64 = 1e-4;
/// Relative slack so lengths equal to the cutoff up to roundoff are kept.
const TIE_TOLERANCE: f64 = 1e-9;

/// One position fix of one individual.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRecord {
    pub id: String,
    pub date: NaiveDate,
    pub lat: f64,
    pub lon: f64,
}

impl GeoRecord {
    pub fn new(id: impl Into<String>, date: NaiveDate, lat: f64, lon: f64) -> Result<Self> {
        check_latlon(lat, lon)?;
        Ok(Self { id: id.into(), date, lat, lon })
    }
}

fn check_latlon(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::InvalidInput(format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::InvalidInput(format!("longitude {lon} outside [-180, 180]")));
    }
    Ok(())
}

/// Embeds a position on the unit sphere, so Euclidean distance is chordal distance.
pub fn latlon_to_cartesian(lat: f64, lon: f64) -> Result<[f64; 3]> {
    check_latlon(lat, lon)?;
    let (sp, cp) = lat.to_radians().sin_cos();
    let (sl, cl) = lon.to_radians().sin_cos();
    Ok([cp * cl, cp * sl, sp])
}

/// An ISO-8601 week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeekKey {
    pub year: i32,
    pub week: u32,
}

impl WeekKey {
    pub fn of(date: NaiveDate) -> Self {
        let w = date.iso_week();
        Self { year: w.year(), week: w.week() }
    }

    pub fn next(self) -> Option<Self> {
        let monday = NaiveDate::from_isoywd_opt(self.year, self.week, Weekday::Mon)?;
        Some(Self::of(monday.checked_add_days(Days::new(7))?))
    }
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.year, self.week)
    }
}

/// Inclusive range of ISO weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotWindow {
    pub first: WeekKey,
    pub last: WeekKey,
}

impl SnapshotWindow {
    fn contains(&self, w: WeekKey) -> bool {
        self.first <= w && w <= self.last
    }
}

/// Tracked population displacements between one week and the next.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekPair {
    pub source_week: WeekKey,
    pub target_week: WeekKey,
    pub ids: Vec<String>,
    /// Row `k` is individual `ids[k]` in the source week (unit-sphere coordinates).
    pub sources: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeeklySnapshots {
    pub weeks: Vec<WeekKey>,
    /// Consecutive-week population displacements, guidance individuals excluded.
    pub pairs: Vec<WeekPair>,
    /// All surviving displacements of the guidance individuals, paired uniformly.
    pub guidance: Option<DisplacementSet>,
    /// Chordal-length cutoff applied to candidate displacements.
    pub threshold: f64,
    pub removed_outliers: usize,
}

impl WeeklySnapshots {
    /// All population displacements stacked across week pairs.
    pub fn pooled(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let stack = |f: fn(&WeekPair) -> &DMatrix<f64>| {
            let rows: usize = self.pairs.iter().map(|p| f(p).nrows()).sum();
            let mut m = DMatrix::zeros(rows, 3);
            let mut r = 0;
            for p in &self.pairs {
                let block = f(p);
                m.rows_mut(r, block.nrows()).copy_from(block);
                r += block.nrows();
            }
            m
        };
        (stack(|p| &p.sources), stack(|p| &p.targets))
    }
}

/// Linear-interpolation percentile (`q` in `[0, 100]`) of a nonempty sample.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Lower-middle order statistic.
fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

type WeeklyFixes<'a> = BTreeMap<(WeekKey, &'a str), (Vec<f64>, Vec<f64>)>;

fn chordal(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Weekly median positions per individual and the displacements between
/// consecutive ISO weeks.
///
/// Medians are taken per coordinate over each individual's fixes in a week.
/// Displacements longer than the 99th percentile of all candidate lengths are
/// dropped, then every retained position is jittered by `N(0, 1e-4²)` per
/// Cartesian coordinate. Individuals listed in `guidance_ids` are moved out of
/// the population into the guidance set.
pub fn weekly_snapshots(
    records: &[GeoRecord],
    window: Option<SnapshotWindow>,
    guidance_ids: &[String],
    seed: u64,
) -> Result<WeeklySnapshots> {
    if records.is_empty() {
        return Err(Error::DataFormat("no geo records".into()));
    }
    let in_window = |w: WeekKey| window.is_none_or(|win| win.contains(w));
    let mut fixes: WeeklyFixes = BTreeMap::new();
    for r in records {
        let w = WeekKey::of(r.date);
        if in_window(w) {
            let e = fixes.entry((w, r.id.as_str())).or_default();
            e.0.push(r.lat);
            e.1.push(r.lon);
        }
    }
    if fixes.is_empty() {
        return Err(Error::DataFormat("snapshot window contains no records".into()));
    }
    let mut positions: BTreeMap<(WeekKey, &str), [f64; 3]> = BTreeMap::new();
    for (key, (lats, lons)) in fixes.iter_mut() {
        positions.insert(*key, latlon_to_cartesian(lower_median(lats), lower_median(lons))?);
    }
    let weeks: Vec<WeekKey> = positions.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();

    let mut candidates = Vec::new();
    for (&(w, id), p) in &positions {
        if let Some(next) = w.next() {
            if let Some(q) = positions.get(&(next, id)) {
                candidates.push((w, next, id, chordal(p, q)));
            }
        }
    }
    let threshold = if candidates.is_empty() {
        0.0
    } else {
        percentile(&candidates.iter().map(|c| c.3).collect::<Vec<_>>(), OUTLIER_PERCENTILE)
    };
    let before = candidates.len();
    let cutoff = threshold * (1.0 + TIE_TOLERANCE);
    candidates.retain(|c| c.3 <= cutoff);
    let removed_outliers = before - candidates.len();

    let mut rng = rng_stream(seed, JITTER_STREAM);
    let jittered: BTreeMap<(WeekKey, &str), [f64; 3]> = positions
        .iter()
        .map(|(k, p)| {
            let mut q = *p;
            for v in q.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += JITTER_SIGMA * z;
            }
            (*k, q)
        })
        .collect();

    let is_guide: BTreeSet<&str> = guidance_ids.iter().map(String::as_str).collect();
    let mut by_pair: BTreeMap<(WeekKey, WeekKey), Vec<&str>> = BTreeMap::new();
    let mut guide_src = Vec::new();
    let mut guide_tgt = Vec::new();
    for &(w, next, id, _) in &candidates {
        if is_guide.contains(id) {
            guide_src.extend_from_slice(&jittered[&(w, id)]);
            guide_tgt.extend_from_slice(&jittered[&(next, id)]);
        } else {
            by_pair.entry((w, next)).or_default().push(id);
        }
    }
    let pairs = by_pair
        .into_iter()
        .map(|((sw, tw), ids)| {
            let rows = |week: WeekKey| {
                DMatrix::from_fn(ids.len(), 3, |i, j| jittered[&(week, ids[i])][j])
            };
            WeekPair {
                source_week: sw,
                target_week: tw,
                sources: rows(sw),
                targets: rows(tw),
                ids: ids.iter().map(|s| s.to_string()).collect(),
            }
        })
        .collect();
    let guidance = if guide_src.is_empty() {
        None
    } else {
        let n = guide_src.len() / 3;
        Some(DisplacementSet::paired(
            DMatrix::from_row_slice(n, 3, &guide_src),
            DMatrix::from_row_slice(n, 3, &guide_tgt),
        )?)
    };
    Ok(WeeklySnapshots { weeks, pairs, guidance, threshold, removed_outliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn rec(id: &str, date: NaiveDate, lat: f64, lon: f64) -> GeoRecord {
        GeoRecord::new(id, date, lat, lon).unwrap()
    }

    #[test]
    fn cartesian_examples() {
        let p = latlon_to_cartesian(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(p[0], 1.0);
        let n = latlon_to_cartesian(90.0, 123.0).unwrap();
        assert_abs_diff_eq!(n[2], 1.0);
        assert_abs_diff_eq!(n[0], 0.0, epsilon = 1e-16);
        let q = latlon_to_cartesian(0.0, 90.0).unwrap();
        assert_abs_diff_eq!(chordal(&p, &q), 2f64.sqrt(), epsilon = 1e-15);
        assert!(latlon_to_cartesian(91.0, 0.0).is_err());
        assert!(latlon_to_cartesian(0.0, -181.0).is_err());
    }

    #[test]
    fn iso_weeks_cross_years() {
        let w = WeekKey::of(day(2020, 12, 31));
        assert_eq!(w, WeekKey { year: 2020, week: 53 });
        assert_eq!(w.next().unwrap(), WeekKey { year: 2021, week: 1 });
        assert_eq!(WeekKey::of(day(2021, 1, 3)), w);
    }

    #[test]
    fn single_individual_two_weeks() {
        let recs = [rec("a", day(2021, 3, 1), 10.0, 10.0), rec("a", day(2021, 3, 8), 11.0, 10.0)];
        let s = weekly_snapshots(&recs, None, &[], 0).unwrap();
        assert_eq!(s.pairs.len(), 1);
        assert_eq!(s.pairs[0].sources.nrows(), 1);
        assert_eq!(s.pairs[0].targets.nrows(), 1);
        assert!(s.guidance.is_none());
    }

    #[test]
    fn lower_median_and_order_invariance() {
        let mut recs = vec![
            rec("a", day(2021, 3, 1), 10.0, 0.0),
            rec("a", day(2021, 3, 2), 20.0, 0.0),
            rec("a", day(2021, 3, 8), 0.0, 0.0),
        ];
        let s1 = weekly_snapshots(&recs, None, &[], 4).unwrap();
        let expected = latlon_to_cartesian(10.0, 0.0).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(s1.pairs[0].sources[(0, j)], expected[j], epsilon = 1e-3);
        }
        recs.swap(0, 1);
        assert_eq!(s1, weekly_snapshots(&recs, None, &[], 4).unwrap());
    }

    #[test]
    fn constant_position_survives() {
        let recs: Vec<_> = (0..4).map(|k| rec("a", day(2021, 3, 1) + Days::new(7 * k), 5.0, 5.0)).collect();
        let s = weekly_snapshots(&recs, None, &[], 0).unwrap();
        assert_eq!(s.pairs.len(), 3);
        assert_eq!(s.removed_outliers, 0);
        assert_eq!(s.threshold, 0.0);
    }

    #[test]
    fn percentile_matches_linear_rule() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0), 2.5);
        assert_eq!(percentile(&[5.0], 99.0), 5.0);
    }

    #[test]
    fn guidance_is_split_off() {
        let recs = [
            rec("a", day(2021, 3, 1), 10.0, 10.0),
            rec("a", day(2021, 3, 8), 11.0, 10.0),
            rec("g", day(2021, 3, 1), 10.0, 12.0),
            rec("g", day(2021, 3, 8), 11.0, 12.0),
        ];
        let s = weekly_snapshots(&recs, None, &["g".to_string()], 0).unwrap();
        assert_eq!(s.pairs[0].ids, vec!["a".to_string()]);
        assert_eq!(s.guidance.unwrap().n_sources(), 1);
    }

    #[test]
    fn empty_window_rejected() {
        let recs = [rec("a", day(2021, 3, 1), 10.0, 10.0)];
        let win = SnapshotWindow { first: WeekKey { year: 2022, week: 1 }, last: WeekKey { year: 2022, week: 5 } };
        assert!(weekly_snapshots(&recs, Some(win), &[], 0).is_err());
    }
}
