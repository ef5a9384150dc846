//! Synthetic generators, displacement sampling and CSV ingestion.
//!
//! Every generator draws from ChaCha20 seeded with a 64-bit seed. Independent
//! purposes within one trial (data noise versus pair selection) use separate
//! ChaCha streams of the same seed, see [`rng_stream`].

mod geo;
mod harness;
mod ingest;
mod moons;
mod selection;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Fixed constants of the weekly-snapshot preprocessing.
pub mod geo_constants {
    pub use super::geo::{JITTER_SIGMA, OUTLIER_PERCENTILE};
}

pub use geo::{latlon_to_cartesian, percentile, weekly_snapshots, GeoRecord, SnapshotWindow, WeekKey, WeekPair, WeeklySnapshots};
pub use harness::{synthetic_shift_harness, ShiftHarness, ShiftKind, ShiftSpec};
pub use ingest::{read_geo_csv, read_geo_records, read_id_list, read_numeric_csv, read_numeric_points};
pub use moons::{make_moons, MoonsInstance, MoonsParams};
pub use selection::{select_displacements, Selection};

/// Stream used for instance generation.
pub const DATA_STREAM: u64 = 0;
/// Stream used for picking displacement pairs and their permutation.
pub const SELECTION_STREAM: u64 = 1;
/// Stream used for coordinate jitter.
pub const JITTER_STREAM: u64 = 2;

/// ChaCha20 seeded with `seed`, positioned on `stream`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for repetition `trial` of an experiment.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}
