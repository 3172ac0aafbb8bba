//! Keyed random streams.
//!
//! Every cell owns a ChaCha8 stream selected by `(chip, row, col)` under the
//! master seed, so a cell's draws do not depend on which thread evaluates it
//! or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const CHIP_SCALE_TAG: u64 = 1 << 63;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The two standard-normal draws of one cell: threshold mismatch and floor jitter.
pub fn cell_normals(seed: u64, chip: u32, row: u32, col: u32) -> (f64, f64) {
    debug_assert!(row < 1 << 16 && col < 1 << 16);
    let id = (u64::from(chip) << 32) | (u64::from(row) << 16) | u64::from(col);
    let mut rng = stream(seed, id);
    (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
}

/// Standard-normal draw for a chip's global leakage scale.
pub fn chip_normal(seed: u64, chip: u32) -> f64 {
    let mut rng = stream(seed, CHIP_SCALE_TAG | u64::from(chip));
    StandardNormal.sample(&mut rng)
}
