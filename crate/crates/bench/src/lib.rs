//! Input builders shared by the criterion benchmarks: synthetic scenes,
//! baseline predictions, and random feature grids, all seeded.

use pairhold_core::{
    generate_fixture, ohfb_associate, FeatureGrid, FixtureConfig, ImageRecord, OhfbConfig,
    PairPrediction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic scenes at the default frame size and scene mix.
pub fn benchmark_records(num_images: usize, seed: u64) -> Vec<ImageRecord> {
    let cfg = FixtureConfig { num_images, ..FixtureConfig::default() };
    generate_fixture(&cfg, seed).expect("default fixture config is valid")
}

/// Overlap-baseline predictions for every record, in record order.
pub fn overlap_predictions(records: &[ImageRecord]) -> Vec<PairPrediction> {
    let cfg = OhfbConfig::default();
    records
        .iter()
        .flat_map(|r| ohfb_associate(r, &cfg).expect("default config is valid"))
        .collect()
}

/// A dense grid of uniform values in [-1, 1).
pub fn benchmark_grid(height: usize, width: usize, channels: usize, seed: u64) -> FeatureGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..height * width * channels)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    FeatureGrid::new(height, width, channels, values).expect("dimensions match value count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builders_produce_usable_inputs() {
        let records = benchmark_records(5, 3);
        assert_eq!(records.len(), 5);
        assert!(!overlap_predictions(&records).is_empty());
        let grid = benchmark_grid(4, 6, 3, 1);
        assert_eq!(grid.values().len(), 4 * 6 * 3);
    }
}
