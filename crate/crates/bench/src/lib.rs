//! Shared builders for the benchmark targets.

use hml_core::features::{FeatureSequence, FEATURE_DIM};
use hml_core::motion::{PoseFrame, PoseSequence};
use hml_core::seeds;
use rand::Rng;

pub fn random_features(seed: u64, t_len: usize) -> FeatureSequence {
    let mut rng = seeds::rng(seed);
    FeatureSequence::new(
        (0..t_len)
            .map(|_| (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

pub fn random_poses(seed: u64, t_len: usize) -> PoseSequence {
    let mut rng = seeds::rng(seed);
    PoseSequence::new(
        (0..t_len)
            .map(|_| {
                PoseFrame::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect(),
    )
    .unwrap()
}
