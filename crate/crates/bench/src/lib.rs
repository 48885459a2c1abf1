//! Inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfseg::sim::{random_scene, simulate_scan, DatasetConfig, LidarSpec, SceneSpec};
use surfseg::{StructuredCloud, Vec3};

/// A full-resolution 32×1800 scan of a random scene, taken from the
/// dataset's sensor height.
pub fn sample_cloud(seed: u64) -> StructuredCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = SceneSpec {
        shapes: random_scene(&mut rng, &Default::default()),
        lidar: LidarSpec {
            origin: Vec3::new(0.0, 0.0, DatasetConfig::default().sensor_height),
            ..LidarSpec::default()
        },
        seed,
    };
    simulate_scan(&scene).expect("generated scenes are valid")
}
