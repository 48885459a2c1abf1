use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfseg::sim::{
    mirror_cloud, random_scene, ray_primitive_intersect, simulate_scan, LidarSpec, MirrorAxis,
    SceneLayout, SceneSpec,
};
use surfseg::{GroundTruth, Vec3};

fn coarse_lidar() -> LidarSpec {
    LidarSpec {
        n_beams: 16,
        horizontal_step: 2f64.to_radians(),
        noise_sigma: 0.0,
        origin: Vec3::new(0.0, 0.0, 10.0),
        ..LidarSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn each_return_is_the_nearest_surface(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = SceneSpec { shapes: random_scene(&mut rng, &SceneLayout::default()), lidar: coarse_lidar(), seed };
        let cloud = simulate_scan(&scene).unwrap();
        let gt = cloud.ground_truth().unwrap();
        let lidar = &scene.lidar;
        prop_assert_eq!((cloud.rows(), cloud.cols()), (16, 180));
        for row in 0..cloud.rows() {
            for col in 0..cloud.cols() {
                let idx = cloud.index(row, col);
                let p = cloud.point(row, col);
                prop_assert!((p.theta - lidar.theta(row)).abs() < 1e-12);
                prop_assert!((p.phi - lidar.phi(col)).abs() < 1e-12);
                let dir = Vec3::new(p.theta.cos() * p.phi.cos(), p.theta.cos() * p.phi.sin(), p.theta.sin());
                let nearest = scene
                    .shapes
                    .iter()
                    .filter_map(|s| ray_primitive_intersect(&lidar.origin, &dir, s).map(|h| (h, s)))
                    .min_by(|a, b| a.0.t.total_cmp(&b.0.t));
                match nearest {
                    Some((h, s)) if h.t >= lidar.r_min && h.t <= lidar.r_max => {
                        prop_assert!(p.valid);
                        prop_assert!((p.r - h.t).abs() < 1e-9);
                        prop_assert_eq!(gt[idx].instance, s.instance);
                        prop_assert_eq!(gt[idx].class, s.kind());
                        let hit = lidar.origin + dir * h.t;
                        prop_assert!(s.implicit(&hit).abs() < 1e-6);
                    }
                    _ => {
                        prop_assert!(!p.valid);
                        prop_assert_eq!(gt[idx], GroundTruth::NONE);
                    }
                }
            }
        }
    }

    #[test]
    fn mirroring_keeps_the_label_multiset(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = SceneSpec { shapes: random_scene(&mut rng, &SceneLayout::default()), lidar: coarse_lidar(), seed };
        let cloud = simulate_scan(&scene).unwrap();
        for axis in [MirrorAxis::X, MirrorAxis::Y] {
            let m = mirror_cloud(&cloud, axis);
            prop_assert_eq!(m.valid_count(), cloud.valid_count());
            let key = |c: &surfseg::StructuredCloud| {
                let mut v: Vec<(u8, u32)> = c.ground_truth().unwrap().iter().map(|g| (g.class.code(), g.instance)).collect();
                v.sort();
                v
            };
            prop_assert_eq!(key(&m), key(&cloud));
            for w in m.points()[..m.cols()].windows(2) {
                prop_assert!(w[0].phi < w[1].phi);
            }
        }
    }
}
