use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ray_primitive_intersect, Hit, SceneSpec};
use crate::cloud::{GroundTruth, SphericalPoint, StructuredCloud};
use crate::error::{Error, Result};
use crate::Vec3;

/// Cast one ray per grid cell and record the nearest hit.
///
/// Ranges carry N(0, σ²) noise drawn from a generator seeded with
/// `scene.seed`, in row-major cell order. Cells without a hit or whose
/// noisy range falls outside the gate are invalid; cells without a hit
/// carry instance 0 in the ground truth.
pub fn simulate_scan(scene: &SceneSpec) -> Result<StructuredCloud> {
    scene.validate()?;
    let lidar = &scene.lidar;
    let (rows, cols) = (lidar.n_beams, lidar.cols());
    let noise = if lidar.noise_sigma > 0.0 {
        Some(Normal::new(0.0, lidar.noise_sigma).map_err(|e| Error::Scene(e.to_string()))?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let phis: Vec<f64> = (0..cols).map(|c| lidar.phi(c)).collect();
    let mut points = Vec::with_capacity(rows * cols);
    let mut gt = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let theta = lidar.theta(row);
        let (st, ct) = theta.sin_cos();
        for &phi in &phis {
            let (sp, cp) = phi.sin_cos();
            let dir = Vec3::new(ct * cp, ct * sp, st);
            let nearest = scene
                .shapes
                .iter()
                .filter_map(|s| ray_primitive_intersect(&lidar.origin, &dir, s))
                .min_by(|a: &Hit, b: &Hit| a.t.total_cmp(&b.t));
            match nearest {
                Some(hit) => {
                    let r = hit.t + noise.map_or(0.0, |n| n.sample(&mut rng));
                    points.push(SphericalPoint::new(theta, phi, r).gated(lidar.r_min, lidar.r_max));
                    gt.push(GroundTruth {
                        class: hit.class,
                        instance: hit.instance,
                    });
                }
                None => {
                    points.push(SphericalPoint::new(theta, phi, 0.0));
                    gt.push(GroundTruth::NONE);
                }
            }
        }
    }
    StructuredCloud::new(rows, cols, points)?.with_ground_truth(gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorAxis {
    /// Reflect across the x axis: y → −y, φ → 2π − φ.
    X,
    /// Reflect across the y axis: x → −x, φ → π − φ.
    Y,
}

/// Mirror a cloud by remapping azimuths and reordering columns so that φ
/// stays ascending. Mirrored azimuths that land on an existing column are
/// snapped to it, so mirroring twice restores the original exactly.
pub fn mirror_cloud(cloud: &StructuredCloud, axis: MirrorAxis) -> StructuredCloud {
    let (rows, cols) = (cloud.rows(), cloud.cols());
    if cloud.is_empty() {
        return cloud.clone();
    }
    let col_phi: Vec<f64> = (0..cols).map(|c| cloud.point(0, c).phi).collect();
    let reflect = |phi: f64| {
        let m = match axis {
            MirrorAxis::X => TAU - phi,
            MirrorAxis::Y => std::f64::consts::PI - phi,
        };
        let m = m.rem_euclid(TAU);
        if m >= TAU - 1e-12 {
            0.0
        } else {
            m
        }
    };
    let snap = |phi: f64| {
        let i = col_phi.partition_point(|&p| p < phi);
        [i.wrapping_sub(1), i, if i == cols { 0 } else { usize::MAX }]
            .into_iter()
            .filter(|&j| j < cols)
            .map(|j| col_phi[j])
            .find(|p| (p - phi).abs() < 1e-9)
            .unwrap_or(phi)
    };
    // mirrored azimuth per source column, then the new column order
    let new_phi: Vec<f64> = col_phi.iter().map(|&p| snap(reflect(p))).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| new_phi[a].total_cmp(&new_phi[b]));

    let mut points = Vec::with_capacity(rows * cols);
    let mut gt = cloud
        .ground_truth()
        .map(|_| Vec::with_capacity(rows * cols));
    for row in 0..rows {
        for &src in &order {
            let p = cloud.point(row, src);
            points.push(SphericalPoint {
                phi: new_phi[src],
                ..*p
            });
            if let (Some(out), Some(g)) = (gt.as_mut(), cloud.ground_truth()) {
                out.push(g[cloud.index(row, src)]);
            }
        }
    }
    match gt {
        Some(g) => StructuredCloud::new(rows, cols, points).and_then(|c| c.with_ground_truth(g)),
        None => StructuredCloud::new(rows, cols, points),
    }
    .expect("mirroring preserves the grid shape")
}
