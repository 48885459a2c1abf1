//! Synthetic spinning-Lidar scans of parametric scenes.
//!
//! A scene holds an optional infinite ground plane and finite primitives
//! (rectangles, spheres, open cylinders, open cones). Each grid cell casts
//! one ray from the sensor origin; the nearest hit gives range and ground
//! truth, and zero-mean Gaussian noise is added to the range.

mod dataset;
mod intersect;
mod scan;
mod scene_file;

pub use dataset::{
    generate_dataset, plan_dataset, random_scene, DatasetConfig, DatasetItem, Manifest,
    ManifestEntry, Mirror, SceneLayout, Split,
};
pub use intersect::{ray_primitive_intersect, Hit};
pub use scan::{mirror_cloud, simulate_scan, MirrorAxis};
pub use scene_file::{load_scene, read_scene, save_scene, write_scene};

use std::collections::HashSet;

use nalgebra::Rotation3;

use crate::cloud::{SemanticClass, DEFAULT_R_MAX, DEFAULT_R_MIN};
use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Horizontal square of half side `half_size` centred on the shape
    /// position; unbounded when `half_size` is infinite.
    Ground {
        half_size: f64,
    },
    /// Rectangle in the local xy plane.
    Plane {
        half_x: f64,
        half_y: f64,
    },
    Sphere {
        radius: f64,
    },
    /// Open tube along local z, centred on the position.
    Cylinder {
        radius: f64,
        height: f64,
    },
    /// Open right cone along local z: base circle at the position, apex `height` above.
    Cone {
        radius: f64,
        height: f64,
    },
}

impl Geometry {
    pub fn kind(&self) -> SemanticClass {
        match self {
            Geometry::Ground { .. } => SemanticClass::GroundPlane,
            Geometry::Plane { .. } => SemanticClass::Plane,
            Geometry::Sphere { .. } => SemanticClass::Sphere,
            Geometry::Cylinder { .. } => SemanticClass::Cylinder,
            Geometry::Cone { .. } => SemanticClass::Cone,
        }
    }

    fn sizes(&self) -> Vec<f64> {
        match *self {
            Geometry::Ground { half_size } => vec![half_size],
            Geometry::Plane { half_x, half_y } => vec![half_x, half_y],
            Geometry::Sphere { radius } => vec![radius],
            Geometry::Cylinder { radius, height } | Geometry::Cone { radius, height } => {
                vec![radius, height]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub instance: u32,
    pub position: Vec3,
    /// Roll, pitch, yaw in radians.
    pub orientation: [f64; 3],
    pub geometry: Geometry,
    rotation: Rotation3<f64>,
}

impl ShapeSpec {
    pub fn new(instance: u32, position: Vec3, orientation: [f64; 3], geometry: Geometry) -> Self {
        let [roll, pitch, yaw] = orientation;
        ShapeSpec {
            instance,
            position,
            orientation,
            geometry,
            rotation: Rotation3::from_euler_angles(roll, pitch, yaw),
        }
    }

    /// Unbounded ground plane at height `z`.
    pub fn ground(instance: u32, z: f64) -> Self {
        Self::new(
            instance,
            Vec3::new(0.0, 0.0, z),
            [0.0; 3],
            Geometry::Ground {
                half_size: f64::INFINITY,
            },
        )
    }

    pub fn kind(&self) -> SemanticClass {
        self.geometry.kind()
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    /// World point expressed in the shape's local frame.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(p - self.position))
    }

    /// Signed residual of the implicit surface equation at world point `p`;
    /// zero on the surface (ignoring the finite extents).
    pub fn implicit(&self, p: &Vec3) -> f64 {
        let l = self.to_local(p);
        match self.geometry {
            Geometry::Ground { .. } => p.z - self.position.z,
            Geometry::Plane { .. } => l.z,
            Geometry::Sphere { radius } => l.norm() - radius,
            Geometry::Cylinder { radius, .. } => l.xy().norm() - radius,
            Geometry::Cone { radius, height } => l.xy().norm() - radius * (height - l.z) / height,
        }
    }

    /// Outward unit normal of the surface at `p` (assumed on the surface).
    pub fn surface_normal(&self, p: &Vec3) -> Vec3 {
        let l = self.to_local(p);
        let local = match self.geometry {
            Geometry::Ground { .. } => return Vec3::z(),
            Geometry::Plane { .. } => Vec3::z(),
            Geometry::Sphere { .. } => l,
            Geometry::Cylinder { .. } => Vec3::new(l.x, l.y, 0.0),
            Geometry::Cone { radius, height } => {
                let rho = l.xy().norm();
                Vec3::new(l.x / rho, l.y / rho, radius / height)
            }
        };
        (self.rotation * local).normalize()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarSpec {
    pub n_beams: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub horizontal_step: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub noise_sigma: f64,
    pub origin: Vec3,
}

impl Default for LidarSpec {
    /// 32 beams over [-30.67°, +10.67°], 0.2° horizontal step, σ = 0.1 m.
    fn default() -> Self {
        LidarSpec {
            n_beams: 32,
            theta_min: (-30.67f64).to_radians(),
            theta_max: 10.67f64.to_radians(),
            horizontal_step: 0.2f64.to_radians(),
            r_min: DEFAULT_R_MIN,
            r_max: DEFAULT_R_MAX,
            noise_sigma: 0.1,
            origin: Vec3::zeros(),
        }
    }
}

impl LidarSpec {
    /// Shots per spin.
    pub fn cols(&self) -> usize {
        (std::f64::consts::TAU / self.horizontal_step).round() as usize
    }

    /// Elevation of `row`, top beam first.
    pub fn theta(&self, row: usize) -> f64 {
        self.theta_max - row as f64 * (self.theta_max - self.theta_min) / (self.n_beams - 1) as f64
    }

    pub fn phi(&self, col: usize) -> f64 {
        col as f64 * std::f64::consts::TAU / self.cols() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self.n_beams < 2 {
            return Err(Error::Scene("at least two beams are required".into()));
        }
        if !(self.theta_min < self.theta_max
            && self.theta_min > -half_pi
            && self.theta_max < half_pi)
        {
            return Err(Error::Scene(
                "vertical field of view must be inside (-90°, 90°)".into(),
            ));
        }
        if !(self.horizontal_step > 0.0) || self.cols() == 0 {
            return Err(Error::Scene("horizontal step must be positive".into()));
        }
        let err = (self.cols() as f64 * self.horizontal_step - std::f64::consts::TAU).abs();
        if err > self.horizontal_step {
            return Err(Error::Scene(
                "horizontal step does not divide the spin".into(),
            ));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::Scene("range gate needs 0 < r_min < r_max".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Scene("noise sigma must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub shapes: Vec<ShapeSpec>,
    pub lidar: LidarSpec,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.lidar.validate()?;
        let mut ids = HashSet::new();
        let mut grounds = 0;
        for s in &self.shapes {
            if s.instance == 0 {
                return Err(Error::Scene(
                    "instance id 0 is reserved for empty cells".into(),
                ));
            }
            if !ids.insert(s.instance) {
                return Err(Error::Scene(format!(
                    "duplicate instance id {}",
                    s.instance
                )));
            }
            let unbounded_ok = |i: usize, v: f64| {
                i == 0 && matches!(s.geometry, Geometry::Ground { .. }) && v == f64::INFINITY
            };
            if s.geometry
                .sizes()
                .iter()
                .enumerate()
                .any(|(i, v)| !(*v > 0.0 && (v.is_finite() || unbounded_ok(i, *v))))
            {
                return Err(Error::Scene(format!(
                    "shape {} has non-positive size",
                    s.instance
                )));
            }
            if !(s
                .position
                .iter()
                .chain(&s.orientation)
                .all(|v| v.is_finite()))
            {
                return Err(Error::Scene(format!(
                    "shape {} has a non-finite pose",
                    s.instance
                )));
            }
            if matches!(s.geometry, Geometry::Ground { .. }) {
                grounds += 1;
            }
        }
        if grounds > 1 {
            return Err(Error::Scene("at most one ground plane per scene".into()));
        }
        Ok(())
    }
}
