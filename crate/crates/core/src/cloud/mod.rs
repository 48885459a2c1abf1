//! Structured spherical point clouds as produced by one spin of the sensor.
//!
//! Points live on a `rows × cols` grid: a row is one laser of the vertical
//! array (row 0 is the topmost laser), a column is one horizontal shot.
//! Cartesian coordinates use a sensor-centred frame with `z` along the spin
//! axis:
//!
//! ```text
//! x = r·cosθ·cosφ,  y = r·cosθ·sinφ,  z = r·sinθ
//! ```

mod io;
mod ply;

use std::fmt;

pub use io::{load_cloud, read_cloud, save_cloud, write_cloud};
pub use ply::{export_ply, write_ply};

use crate::error::{Error, Result};

pub type CartesianPoint = nalgebra::Point3<f64>;

/// Default lower range gate in metres.
pub const DEFAULT_R_MIN: f64 = 0.9;
/// Default upper range gate in metres.
pub const DEFAULT_R_MAX: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    /// Vertical angle of the laser from the plane perpendicular to the spin axis.
    pub theta: f64,
    /// Horizontal spin angle in `[0, 2π)`.
    pub phi: f64,
    /// Measured range.
    pub r: f64,
    pub valid: bool,
}

impl SphericalPoint {
    pub fn new(theta: f64, phi: f64, r: f64) -> Self {
        SphericalPoint {
            theta,
            phi,
            r,
            valid: r > 0.0,
        }
    }

    /// Applies the `[r_min, r_max]` range gate to the validity flag.
    pub fn gated(mut self, r_min: f64, r_max: f64) -> Self {
        self.valid = self.r.is_finite() && self.r >= r_min && self.r <= r_max && self.r > 0.0;
        self
    }

    #[inline]
    pub(crate) fn to_cartesian_unchecked(&self) -> CartesianPoint {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        CartesianPoint::new(self.r * ct * cp, self.r * ct * sp, self.r * st)
    }
}

pub fn spherical_to_cartesian(p: &SphericalPoint) -> Result<CartesianPoint> {
    if !p.valid {
        return Err(Error::InvalidPoint);
    }
    Ok(p.to_cartesian_unchecked())
}

/// Inverse of [`spherical_to_cartesian`]; `phi` is wrapped into `[0, 2π)`.
pub fn cartesian_to_spherical(c: &CartesianPoint) -> SphericalPoint {
    let r = c.coords.norm();
    let theta = if r > 0.0 {
        (c.z / r).clamp(-1.0, 1.0).asin()
    } else {
        0.0
    };
    let phi = c.y.atan2(c.x).rem_euclid(std::f64::consts::TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    let phi = if phi >= std::f64::consts::TAU {
        0.0
    } else {
        phi
    };
    SphericalPoint::new(theta, phi, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemanticClass {
    Plane = 0,
    GroundPlane = 1,
    Cylinder = 2,
    Sphere = 3,
    Cone = 4,
}

impl SemanticClass {
    pub const COUNT: usize = 5;
    pub const ALL: [SemanticClass; 5] = [
        SemanticClass::Plane,
        SemanticClass::GroundPlane,
        SemanticClass::Cylinder,
        SemanticClass::Sphere,
        SemanticClass::Cone,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Plane => "plane",
            SemanticClass::GroundPlane => "ground",
            SemanticClass::Cylinder => "cylinder",
            SemanticClass::Sphere => "sphere",
            SemanticClass::Cone => "cone",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// Display colour: red, off white, blue, green and grey.
    pub fn color(self) -> [u8; 3] {
        match self {
            SemanticClass::Plane => [255, 0, 0],
            SemanticClass::GroundPlane => [245, 245, 240],
            SemanticClass::Cylinder => [0, 0, 255],
            SemanticClass::Sphere => [0, 128, 0],
            SemanticClass::Cone => [128, 128, 128],
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground-truth annotation of one grid cell. Instance `0` means the ray hit
/// nothing; the class is then meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    pub class: SemanticClass,
    pub instance: u32,
}

impl GroundTruth {
    pub const NONE: GroundTruth = GroundTruth {
        class: SemanticClass::Plane,
        instance: 0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredCloud {
    rows: usize,
    cols: usize,
    points: Vec<SphericalPoint>,
    gt: Option<Vec<GroundTruth>>,
}

impl StructuredCloud {
    pub fn new(rows: usize, cols: usize, points: Vec<SphericalPoint>) -> Result<Self> {
        if points.len() != rows * cols {
            return Err(Error::Param(format!(
                "grid {rows}x{cols} needs {} points, got {}",
                rows * cols,
                points.len()
            )));
        }
        Ok(StructuredCloud {
            rows,
            cols,
            points,
            gt: None,
        })
    }

    pub fn with_ground_truth(mut self, gt: Vec<GroundTruth>) -> Result<Self> {
        if gt.len() != self.points.len() {
            return Err(Error::Param(format!(
                "ground truth has {} cells, cloud has {}",
                gt.len(),
                self.points.len()
            )));
        }
        self.gt = Some(gt);
        Ok(self)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn point(&self, row: usize, col: usize) -> &SphericalPoint {
        &self.points[row * self.cols + col]
    }

    pub fn points(&self) -> &[SphericalPoint] {
        &self.points
    }

    pub fn ground_truth(&self) -> Option<&[GroundTruth]> {
        self.gt.as_deref()
    }

    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p.valid).count()
    }

    pub fn validity(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.valid).collect()
    }

    /// Cartesian position of a valid cell.
    pub fn position(&self, idx: usize) -> Option<CartesianPoint> {
        let p = &self.points[idx];
        p.valid.then(|| p.to_cartesian_unchecked())
    }

    /// Checks that θ is constant along rows and φ along columns.
    pub fn check_grid(&self) -> Result<()> {
        for row in 0..self.rows {
            let theta = self.point(row, 0).theta;
            if let Some(col) = (1..self.cols).find(|&c| self.point(row, c).theta != theta) {
                return Err(Error::Param(format!(
                    "theta varies along row {row} at column {col}"
                )));
            }
        }
        for col in 0..self.cols {
            let phi = self.point(0, col).phi;
            if let Some(row) = (1..self.rows).find(|&r| self.point(r, col).phi != phi) {
                return Err(Error::Param(format!(
                    "phi varies along column {col} at row {row}"
                )));
            }
        }
        Ok(())
    }
}
