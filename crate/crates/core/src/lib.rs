//! Semantic surface segmentation for single spins of a spinning Lidar.
//!
//! The processing chain is split into stages that mirror how the data
//! arrives from the sensor:
//!
//! 1. [`mesh`] subsamples the spin horizontally and links points into an
//!    ordered triangle mesh while the columns stream in.
//! 2. [`normals`] turns each point's ordered 1-ring into a weighted surface
//!    normal.
//! 3. [`segment`] grows surface segment proposals over the mesh and
//!    densifies the labels back to full resolution.
//! 4. [`features`] describes each segment by its density and three normal
//!    component histograms, and [`classifier`] assigns a surface class.
//!
//! [`sim`] produces synthetic scans with ground truth, and [`eval`] holds
//! the segmentation and semantic metrics plus latency benchmarking.
//! [`pipeline`] wires the stages together.

pub mod classifier;
pub mod cloud;
pub mod error;
pub mod eval;
pub mod features;
pub mod mesh;
pub mod normals;
pub mod pipeline;
pub mod segment;
pub mod sim;

pub use classifier::{ForestModel, Prediction, TrainParams, Variant};
pub use cloud::{
    cartesian_to_spherical, spherical_to_cartesian, CartesianPoint, GroundTruth, SemanticClass,
    SphericalPoint, StructuredCloud,
};
pub use error::{Error, Result};
pub use features::{LabeledFeature, SegmentFeature, DEFAULT_BINS};
pub use mesh::{Mesh, MeshBuilder, SubsampledCloud};
pub use normals::NormalMap;
pub use pipeline::{Pipeline, PipelineOutput, PipelineParams};
pub use segment::{LabelMap, SegmentationParams};

/// Three-component vector used for directions and normals.
pub type Vec3 = nalgebra::Vector3<f64>;
