//! The full per-cloud chain: mesh, normals, segments, dense labels,
//! features and (with a model) semantic classes.

use std::time::{Duration, Instant};

use crate::classifier::ForestModel;
use crate::cloud::{SemanticClass, StructuredCloud};
use crate::error::{Error, Result};
use crate::features::{
    assign_majority_classes, extract_features, feature_dim, LabeledFeature, DEFAULT_BINS,
};
use crate::mesh::{build_mesh, subsample};
use crate::normals::{estimate_normals, NormalMap};
use crate::segment::{densify, segment, LabelMap, SegmentationParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub k_interval: usize,
    pub segmentation: SegmentationParams,
    pub bins: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            k_interval: 5,
            segmentation: SegmentationParams::default(),
            bins: DEFAULT_BINS,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_interval == 0 {
            return Err(Error::Param("sampling interval must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::Param(
                "at least one histogram bin is required".into(),
            ));
        }
        SegmentationParams::new(self.segmentation.theta_thres, self.segmentation.dist_thres)
            .map(|_| ())
    }
}

pub const STAGES: [&str; 6] = [
    "mesh", "normals", "segment", "densify", "features", "predict",
];

/// Wall-clock time per stage, in [`STAGES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings(pub [Duration; 6]);

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Labels on the subsampled grid.
    pub sub_labels: LabelMap,
    pub normals: NormalMap,
    /// Labels on the full grid.
    pub dense_labels: LabelMap,
    pub features: Vec<LabeledFeature>,
    /// Predicted class per segment (index `label - 1`); empty without a model.
    pub segment_classes: Vec<Option<SemanticClass>>,
    pub timings: StageTimings,
}

impl PipelineOutput {
    /// Predicted class of each full-grid cell. `None` for invalid or
    /// unlabelled cells, segments without a descriptor, or without a model.
    pub fn point_classes(&self) -> Vec<Option<SemanticClass>> {
        self.dense_labels
            .labels()
            .iter()
            .map(|&l| {
                if l == 0 {
                    None
                } else {
                    self.segment_classes.get(l as usize - 1).copied().flatten()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    params: PipelineParams,
    model: Option<ForestModel>,
}

impl Pipeline {
    pub fn new(params: PipelineParams) -> Result<Self> {
        params.validate()?;
        Ok(Pipeline {
            params,
            model: None,
        })
    }

    /// Attaches a classifier; its input dimension must match the descriptor.
    pub fn with_model(mut self, model: ForestModel) -> Result<Self> {
        let expected = feature_dim(self.params.bins);
        if model.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: model.dim(),
            });
        }
        self.model = Some(model);
        Ok(self)
    }

    pub fn params(&self) -> &PipelineParams {
        &self.params
    }

    pub fn model(&self) -> Option<&ForestModel> {
        self.model.as_ref()
    }

    pub fn run(&self, cloud: &StructuredCloud) -> Result<PipelineOutput> {
        self.run_inner(cloud, false)
    }

    /// Segment descriptors labelled with the majority ground-truth class.
    pub fn training_features(&self, cloud: &StructuredCloud) -> Result<Vec<LabeledFeature>> {
        if cloud.ground_truth().is_none() {
            return Err(Error::Param(
                "training needs a cloud with ground truth".into(),
            ));
        }
        let out = self.run_inner(cloud, true)?;
        Ok(out
            .features
            .into_iter()
            .filter(|f| f.class.is_some())
            .collect())
    }

    fn run_inner(&self, cloud: &StructuredCloud, label_features: bool) -> Result<PipelineOutput> {
        let mut t = [Duration::ZERO; 6];
        let mut clock = Instant::now();
        let mut lap = |slot: usize| {
            let now = Instant::now();
            t[slot] = now - clock;
            clock = now;
        };

        let sub = subsample(cloud, self.params.k_interval)?;
        let mesh = build_mesh(&sub);
        lap(0);
        let normals = estimate_normals(&mesh, &sub);
        lap(1);
        let sub_labels = segment(&mesh, &normals, &sub, &self.params.segmentation);
        lap(2);
        let dense_labels = densify(&sub_labels, &sub, cloud);
        lap(3);
        let mut features = extract_features(&sub_labels, &normals, self.params.bins);
        lap(4);
        let mut segment_classes = Vec::new();
        if let Some(model) = &self.model {
            segment_classes = vec![None; sub_labels.segment_count() as usize];
            for f in &features {
                segment_classes[f.segment_id as usize - 1] =
                    Some(model.predict(f.feature.as_slice())?.class);
            }
        }
        lap(5);
        if label_features {
            assign_majority_classes(&mut features, &sub_labels, &normals, &sub);
        }
        Ok(PipelineOutput {
            sub_labels,
            normals,
            dense_labels,
            features,
            segment_classes,
            timings: StageTimings(t),
        })
    }
}
