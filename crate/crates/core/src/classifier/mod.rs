//! Segment classifiers: single decision tree, random decision forest (RDF),
//! extremely randomized trees (ERT) and k-nearest neighbours.
//!
//! Tree variants split on Gini impurity. RDF grows each tree on a bootstrap
//! sample and searches every midpoint threshold of `max_features` randomly
//! chosen features. ERT uses the full training set and draws one uniform
//! threshold per candidate feature. A split is kept only if it strictly
//! lowers the weighted impurity; otherwise the node becomes a leaf.

mod io;
mod knn;
mod tree;

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use io::{load_model, read_model, save_model, write_model};
pub use tree::{Node, Tree};

use crate::cloud::SemanticClass;
use crate::error::{Error, Result};
use crate::features::LabeledFeature;

const N_CLASSES: usize = SemanticClass::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    DecisionTree,
    RandomForest,
    ExtraTrees,
    Knn,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::DecisionTree => "dt",
            Variant::RandomForest => "rdf",
            Variant::ExtraTrees => "ert",
            Variant::Knn => "knn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dt" => Ok(Variant::DecisionTree),
            "rdf" => Ok(Variant::RandomForest),
            "ert" => Ok(Variant::ExtraTrees),
            "knn" => Ok(Variant::Knn),
            _ => Err(Error::Param(format!(
                "unknown classifier `{s}` (dt, rdf, ert, knn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub variant: Variant,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// Nodes with fewer samples are not split.
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `floor(sqrt(d))` for the
    /// randomised forests and all features for a single tree.
    pub max_features: Option<usize>,
    pub k: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            variant: Variant::ExtraTrees,
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            k: 5,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn with_variant(variant: Variant) -> Self {
        TrainParams {
            variant,
            ..Default::default()
        }
    }

    fn resolved_max_features(&self, dim: usize) -> usize {
        let m = match (self.max_features, self.variant) {
            (Some(m), _) => m,
            (None, Variant::DecisionTree) => dim,
            (None, _) => (dim as f64).sqrt().floor() as usize,
        };
        m.clamp(1, dim.max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.variant != Variant::Knn && self.n_trees == 0 {
            return Err(Error::Param("a forest needs at least one tree".into()));
        }
        if self.variant == Variant::Knn && self.k == 0 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Param("min_samples_split must be at least 2".into()));
        }
        Ok(())
    }
}

/// Dense row-major training matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Samples {
    pub x: Vec<f64>,
    pub y: Vec<usize>,
    pub dim: usize,
}

impl Samples {
    fn from_rows<'a>(
        rows: impl IntoIterator<Item = (&'a [f64], SemanticClass)>,
    ) -> Result<Samples> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut dim = None;
        for (row, class) in rows {
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: row.len(),
                    })
                }
                _ => {}
            }
            x.extend_from_slice(row);
            y.push(class.index());
        }
        let dim = dim.ok_or_else(|| Error::Param("no training samples".into()))?;
        if dim == 0 {
            return Err(Error::Param("zero-length feature vectors".into()));
        }
        Ok(Samples { x, y, dim })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Body {
    Trees(Vec<Tree>),
    Knn(Samples),
}

/// A trained classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    params: TrainParams,
    dim: usize,
    body: Body,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: SemanticClass,
    /// Mean leaf class distribution (trees) or vote share (kNN).
    pub confidence: [f64; N_CLASSES],
}

/// Trains on features that carry a class.
pub fn train(features: &[LabeledFeature], params: &TrainParams) -> Result<ForestModel> {
    let rows = features
        .iter()
        .map(|f| {
            f.class
                .map(|c| (f.feature.as_slice(), c))
                .ok_or_else(|| Error::Param(format!("segment {} has no class", f.segment_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    ForestModel::fit(rows, params)
}

fn argmax_lowest(scores: &[f64; N_CLASSES]) -> SemanticClass {
    let mut best = 0;
    for c in 1..N_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    SemanticClass::ALL[best]
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

impl ForestModel {
    /// Trains on raw `(vector, class)` pairs.
    pub fn fit<'a>(
        rows: impl IntoIterator<Item = (&'a [f64], SemanticClass)>,
        params: &TrainParams,
    ) -> Result<ForestModel> {
        params.validate()?;
        let samples = Samples::from_rows(rows)?;
        let mut present = [false; N_CLASSES];
        samples.y.iter().for_each(|&c| present[c] = true);
        if present.iter().filter(|p| **p).count() < 2 {
            warn!("training set holds a single class; the model will always predict it");
        }
        let dim = samples.dim;
        let body = match params.variant {
            Variant::Knn => Body::Knn(samples),
            _ => Body::Trees(Self::grow_trees(&samples, params).0),
        };
        Ok(ForestModel {
            params: params.clone(),
            dim,
            body,
        })
    }

    /// Grows the trees and reports which samples each tree saw.
    fn grow_trees(samples: &Samples, params: &TrainParams) -> (Vec<Tree>, Vec<Vec<bool>>) {
        let n_trees = match params.variant {
            Variant::DecisionTree => 1,
            _ => params.n_trees,
        };
        let max_features = params.resolved_max_features(samples.dim);
        let n = samples.len();
        let mut trees = Vec::with_capacity(n_trees);
        let mut in_bag = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let mut rng = tree_rng(params.seed, t);
            let (mut idx, bag) = if params.variant == Variant::RandomForest {
                tree::bootstrap(n, &mut rng)
            } else {
                ((0..n).collect(), vec![true; n])
            };
            let settings = tree::Settings {
                randomized_thresholds: params.variant == Variant::ExtraTrees,
                shuffle_features: params.variant != Variant::DecisionTree,
                max_features,
                max_depth: params.max_depth,
                min_samples_split: params.min_samples_split,
            };
            trees.push(tree::grow(samples, &mut idx, &settings, &mut rng));
            in_bag.push(bag);
        }
        (trees, in_bag)
    }

    pub fn variant(&self) -> Variant {
        self.params.variant
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Tree] {
        match &self.body {
            Body::Trees(t) => t,
            Body::Knn(_) => &[],
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let confidence = match &self.body {
            Body::Trees(trees) => {
                let mut acc = [0.0; N_CLASSES];
                for t in trees {
                    t.accumulate(x, &mut acc);
                }
                acc.iter_mut().for_each(|a| *a /= trees.len() as f64);
                acc
            }
            Body::Knn(samples) => knn::votes(samples, self.params.k, x),
        };
        Ok(Prediction {
            class: argmax_lowest(&confidence),
            confidence,
        })
    }
}

/// Out-of-bag error of a random decision forest after the first `T` trees,
/// for each `T` in `checkpoints`. Samples that are in-bag for all of the
/// first `T` trees are left out of that checkpoint.
pub fn oob_error_curve(
    features: &[LabeledFeature],
    params: &TrainParams,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    if params.variant != Variant::RandomForest {
        return Err(Error::Param(
            "out-of-bag error needs bootstrap sampling (rdf)".into(),
        ));
    }
    let max_trees = checkpoints.iter().copied().max().unwrap_or(0);
    let params = TrainParams {
        n_trees: max_trees.max(1),
        ..params.clone()
    };
    params.validate()?;
    let rows = features
        .iter()
        .map(|f| {
            f.class
                .map(|c| (f.feature.as_slice(), c))
                .ok_or_else(|| Error::Param(format!("segment {} has no class", f.segment_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = Samples::from_rows(rows)?;
    let (trees, in_bag) = ForestModel::grow_trees(&samples, &params);

    let n = samples.len();
    let mut acc = vec![[0.0; N_CLASSES]; n];
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut done = 0;
    let mut order: Vec<usize> = checkpoints.to_vec();
    order.sort_unstable();
    let mut by_checkpoint = std::collections::HashMap::new();
    for &cp in &order {
        while done < cp {
            for i in 0..n {
                if !in_bag[done][i] {
                    trees[done].accumulate(samples.row(i), &mut acc[i]);
                    seen[i] = true;
                }
            }
            done += 1;
        }
        let (mut wrong, mut total) = (0usize, 0usize);
        for i in 0..n {
            if seen[i] {
                total += 1;
                if argmax_lowest(&acc[i]).index() != samples.y[i] {
                    wrong += 1;
                }
            }
        }
        by_checkpoint.insert(
            cp,
            if total == 0 {
                0.0
            } else {
                wrong as f64 / total as f64
            },
        );
    }
    for cp in checkpoints {
        out.push(by_checkpoint[cp]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SegmentFeature;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Gaussian blobs, one per class, centred on distinct corners.
    pub(crate) fn blobs(
        per_class: usize,
        classes: &[SemanticClass],
        spread: f64,
        seed: u64,
    ) -> Vec<LabeledFeature> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, spread).unwrap();
        let mut out = Vec::new();
        for (ci, &class) in classes.iter().enumerate() {
            for _ in 0..per_class {
                let values: Vec<f64> = (0..7)
                    .map(|d| if d % classes.len() == ci { 3.0 } else { 0.0 } + noise.sample(&mut rng))
                    .collect();
                out.push(LabeledFeature {
                    segment_id: out.len() as u32 + 1,
                    class: Some(class),
                    feature: SegmentFeature::from_values(values).unwrap(),
                });
            }
        }
        // interleave so bootstrap and order effects are exercised
        let n = out.len();
        for i in (1..n).rev() {
            out.swap(i, rng.random_range(0..=i));
        }
        out
    }

    const TWO: [SemanticClass; 2] = [SemanticClass::Plane, SemanticClass::Sphere];

    fn accuracy(model: &ForestModel, data: &[LabeledFeature]) -> f64 {
        let ok = data
            .iter()
            .filter(|f| model.predict(f.feature.as_slice()).unwrap().class == f.class.unwrap())
            .count();
        ok as f64 / data.len() as f64
    }

    #[test]
    fn separable_clusters_are_learned() {
        let data = blobs(60, &TWO, 0.3, 1);
        for variant in [
            Variant::RandomForest,
            Variant::ExtraTrees,
            Variant::DecisionTree,
            Variant::Knn,
        ] {
            let params = TrainParams {
                n_trees: 50,
                seed: 9,
                ..TrainParams::with_variant(variant)
            };
            let model = train(&data, &params).unwrap();
            assert_eq!(accuracy(&model, &data), 1.0, "{variant}");
            let centre = [3.0, 0.0, 3.0, 0.0, 3.0, 0.0, 3.0];
            let p = model.predict(&centre).unwrap();
            assert_eq!(p.class, SemanticClass::Plane, "{variant}");
            assert!(p.confidence[0] > 0.9, "{variant} {:?}", p.confidence);
        }
    }

    #[test]
    fn single_class_is_trivial() {
        let data = blobs(20, &[SemanticClass::Cone], 1.0, 2);
        for variant in [
            Variant::RandomForest,
            Variant::ExtraTrees,
            Variant::DecisionTree,
            Variant::Knn,
        ] {
            let model = train(
                &data,
                &TrainParams {
                    n_trees: 5,
                    ..TrainParams::with_variant(variant)
                },
            )
            .unwrap();
            for q in [[0.0; 7], [10.0; 7], [-4.0; 7]] {
                assert_eq!(model.predict(&q).unwrap().class, SemanticClass::Cone);
            }
        }
    }

    #[test]
    fn dimension_mismatches() {
        let mut data = blobs(5, &TWO, 0.3, 3);
        let model = train(&data, &TrainParams::default()).unwrap();
        assert!(matches!(
            model.predict(&[0.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 7,
                got: 3
            })
        ));
        data[2].feature = SegmentFeature::from_values(vec![0.0; 4]).unwrap();
        assert!(matches!(
            train(&data, &TrainParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        data[2].class = None;
        assert!(train(&data, &TrainParams::default()).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let data = blobs(
            30,
            &[
                SemanticClass::Plane,
                SemanticClass::Cylinder,
                SemanticClass::Cone,
            ],
            1.2,
            4,
        );
        for variant in [Variant::RandomForest, Variant::ExtraTrees] {
            let params = TrainParams {
                n_trees: 20,
                seed: 77,
                ..TrainParams::with_variant(variant)
            };
            let a = train(&data, &params).unwrap();
            let b = train(&data, &params).unwrap();
            assert_eq!(a, b);
            let c = train(&data, &TrainParams { seed: 78, ..params }).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn tree_order_does_not_change_predictions() {
        let data = blobs(
            40,
            &[
                SemanticClass::Plane,
                SemanticClass::Cylinder,
                SemanticClass::Cone,
            ],
            1.5,
            5,
        );
        let model = train(
            &data,
            &TrainParams {
                n_trees: 25,
                seed: 3,
                ..TrainParams::with_variant(Variant::RandomForest)
            },
        )
        .unwrap();
        let mut reversed = model.clone();
        if let Body::Trees(t) = &mut reversed.body {
            t.reverse();
        }
        for f in &data {
            let a = model.predict(f.feature.as_slice()).unwrap();
            let b = reversed.predict(f.feature.as_slice()).unwrap();
            assert_eq!(a.class, b.class);
            for c in 0..N_CLASSES {
                assert!((a.confidence[c] - b.confidence[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_code() {
        let mut s = [0.0; N_CLASSES];
        s[2] = 0.5;
        s[4] = 0.5;
        assert_eq!(argmax_lowest(&s), SemanticClass::Cylinder);
        assert_eq!(argmax_lowest(&[0.2; N_CLASSES]), SemanticClass::Plane);
    }

    #[test]
    fn oob_error_falls_with_more_trees() {
        let classes = [
            SemanticClass::Plane,
            SemanticClass::GroundPlane,
            SemanticClass::Sphere,
        ];
        let data = blobs(120, &classes, 1.4, 11);
        let params = TrainParams {
            seed: 5,
            ..TrainParams::with_variant(Variant::RandomForest)
        };
        let curve = oob_error_curve(&data, &params, &[1, 10, 100]).unwrap();
        assert!(curve[0] >= curve[1] && curve[1] >= curve[2], "{curve:?}");
        assert!(curve[0] > curve[2]);
    }
}
