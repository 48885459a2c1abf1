//! Segmentation and semantic metrics, and latency measurement.
//!
//! Segment quality is scored on grid edges: a valid cell is an edge when a
//! 4-neighbour (columns wrap around) differs in label or validity. Predicted
//! edges are matched against ground-truth edges dilated by a Chebyshev
//! radius, and vice versa.

mod bench;
mod report;

pub use bench::{bench_pipeline, LatencyReport, StageStats};
pub use report::{
    format_latency_table, format_metrics_table, write_latency_csv, write_metrics_csv,
};

use crate::cloud::{SemanticClass, StructuredCloud};
use crate::error::{Error, Result};
use crate::pipeline::PipelineOutput;
use crate::segment::LabelMap;

pub const DEFAULT_DILATION: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    rows: usize,
    cols: usize,
    edges: Vec<bool>,
}

impl EdgeMap {
    pub fn from_labels(rows: usize, cols: usize, labels: &[u32], valid: &[bool]) -> Result<Self> {
        let n = rows * cols;
        if labels.len() != n || valid.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if labels.len() != n {
                    labels.len()
                } else {
                    valid.len()
                },
            });
        }
        let mut edges = vec![false; n];
        for row in 0..rows {
            for col in 0..cols {
                let i = row * cols + col;
                if !valid[i] {
                    continue;
                }
                let left = row * cols + (col + cols - 1) % cols;
                let right = row * cols + (col + 1) % cols;
                let up = (row > 0).then(|| i - cols);
                let down = (row + 1 < rows).then(|| i + cols);
                edges[i] = [Some(left), Some(right), up, down]
                    .into_iter()
                    .flatten()
                    .filter(|&j| j != i)
                    .any(|j| !valid[j] || labels[j] != labels[i]);
            }
        }
        Ok(EdgeMap { rows, cols, edges })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.edges
    }

    pub fn get(&self, idx: usize) -> bool {
        self.edges[idx]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|e| **e).count()
    }

    /// Cells within Chebyshev distance `radius` of an edge, columns wrapping.
    pub fn dilate(&self, radius: usize) -> Vec<bool> {
        let (rows, cols) = (self.rows, self.cols);
        if radius == 0 || cols == 0 {
            return self.edges.clone();
        }
        let mut horiz = vec![false; rows * cols];
        for row in 0..rows {
            let line = &self.edges[row * cols..(row + 1) * cols];
            let out = &mut horiz[row * cols..(row + 1) * cols];
            if 2 * radius + 1 >= cols {
                let any = line.iter().any(|e| *e);
                out.iter_mut().for_each(|o| *o = any);
                continue;
            }
            for (c, &e) in line.iter().enumerate() {
                if e {
                    for d in 0..=2 * radius {
                        out[(c + cols + d - radius) % cols] = true;
                    }
                }
            }
        }
        let mut out = vec![false; rows * cols];
        for row in 0..rows {
            let lo = row.saturating_sub(radius);
            let hi = (row + radius).min(rows - 1);
            for col in 0..cols {
                out[row * cols + col] = (lo..=hi).any(|r| horiz[r * cols + col]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pred_edges: usize,
    pub gt_edges: usize,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Edge-overlap precision, recall and F1 of a dense label map against a
/// ground-truth instance map on the same grid.
pub fn edge_f1(
    pred: &LabelMap,
    gt_instance: &[u32],
    valid: &[bool],
    radius: usize,
) -> Result<EdgeScore> {
    let (rows, cols) = (pred.rows(), pred.cols());
    let pe = EdgeMap::from_labels(rows, cols, pred.labels(), valid)?;
    let ge = EdgeMap::from_labels(rows, cols, gt_instance, valid)?;
    let (np, ng) = (pe.count(), ge.count());
    let (precision, recall) = match (np, ng) {
        (0, 0) => (1.0, 1.0),
        (0, _) | (_, 0) => (0.0, 0.0),
        _ => {
            let gd = ge.dilate(radius);
            let pd = pe.dilate(radius);
            let hit_p = pe
                .as_slice()
                .iter()
                .zip(&gd)
                .filter(|(e, d)| **e && **d)
                .count();
            let hit_g = ge
                .as_slice()
                .iter()
                .zip(&pd)
                .filter(|(e, d)| **e && **d)
                .count();
            (hit_p as f64 / np as f64, hit_g as f64 / ng as f64)
        }
    };
    Ok(EdgeScore {
        precision,
        recall,
        f1: harmonic(precision, recall),
        pred_edges: np,
        gt_edges: ng,
    })
}

/// [`edge_f1`] against the ground-truth instances stored in `cloud`.
pub fn edge_f1_cloud(pred: &LabelMap, cloud: &StructuredCloud, radius: usize) -> Result<EdgeScore> {
    let gt = cloud
        .ground_truth()
        .ok_or_else(|| Error::Param("cloud carries no ground truth".into()))?;
    let instances: Vec<u32> = gt.iter().map(|g| g.instance).collect();
    edge_f1(pred, &instances, &cloud.validity(), radius)
}

/// Counts with rows indexed by ground truth and columns by prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; SemanticClass::COUNT]; SemanticClass::COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, gt: SemanticClass, pred: SemanticClass) {
        self.counts[gt.index()][pred.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: SemanticClass) -> u64 {
        self.counts[c.index()][c.index()]
    }

    /// Ground-truth points of class `c`.
    pub fn support(&self, c: SemanticClass) -> u64 {
        self.counts[c.index()].iter().sum()
    }

    /// Points predicted as class `c`.
    pub fn predicted(&self, c: SemanticClass) -> u64 {
        self.counts.iter().map(|row| row[c.index()]).sum()
    }

    /// `None` when the class occurs in neither ground truth nor prediction.
    pub fn iou(&self, c: SemanticClass) -> Option<f64> {
        let tp = self.true_positives(c);
        let union = self.support(c) + self.predicted(c) - tp;
        (union > 0).then(|| tp as f64 / union as f64)
    }

    pub fn miou(&self) -> MiouReport {
        let per_class = SemanticClass::ALL.map(|c| self.iou(c));
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let miou = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        MiouReport {
            per_class,
            miou,
            confusion: *self,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiouReport {
    pub per_class: [Option<f64>; SemanticClass::COUNT],
    /// Mean over classes present in ground truth or prediction.
    pub miou: f64,
    pub confusion: ConfusionMatrix,
}

/// Per-class IoU and their mean over aligned per-point classes.
pub fn miou(pred: &[SemanticClass], gt: &[SemanticClass]) -> Result<MiouReport> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let mut m = ConfusionMatrix::new();
    for (&p, &g) in pred.iter().zip(gt) {
        m.add(g, p);
    }
    Ok(m.miou())
}

/// Confusion of a pipeline run against the cloud's ground truth over valid
/// cells. Cells the pipeline left unclassified count as `fallback`.
pub fn semantic_confusion(
    output: &PipelineOutput,
    cloud: &StructuredCloud,
    fallback: SemanticClass,
) -> Result<ConfusionMatrix> {
    let gt = cloud
        .ground_truth()
        .ok_or_else(|| Error::Param("cloud carries no ground truth".into()))?;
    let pred = output.point_classes();
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let mut m = ConfusionMatrix::new();
    for ((p, g), point) in pred.iter().zip(gt).zip(cloud.points()) {
        if point.valid {
            m.add(g.class, p.unwrap_or(fallback));
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// No ground-truth points of this class; the metrics are reported as 0.
    pub zero_support: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrfReport {
    pub per_class: [ClassPrf; SemanticClass::COUNT],
    /// Averages over classes present in ground truth or prediction.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

pub fn classwise_prf(confusion: &ConfusionMatrix) -> PrfReport {
    let per_class = SemanticClass::ALL.map(|c| {
        let (tp, support, predicted) = (
            confusion.true_positives(c),
            confusion.support(c),
            confusion.predicted(c),
        );
        if support == 0 {
            return ClassPrf {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                support,
                zero_support: true,
            };
        }
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = tp as f64 / support as f64;
        ClassPrf {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support,
            zero_support: false,
        }
    });
    let included: Vec<&ClassPrf> = SemanticClass::ALL
        .iter()
        .zip(&per_class)
        .filter(|(c, _)| confusion.support(**c) + confusion.predicted(**c) > 0)
        .map(|(_, p)| p)
        .collect();
    let mean = |f: fn(&ClassPrf) -> f64| {
        if included.is_empty() {
            0.0
        } else {
            included.iter().map(|p| f(p)).sum::<f64>() / included.len() as f64
        }
    };
    PrfReport {
        macro_precision: mean(|p| p.precision),
        macro_recall: mean(|p| p.recall),
        macro_f1: mean(|p| p.f1),
        per_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SemanticClass::*;

    fn map(rows: usize, cols: usize, labels: Vec<u32>) -> LabelMap {
        LabelMap::from_labels(rows, cols, labels).unwrap()
    }

    #[test]
    fn edges_of_two_halves() {
        // 2x6 grid split into columns 0..3 and 3..6; wrap adds the 5|0 seam
        let labels: Vec<u32> = (0..12).map(|i| if i % 6 < 3 { 1 } else { 2 }).collect();
        let e = EdgeMap::from_labels(2, 6, &labels, &[true; 12]).unwrap();
        let expect: Vec<bool> = (0..12).map(|i| matches!(i % 6, 0 | 2 | 3 | 5)).collect();
        assert_eq!(e.as_slice(), expect.as_slice());
    }

    #[test]
    fn edges_only_on_valid_cells() {
        let mut valid = vec![true; 9];
        valid[4] = false;
        let e = EdgeMap::from_labels(3, 3, &[1; 9], &valid).unwrap();
        assert!(!e.get(4));
        assert!(e.get(1) && e.get(3) && e.get(5) && e.get(7));
        assert!(!e.get(0));
    }

    #[test]
    fn identity_scores_one() {
        let labels: Vec<u32> = (0..40).map(|i| (i % 10 / 4) as u32 + 1).collect();
        let s = edge_f1(&map(4, 10, labels.clone()), &labels, &[true; 40], 2).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn missing_prediction_edges() {
        let gt: Vec<u32> = (0..40).map(|i| (i % 10 / 5) as u32 + 1).collect();
        let s = edge_f1(&map(4, 10, vec![1; 40]), &gt, &[true; 40], 2).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = edge_f1(&map(4, 10, vec![1; 40]), &[7; 40], &[true; 40], 2).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
    }

    /// Overlap counted cell by cell with an explicit neighbourhood scan.
    fn brute_overlap(a: &[bool], b: &[bool], rows: usize, cols: usize, r: usize) -> usize {
        (0..rows * cols)
            .filter(|&i| {
                a[i] && (0..rows * cols).any(|j| {
                    let (ri, ci, rj, cj) = (i / cols, i % cols, j / cols, j % cols);
                    let dc = ci.abs_diff(cj).min(cols - ci.abs_diff(cj));
                    b[j] && ri.abs_diff(rj) <= r && dc <= r
                })
            })
            .count()
    }

    #[test]
    fn shifted_edges_within_dilation() {
        let (rows, cols) = (6, 30);
        let gt: Vec<u32> = (0..rows * cols)
            .map(|i| if (5..17).contains(&(i % cols)) { 2 } else { 1 })
            .collect();
        let pred: Vec<u32> = (0..rows * cols)
            .map(|i| if (6..18).contains(&(i % cols)) { 2 } else { 1 })
            .collect();
        let valid = vec![true; rows * cols];
        let s = edge_f1(&map(rows, cols, pred.clone()), &gt, &valid, 2).unwrap();
        let pe = EdgeMap::from_labels(rows, cols, &pred, &valid).unwrap();
        let ge = EdgeMap::from_labels(rows, cols, &gt, &valid).unwrap();
        let p =
            brute_overlap(pe.as_slice(), ge.as_slice(), rows, cols, 2) as f64 / pe.count() as f64;
        let r =
            brute_overlap(ge.as_slice(), pe.as_slice(), rows, cols, 2) as f64 / ge.count() as f64;
        assert_eq!((s.precision, s.recall), (p, r));
        assert_eq!(s.f1, 1.0);
    }

    proptest! {
        #[test]
        fn dilation_matches_brute_force(
            rows in 1usize..6, cols in 1usize..12, r in 0usize..4,
            bits in proptest::collection::vec(any::<bool>(), 72),
        ) {
            let labels: Vec<u32> = bits[..rows * cols].iter().map(|b| *b as u32).collect();
            let e = EdgeMap::from_labels(rows, cols, &labels, &vec![true; rows * cols]).unwrap();
            let d = e.dilate(r);
            for i in 0..rows * cols {
                let single: Vec<bool> = (0..rows * cols).map(|j| j == i).collect();
                prop_assert_eq!(d[i], brute_overlap(&single, e.as_slice(), rows, cols, r) == 1);
            }
        }

        #[test]
        fn self_comparison_is_perfect(
            rows in 1usize..6, cols in 1usize..12, r in 0usize..4,
            labels in proptest::collection::vec(0u32..4, 72),
            valid in proptest::collection::vec(any::<bool>(), 72),
        ) {
            let n = rows * cols;
            let l = labels[..n].to_vec();
            let s = edge_f1(&map(rows, cols, l.clone()), &l, &valid[..n], r).unwrap();
            prop_assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }

        #[test]
        fn merge_order_does_not_matter(parts in proptest::collection::vec(proptest::collection::vec((0usize..5, 0usize..5), 0..30), 1..6)) {
            let ms: Vec<ConfusionMatrix> = parts.iter().map(|p| {
                let mut m = ConfusionMatrix::new();
                p.iter().for_each(|&(g, q)| m.add(SemanticClass::ALL[g], SemanticClass::ALL[q]));
                m
            }).collect();
            let mut fwd = ConfusionMatrix::new();
            ms.iter().for_each(|m| fwd.merge(m));
            let mut rev = ConfusionMatrix::new();
            ms.iter().rev().for_each(|m| rev.merge(m));
            prop_assert_eq!(fwd, rev);
            prop_assert_eq!(fwd.total(), parts.iter().map(|p| p.len() as u64).sum::<u64>());
            let rep = fwd.miou();
            let inc: Vec<f64> = rep.per_class.iter().flatten().copied().collect();
            prop_assert!(inc.iter().all(|v| (0.0..=1.0).contains(v)));
            if !inc.is_empty() {
                prop_assert!((rep.miou - inc.iter().sum::<f64>() / inc.len() as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perfect_prediction() {
        let gt = [Plane, GroundPlane, Cylinder, Sphere, Cone, Plane];
        let r = miou(&gt, &gt).unwrap();
        assert_eq!(r.miou, 1.0);
        assert!(r.per_class.iter().all(|v| *v == Some(1.0)));
        let prf = classwise_prf(&r.confusion);
        assert!(prf
            .per_class
            .iter()
            .all(|p| p.precision == 1.0 && p.recall == 1.0 && p.f1 == 1.0));
    }

    #[test]
    fn disjoint_single_class_maps() {
        let r = miou(&[Sphere; 10], &[Plane; 10]).unwrap();
        assert_eq!(r.per_class[Plane.index()], Some(0.0));
        assert_eq!(r.per_class[Sphere.index()], Some(0.0));
        assert_eq!(r.per_class[Cone.index()], None);
        let prf = classwise_prf(&r.confusion);
        assert_eq!(prf.per_class[Plane.index()].recall, 0.0);
        assert!(prf.per_class[Sphere.index()].zero_support);
    }

    #[test]
    fn half_confused_plane() {
        // gt: 100 Plane; pred: 50 Plane + 50 Sphere
        let gt = vec![Plane; 100];
        let pred: Vec<SemanticClass> = (0..100)
            .map(|i| if i < 50 { Plane } else { Sphere })
            .collect();
        let r = miou(&pred, &gt).unwrap();
        // hand arithmetic: IoU(Plane) = 50 / (50 + 0 + 50), IoU(Sphere) = 0 / (0 + 50 + 0)
        assert_eq!(r.per_class[Plane.index()], Some(0.5));
        assert_eq!(r.per_class[Sphere.index()], Some(0.0));
        assert_eq!(r.miou, 0.25);
        let prf = classwise_prf(&r.confusion);
        assert_eq!(prf.per_class[Plane.index()].precision, 1.0);
        assert_eq!(prf.per_class[Plane.index()].recall, 0.5);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(miou(&[Plane], &[]).is_err());
    }
}
