//! Surface segment proposals grown over the mesh.
//!
//! Points are visited in column-major order. Each unlabelled point with a
//! normal seeds a new label which spreads depth-first to any unlabelled
//! neighbour `q` of a popped point `p` when both
//!
//! * the angle between their normals is `< theta_thres`, and
//! * `|pq| / (r_p + r_q) < dist_thres`.
//!
//! Labels are then carried to the skipped columns from the nearest labelled
//! point in the same row.

use std::io::{self, Write};

use crate::cloud::StructuredCloud;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, SubsampledCloud};
use crate::normals::NormalMap;
use crate::Vec3;

/// Default normal angle threshold, 15° in radians.
pub const DEFAULT_THETA_THRES: f64 = 0.2618;
/// Default normalised distance threshold.
pub const DEFAULT_DIST_THRES: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationParams {
    pub theta_thres: f64,
    pub dist_thres: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            theta_thres: DEFAULT_THETA_THRES,
            dist_thres: DEFAULT_DIST_THRES,
        }
    }
}

impl SegmentationParams {
    pub fn new(theta_thres: f64, dist_thres: f64) -> Result<Self> {
        if !(theta_thres > 0.0 && dist_thres > 0.0) {
            return Err(Error::Param(format!(
                "thresholds must be positive (theta {theta_thres}, distance {dist_thres})"
            )));
        }
        Ok(SegmentationParams {
            theta_thres,
            dist_thres,
        })
    }
}

/// Segment label per grid cell; `0` means unlabelled, labels run `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<u32>,
    segments: u32,
}

impl LabelMap {
    pub fn from_labels(rows: usize, cols: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != rows * cols {
            return Err(Error::Param(format!(
                "{} labels for a {rows}x{cols} grid",
                labels.len()
            )));
        }
        let segments = labels.iter().copied().max().unwrap_or(0);
        Ok(LabelMap {
            rows,
            cols,
            labels,
            segments,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of segments `K`.
    pub fn segment_count(&self) -> u32 {
        self.segments
    }

    /// Writes `<row> <col> <label>` lines for every cell.
    pub fn write_dump<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (idx, label) in self.labels.iter().enumerate() {
            writeln!(w, "{} {} {label}", idx / self.cols, idx % self.cols)?;
        }
        Ok(())
    }
}

/// A link accepted while growing a segment, with the values that passed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEdge {
    pub from: usize,
    pub to: usize,
    pub angle: f64,
    pub distance: f64,
}

/// Angle between two nonzero vectors, in `[0, π]`.
pub fn angle_between(a: &Vec3, b: &Vec3) -> Result<f64> {
    let denom = a.norm() * b.norm();
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok((a.dot(b) / denom).clamp(-1.0, 1.0).acos())
}

/// `|pq| / (p_r + q_r)`.
pub fn normalized_distance(p: &Vec3, q: &Vec3, p_r: f64, q_r: f64) -> Result<f64> {
    let sum = p_r + q_r;
    if !(sum > 0.0) {
        return Err(Error::Param(format!("range sum {sum} is not positive")));
    }
    Ok((p - q).norm() / sum)
}

pub fn segment(
    mesh: &Mesh,
    normals: &NormalMap,
    sub: &SubsampledCloud<'_>,
    params: &SegmentationParams,
) -> LabelMap {
    grow(mesh, normals, sub, params, |_| {})
}

/// Like [`segment`] but also returns every accepted link.
pub fn segment_traced(
    mesh: &Mesh,
    normals: &NormalMap,
    sub: &SubsampledCloud<'_>,
    params: &SegmentationParams,
) -> (LabelMap, Vec<GrowthEdge>) {
    let mut trace = Vec::new();
    let labels = grow(mesh, normals, sub, params, |e| trace.push(e));
    (labels, trace)
}

fn grow(
    mesh: &Mesh,
    normals: &NormalMap,
    sub: &SubsampledCloud<'_>,
    params: &SegmentationParams,
    mut on_accept: impl FnMut(GrowthEdge),
) -> LabelMap {
    let (rows, cols) = (sub.rows(), sub.cols());
    let mut labels = vec![0u32; sub.len()];
    let mut label = 0u32;
    let mut stack = Vec::new();
    let mut ring = [0usize; 6];

    for col in 0..cols {
        for row in 0..rows {
            let seed = sub.index(row, col);
            if labels[seed] != 0 || normals.get(seed).is_none() {
                continue;
            }
            label += 1;
            labels[seed] = label;
            stack.push(seed);
            while let Some(p) = stack.pop() {
                let pn = normals.get(p).expect("labelled points carry normals");
                let pp = sub.position(p);
                let pr = sub.range(p);
                let k = crate::mesh::Adjacency::neighbors_into(mesh, p, &mut ring);
                for &q in &ring[..k] {
                    if labels[q] != 0 {
                        continue;
                    }
                    let Some(qn) = normals.get(q) else { continue };
                    let angle = (pn.dot(qn) / (pn.norm() * qn.norm()))
                        .clamp(-1.0, 1.0)
                        .acos();
                    if !(angle < params.theta_thres) {
                        continue;
                    }
                    let distance = (pp - sub.position(q)).norm() / (pr + sub.range(q));
                    if distance < params.dist_thres {
                        labels[q] = label;
                        stack.push(q);
                        on_accept(GrowthEdge {
                            from: p,
                            to: q,
                            angle,
                            distance,
                        });
                    }
                }
            }
        }
    }
    LabelMap {
        rows,
        cols,
        labels,
        segments: label,
    }
}

/// Spreads subsampled labels to the full-resolution grid.
///
/// Each valid cell without a label takes the label of the nearest labelled
/// cell in its row, measuring distance in columns around the full circle.
/// Equidistant candidates resolve to the lower column index.
pub fn densify(labels: &LabelMap, sub: &SubsampledCloud<'_>, full: &StructuredCloud) -> LabelMap {
    let (rows, cols) = (full.rows(), full.cols());
    let k = sub.k_interval();
    let mut out = vec![0u32; rows * cols];
    let mut seeds: Vec<(usize, u32)> = Vec::with_capacity(sub.cols());

    for row in 0..rows {
        seeds.clear();
        seeds.extend((0..sub.cols()).filter_map(|j| {
            let l = labels.get(sub.index(row, j));
            (l != 0).then_some((j * k, l))
        }));
        if seeds.is_empty() {
            continue;
        }
        let n = seeds.len();
        let mut next = 0;
        for col in 0..cols {
            let idx = full.index(row, col);
            if !full.points()[idx].valid {
                continue;
            }
            while next < n && seeds[next].0 < col {
                next += 1;
            }
            if next < n && seeds[next].0 == col {
                out[idx] = seeds[next].1;
                continue;
            }
            let (after_col, after_label) = seeds[next % n];
            let (before_col, before_label) = seeds[(next + n - 1) % n];
            let forward = (after_col + cols - col) % cols;
            let backward = (col + cols - before_col) % cols;
            out[idx] = if forward < backward || (forward == backward && after_col < before_col) {
                after_label
            } else {
                before_label
            };
        }
    }
    LabelMap {
        rows,
        cols,
        labels: out,
        segments: labels.segments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SphericalPoint;
    use crate::mesh::{build_mesh, subsample};
    use crate::normals::estimate_normals;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn angles() {
        let x = Vec3::x();
        assert_eq!(angle_between(&x, &x).unwrap(), 0.0);
        assert!((angle_between(&x, &Vec3::y()).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((angle_between(&x, &-x).unwrap() - PI).abs() < 1e-15);
        assert!(matches!(
            angle_between(&x, &Vec3::zeros()),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn normalized_distances() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(normalized_distance(&p, &p, 4.0, 5.0).unwrap(), 0.0);
        let q = p + Vec3::new(0.0, 1.0, 0.0);
        let d = normalized_distance(&p, &q, 10.0, 10.0).unwrap();
        assert_eq!(d, 0.05);
        assert!(!(d < DEFAULT_DIST_THRES));
        let q = p + Vec3::new(0.0, 0.0, 0.5);
        assert_eq!(normalized_distance(&p, &q, 10.0, 10.0).unwrap(), 0.025);
        assert!(normalized_distance(&p, &q, 0.0, 0.0).is_err());
    }

    fn ground(rows: usize, cols: usize) -> StructuredCloud {
        let pts = (0..rows * cols)
            .map(|i| {
                let theta = -0.40 - 0.0233 * (i / cols) as f64;
                let phi = (i % cols) as f64 * std::f64::consts::TAU / cols as f64;
                SphericalPoint::new(theta, phi, 2.0 / -theta.sin())
            })
            .collect();
        StructuredCloud::new(rows, cols, pts).unwrap()
    }

    #[test]
    fn homogeneous_ground_is_one_segment() {
        let cloud = ground(12, 360);
        let sub = subsample(&cloud, 5).unwrap();
        let mesh = build_mesh(&sub);
        let normals = estimate_normals(&mesh, &sub);
        let labels = segment(&mesh, &normals, &sub, &SegmentationParams::default());
        assert_eq!(labels.segment_count(), 1);
        assert!(labels.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn zero_angle_threshold_isolates_points() {
        let cloud = ground(6, 60);
        let sub = subsample(&cloud, 1).unwrap();
        let mesh = build_mesh(&sub);
        let normals = estimate_normals(&mesh, &sub);
        let params = SegmentationParams {
            theta_thres: 0.0,
            dist_thres: DEFAULT_DIST_THRES,
        };
        let labels = segment(&mesh, &normals, &sub, &params);
        assert_eq!(labels.segment_count() as usize, normals.count());
    }

    #[test]
    fn column_major_seeding() {
        let cloud = ground(3, 4);
        let sub = subsample(&cloud, 1).unwrap();
        let mesh = build_mesh(&sub);
        let normals = estimate_normals(&mesh, &sub);
        let params = SegmentationParams {
            theta_thres: 0.0,
            dist_thres: 1.0,
        };
        let labels = segment(&mesh, &normals, &sub, &params);
        // labels increase down each column first
        assert_eq!(labels.get(sub.index(0, 0)), 1);
        assert_eq!(labels.get(sub.index(1, 0)), 2);
        assert_eq!(labels.get(sub.index(0, 1)), 4);
    }

    fn row_cloud(cols: usize) -> StructuredCloud {
        let pts = (0..cols)
            .map(|c| SphericalPoint::new(0.0, c as f64 * 0.01, 5.0))
            .collect();
        StructuredCloud::new(1, cols, pts).unwrap()
    }

    #[test]
    fn densify_nearest_and_ties() {
        let cloud = row_cloud(20);
        let sub = subsample(&cloud, 1).unwrap();
        let mut raw = vec![0u32; 20];
        raw[0] = 1;
        raw[10] = 2;
        let labels = LabelMap::from_labels(1, 20, raw).unwrap();
        let dense = densify(&labels, &sub, &cloud);
        assert_eq!(dense.get(3), 1);
        assert_eq!(dense.get(5), 1, "tie goes to the lower column");
        assert_eq!(dense.get(6), 2);
        assert_eq!(dense.get(15), 1, "tie across the wrap goes to column 0");
        assert_eq!(dense.get(16), 1);
        assert_eq!(dense.get(14), 2);
    }

    #[test]
    fn densify_identity_at_full_resolution() {
        let cloud = ground(4, 30);
        let sub = subsample(&cloud, 1).unwrap();
        let labels = LabelMap::from_labels(4, 30, (1..=120).collect()).unwrap();
        assert_eq!(densify(&labels, &sub, &cloud).labels(), labels.labels());
    }

    #[test]
    fn densify_skips_invalid_and_empty_rows() {
        let mut pts: Vec<_> = (0..2 * 10)
            .map(|i| SphericalPoint::new(-0.1 * (i / 10) as f64, (i % 10) as f64 * 0.1, 5.0))
            .collect();
        pts[3].valid = false;
        let cloud = StructuredCloud::new(2, 10, pts).unwrap();
        let sub = subsample(&cloud, 2).unwrap();
        let mut raw = vec![0u32; 10];
        raw[1] = 7;
        let labels = LabelMap::from_labels(2, 5, raw).unwrap();
        let dense = densify(&labels, &sub, &cloud);
        assert_eq!(dense.get(3), 0);
        assert!((0..10).filter(|&c| c != 3).all(|c| dense.get(c) == 7));
        assert!((10..20).all(|c| dense.get(c) == 0));
    }
}
