//! Surface normals from ordered 1-rings.
//!
//! Consecutive neighbour vectors `A = v_i - p`, `B = v_{i+1} - p` give a
//! candidate `C = A × B` weighted by `1 / max(|A|, |B|)`, so nearer
//! neighbours dominate. The ring is closed with the pair `(v_k, v_1)`. The
//! weighted mean of the raw candidates is normalised to unit length; its
//! orientation follows the neighbour order and is never flipped.

use crate::error::{Error, Result};
use crate::mesh::{Adjacency, Mesh, MeshBuilder, SubsampledCloud};
use crate::Vec3;

/// Unit normals indexed by subsampled grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    normals: Vec<Option<Vec3>>,
}

impl NormalMap {
    pub fn empty(len: usize) -> Self {
        NormalMap {
            normals: vec![None; len],
        }
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Option<&Vec3> {
        self.normals[idx].as_ref()
    }

    pub fn set(&mut self, idx: usize, n: Option<Vec3>) {
        self.normals[idx] = n;
    }

    /// Number of grid cells (with or without a normal).
    pub fn grid_len(&self) -> usize {
        self.normals.len()
    }

    /// Number of stored normals, `|N|`.
    pub fn count(&self) -> usize {
        self.normals.iter().filter(|n| n.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Vec3)> {
        self.normals
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|n| (i, n)))
    }
}

/// Candidate normal and weight for one consecutive neighbour pair.
#[inline]
pub fn candidate(a: &Vec3, b: &Vec3) -> (Vec3, f64) {
    let longest = a.norm().max(b.norm());
    let w = if longest > 0.0 { 1.0 / longest } else { 0.0 };
    (a.cross(b), w)
}

/// Normal at `p` from its ordered neighbours.
pub fn estimate_normal<A: Adjacency>(p: usize, mesh: &A, positions: &[Vec3]) -> Result<Vec3> {
    let mut ring = [0usize; 6];
    let k = mesh.neighbors_into(p, &mut ring);
    if k < 2 {
        return Err(Error::NoNormal);
    }
    let origin = positions[p];
    let mut sum = Vec3::zeros();
    let mut sum_w = 0.0;
    let mut scale = 0.0;
    // with two neighbours the closing pair is the first pair reversed
    let pairs = if k == 2 { 1 } else { k };
    for t in 0..pairs {
        let a = positions[ring[t]] - origin;
        let b = positions[ring[(t + 1) % k]] - origin;
        let (c, w) = candidate(&a, &b);
        sum += c * w;
        sum_w += w;
        scale += c.norm() * w;
    }
    if sum_w <= 0.0 {
        return Err(Error::DegenerateNormal);
    }
    let norm = sum.norm();
    if !norm.is_finite() || norm <= 1e-12 * scale || norm == 0.0 {
        return Err(Error::DegenerateNormal);
    }
    // dividing by sum_w before normalising does not change the direction
    Ok(sum / norm)
}

/// Normals for every mesh point with at least two neighbours.
pub fn estimate_normals(mesh: &Mesh, sub: &SubsampledCloud<'_>) -> NormalMap {
    let mut map = NormalMap::empty(sub.len());
    for idx in 0..sub.len() {
        if sub.is_valid(idx) {
            map.normals[idx] = estimate_normal(idx, mesh, sub.positions()).ok();
        }
    }
    map
}

/// Builds the mesh column by column and computes each column's normals as
/// soon as its neighbour lists are final.
pub fn mesh_and_normals_online(sub: &SubsampledCloud<'_>) -> Result<(Mesh, NormalMap)> {
    let rows = sub.rows();
    let cols = sub.cols();
    let mut builder = MeshBuilder::new(rows, cols);
    let mut map = NormalMap::empty(sub.len());
    let fill = |map: &mut NormalMap, adj: &dyn AdjacencyDyn, col: usize| {
        for row in 0..rows {
            let idx = sub.index(row, col);
            if sub.is_valid(idx) {
                map.normals[idx] = adj.normal(idx, sub.positions());
            }
        }
    };
    for col in 0..cols {
        if let Some(done) = builder.push_column(&sub.column_validity(col))? {
            fill(&mut map, &builder, done);
        }
    }
    let mesh = builder.finish()?;
    if cols > 0 {
        fill(&mut map, &mesh, 0);
        fill(&mut map, &mesh, cols - 1);
    }
    Ok((mesh, map))
}

trait AdjacencyDyn {
    fn normal(&self, idx: usize, positions: &[Vec3]) -> Option<Vec3>;
}

impl<A: Adjacency> AdjacencyDyn for A {
    fn normal(&self, idx: usize, positions: &[Vec3]) -> Option<Vec3> {
        estimate_normal(idx, self, positions).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{SphericalPoint, StructuredCloud};
    use crate::mesh::{build_mesh, subsample};

    struct Ring(Vec<usize>);

    impl Adjacency for Ring {
        fn neighbors_into(&self, _idx: usize, out: &mut [usize; 6]) -> usize {
            out[..self.0.len()].copy_from_slice(&self.0);
            self.0.len()
        }
    }

    #[test]
    fn coplanar_hexagon_gives_axis_normal() {
        let mut pos = vec![Vec3::new(0.0, 0.0, 3.0)];
        for t in 0..6 {
            let a = t as f64 * std::f64::consts::PI / 3.0;
            pos.push(Vec3::new(a.cos() * (1.0 + 0.1 * t as f64), a.sin(), 3.0));
        }
        let n = estimate_normal(0, &Ring((1..=6).collect()), &pos).unwrap();
        assert!((n - Vec3::z()).norm() < 1e-12);
        let reversed = estimate_normal(0, &Ring((1..=6).rev().collect()), &pos).unwrap();
        assert!((reversed + Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn two_neighbours_follow_their_cross_product() {
        let pos = vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.0, 1.5, 1.0),
            Vec3::new(1.0, 1.0, 3.0),
        ];
        let n = estimate_normal(0, &Ring(vec![1, 2]), &pos).unwrap();
        let expected = (pos[1] - pos[0]).cross(&(pos[2] - pos[0])).normalize();
        assert!((n - expected).norm() < 1e-12);
    }

    #[test]
    fn too_few_or_collinear_neighbours() {
        let pos = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0, -Vec3::x()];
        assert!(matches!(
            estimate_normal(0, &Ring(vec![1]), &pos),
            Err(Error::NoNormal)
        ));
        assert!(matches!(
            estimate_normal(0, &Ring(vec![1, 2, 3]), &pos),
            Err(Error::DegenerateNormal)
        ));
    }

    #[test]
    fn farther_neighbour_lowers_weight() {
        let a = Vec3::new(1.0, 0.2, 0.0);
        let b = Vec3::new(0.1, 0.8, 0.0);
        let (_, w0) = candidate(&a, &b);
        let (_, w1) = candidate(&(a * 1.5), &b);
        let (_, w2) = candidate(&(a * 3.0), &b);
        assert!(w0 > w1 && w1 > w2);
    }

    fn plane_cloud() -> StructuredCloud {
        // ground plane 2 m below the sensor
        let (rows, cols) = (8, 90);
        let pts = (0..rows * cols)
            .map(|i| {
                let theta = -0.35 - 0.03 * (i / cols) as f64;
                let phi = (i % cols) as f64 * std::f64::consts::TAU / cols as f64;
                SphericalPoint::new(theta, phi, 2.0 / -theta.sin())
            })
            .collect();
        StructuredCloud::new(rows, cols, pts).unwrap()
    }

    #[test]
    fn flat_grid_has_identical_normals() {
        let cloud = plane_cloud();
        let sub = subsample(&cloud, 1).unwrap();
        let mesh = build_mesh(&sub);
        let map = estimate_normals(&mesh, &sub);
        assert_eq!(map.count(), sub.len());
        for row in 1..sub.rows() - 1 {
            for col in 0..sub.cols() {
                let n = map.get(sub.index(row, col)).unwrap();
                assert!((n - (-Vec3::z())).norm() < 1e-6, "{n:?}");
            }
        }
        for (_, n) in map.iter() {
            assert!((n.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn isolated_points_have_no_normals() {
        let pts = (0..4 * 6)
            .map(|i| {
                SphericalPoint::new(
                    0.0,
                    i as f64 * 0.1,
                    if i == 0 || i == 15 { 5.0 } else { 0.0 },
                )
            })
            .collect::<Vec<_>>();
        let cloud = StructuredCloud::new(4, 6, pts).unwrap();
        let sub = subsample(&cloud, 1).unwrap();
        let mesh = build_mesh(&sub);
        assert!(estimate_normals(&mesh, &sub).is_empty());
    }

    #[test]
    fn online_matches_batch() {
        let cloud = plane_cloud();
        for k in [1, 4, 7] {
            let sub = subsample(&cloud, k).unwrap();
            let mesh = build_mesh(&sub);
            let batch = estimate_normals(&mesh, &sub);
            let (online_mesh, online) = mesh_and_normals_online(&sub).unwrap();
            assert_eq!(online_mesh, mesh);
            assert_eq!(online, batch);
        }
    }
}
