//! Horizontal subsampling and online mesh construction.
//!
//! Links are formed while columns (vertical shots) arrive:
//!
//! * interior rows link `(i,j)` to `(i+1,j)`, `(i+1,j+1)` and `(i,j+1)`;
//! * the bottom row links `(n,j)` to `(n,j+1)`;
//! * at the end of the spin the last column is linked to column 0 in the
//!   same pattern, closing the cylinder.
//!
//! A link is made only when both endpoints are valid. Each point keeps its
//! neighbours in six fixed slots, which yields the anticlockwise order
//! `(i+1,j) (i+1,j+1) (i,j+1) (i-1,j) (i-1,j-1) (i,j-1)` without sorting.

use crate::cloud::{GroundTruth, StructuredCloud};
use crate::error::{Error, Result};
use crate::Vec3;

/// Horizontal subsampling of a structured cloud: every `k_interval`-th column
/// starting at column 0, with cartesian positions precomputed.
#[derive(Debug, Clone)]
pub struct SubsampledCloud<'a> {
    parent: &'a StructuredCloud,
    k_interval: usize,
    rows: usize,
    cols: usize,
    positions: Vec<Vec3>,
    ranges: Vec<f64>,
    valid: Vec<bool>,
}

pub fn subsample(cloud: &StructuredCloud, k_interval: usize) -> Result<SubsampledCloud<'_>> {
    SubsampledCloud::new(cloud, k_interval)
}

impl<'a> SubsampledCloud<'a> {
    pub fn new(parent: &'a StructuredCloud, k_interval: usize) -> Result<Self> {
        if k_interval < 1 {
            return Err(Error::Param("k_interval must be at least 1".into()));
        }
        let rows = parent.rows();
        let cols = parent.cols().div_ceil(k_interval);
        let n = rows * cols;
        let mut positions = Vec::with_capacity(n);
        let mut ranges = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for row in 0..rows {
            for col in 0..cols {
                let p = parent.point(row, col * k_interval);
                valid.push(p.valid);
                ranges.push(p.r);
                positions.push(if p.valid {
                    p.to_cartesian_unchecked().coords
                } else {
                    Vec3::zeros()
                });
            }
        }
        Ok(SubsampledCloud {
            parent,
            k_interval,
            rows,
            cols,
            positions,
            ranges,
            valid,
        })
    }

    pub fn parent(&self) -> &'a StructuredCloud {
        self.parent
    }

    pub fn k_interval(&self) -> usize {
        self.k_interval
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
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Index of the same point in the parent grid.
    #[inline]
    pub fn parent_index(&self, idx: usize) -> usize {
        let (row, col) = (idx / self.cols, idx % self.cols);
        self.parent.index(row, col * self.k_interval)
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn position(&self, idx: usize) -> &Vec3 {
        &self.positions[idx]
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    #[inline]
    pub fn range(&self, idx: usize) -> f64 {
        self.ranges[idx]
    }

    pub fn ground_truth(&self, idx: usize) -> Option<GroundTruth> {
        self.parent
            .ground_truth()
            .map(|gt| gt[self.parent_index(idx)])
    }

    /// Validity flags of one column, top to bottom.
    pub fn column_validity(&self, col: usize) -> Vec<bool> {
        (0..self.rows)
            .map(|row| self.valid[self.index(row, col)])
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

const NONE: u32 = u32::MAX;

// Slot positions in the anticlockwise order.
const BELOW: usize = 0;
const BELOW_NEXT: usize = 1;
const NEXT: usize = 2;
const ABOVE: usize = 3;
const ABOVE_PREV: usize = 4;
const PREV: usize = 5;

/// Ordered adjacency over a subsampled grid. At most six neighbours per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mesh {
    rows: usize,
    cols: usize,
    slots: Vec<[u32; 6]>,
}

/// Read access to ordered neighbour lists, shared by finished meshes and
/// meshes still under construction.
pub trait Adjacency {
    /// Copies the neighbours of `idx` into `out` in order and returns how many.
    fn neighbors_into(&self, idx: usize, out: &mut [usize; 6]) -> usize;
}

#[inline]
fn compact(slots: &[u32; 6], out: &mut [usize; 6]) -> usize {
    let mut k = 0;
    for &n in slots {
        if n != NONE {
            out[k] = n as usize;
            k += 1;
        }
    }
    k
}

impl Adjacency for Mesh {
    #[inline]
    fn neighbors_into(&self, idx: usize, out: &mut [usize; 6]) -> usize {
        compact(&self.slots[idx], out)
    }
}

impl Adjacency for MeshBuilder {
    #[inline]
    fn neighbors_into(&self, idx: usize, out: &mut [usize; 6]) -> usize {
        compact(&self.slots[idx], out)
    }
}

impl Mesh {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Neighbours of `idx` in anticlockwise order starting from below.
    #[inline]
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.slots[idx]
            .iter()
            .filter(|&&n| n != NONE)
            .map(|&n| n as usize)
    }

    #[inline]
    pub fn degree(&self, idx: usize) -> usize {
        self.slots[idx].iter().filter(|&&n| n != NONE).count()
    }

    pub fn link_count(&self) -> usize {
        (0..self.len()).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Every link once, as `(a, b)` with `a < b`, sorted.
    pub fn links(&self) -> Vec<(usize, usize)> {
        let mut links: Vec<_> = (0..self.len())
            .flat_map(|a| {
                self.neighbors(a)
                    .filter(move |&b| a < b)
                    .map(move |b| (a, b))
            })
            .collect();
        links.sort_unstable();
        links
    }
}

/// Streaming mesh construction, fed one subsampled column at a time.
#[derive(Debug, Clone)]
pub struct MeshBuilder {
    rows: usize,
    cols: usize,
    next_col: usize,
    valid: Vec<bool>,
    slots: Vec<[u32; 6]>,
}

impl MeshBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        MeshBuilder {
            rows,
            cols,
            next_col: 0,
            valid: vec![false; rows * cols],
            slots: vec![[NONE; 6]; rows * cols],
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    fn link(&mut self, a: usize, slot_a: usize, b: usize, slot_b: usize) {
        if a == b || !self.valid[a] || !self.valid[b] || self.slots[a].contains(&(b as u32)) {
            return;
        }
        debug_assert_eq!(self.slots[a][slot_a], NONE);
        debug_assert_eq!(self.slots[b][slot_b], NONE);
        self.slots[a][slot_a] = b as u32;
        self.slots[b][slot_b] = a as u32;
    }

    /// Links column `left` to column `right` (the next column in spin order).
    fn link_columns(&mut self, left: usize, right: usize) {
        for row in 0..self.rows {
            let a = self.idx(row, left);
            let b = self.idx(row, right);
            self.link(a, NEXT, b, PREV);
            if row + 1 < self.rows {
                let c = self.idx(row + 1, right);
                self.link(a, BELOW_NEXT, c, ABOVE_PREV);
            }
        }
    }

    /// Adds the next column of validity flags (top row first).
    ///
    /// Returns the column whose neighbour lists became final, if any. Column
    /// 0 and the last column only become final in [`MeshBuilder::finish`].
    pub fn push_column(&mut self, valid: &[bool]) -> Result<Option<usize>> {
        if valid.len() != self.rows {
            return Err(Error::Param(format!(
                "column has {} rows, mesh has {}",
                valid.len(),
                self.rows
            )));
        }
        if self.next_col >= self.cols {
            return Err(Error::Param("more columns than declared".into()));
        }
        let col = self.next_col;
        self.next_col += 1;
        for (row, &v) in valid.iter().enumerate() {
            let i = self.idx(row, col);
            self.valid[i] = v;
        }
        for row in 0..self.rows.saturating_sub(1) {
            let a = self.idx(row, col);
            let b = self.idx(row + 1, col);
            self.link(a, BELOW, b, ABOVE);
        }
        if col >= 1 {
            self.link_columns(col - 1, col);
        }
        Ok((col >= 2).then(|| col - 1))
    }

    /// Closes the cylinder by linking the last column to column 0.
    pub fn finish(mut self) -> Result<Mesh> {
        if self.next_col != self.cols {
            return Err(Error::Param(format!(
                "mesh finished after {} of {} columns",
                self.next_col, self.cols
            )));
        }
        if self.cols > 0 {
            self.link_columns(self.cols - 1, 0);
        }
        Ok(Mesh {
            rows: self.rows,
            cols: self.cols,
            slots: self.slots,
        })
    }
}

/// Builds the mesh of a whole subsampled spin.
pub fn build_mesh(sub: &SubsampledCloud<'_>) -> Mesh {
    let mut builder = MeshBuilder::new(sub.rows(), sub.cols());
    let mut column = vec![false; sub.rows()];
    for col in 0..sub.cols() {
        for (row, v) in column.iter_mut().enumerate() {
            *v = sub.is_valid(sub.index(row, col));
        }
        builder
            .push_column(&column)
            .expect("column count and height match the grid");
    }
    builder.finish().expect("all columns pushed")
}
