use std::collections::BTreeSet;

use proptest::prelude::*;
use surfseg::mesh::{build_mesh, subsample, MeshBuilder};
use surfseg::{Mesh, SphericalPoint, StructuredCloud};

/// Links written straight from the three linking rules: down, down-right
/// and right for every row above the bottom, right along the bottom row,
/// with the last column wrapping to column 0.
fn rule_links(valid: &[bool], rows: usize, cols: usize) -> BTreeSet<(usize, usize)> {
    let at = |r: usize, c: usize| r * cols + c;
    let mut links = BTreeSet::new();
    let mut add = |a: usize, b: usize| {
        if a != b && valid[a] && valid[b] {
            links.insert((a.min(b), a.max(b)));
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            let right = (c + 1) % cols;
            if r + 1 < rows {
                add(at(r, c), at(r + 1, c));
                add(at(r, c), at(r + 1, right));
            }
            add(at(r, c), at(r, right));
        }
    }
    links
}

fn mesh_from_mask(valid: &[bool], rows: usize, cols: usize) -> Mesh {
    let mut b = MeshBuilder::new(rows, cols);
    for c in 0..cols {
        let column: Vec<bool> = (0..rows).map(|r| valid[r * cols + c]).collect();
        b.push_column(&column).unwrap();
    }
    b.finish().unwrap()
}

fn mask() -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (1usize..=8, 1usize..=12).prop_flat_map(|(rows, cols)| {
        (
            Just(rows),
            Just(cols),
            proptest::collection::vec(proptest::bool::weighted(0.8), rows * cols),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn builder_matches_rule_enumeration((rows, cols, valid) in mask()) {
        let mesh = mesh_from_mask(&valid, rows, cols);
        let got: BTreeSet<(usize, usize)> = mesh.links().into_iter().collect();
        prop_assert_eq!(got, rule_links(&valid, rows, cols));
        let n_valid = valid.iter().filter(|v| **v).count();
        prop_assert!(mesh.link_count() <= 3 * n_valid + rows);
        for p in 0..rows * cols {
            prop_assert!(mesh.degree(p) <= 6);
            if !valid[p] {
                prop_assert_eq!(mesh.degree(p), 0);
            }
            for q in mesh.neighbors(p) {
                prop_assert!(mesh.neighbors(q).any(|x| x == p), "asymmetric link {}-{}", p, q);
            }
        }
    }

    #[test]
    fn neighbour_order_is_anticlockwise((rows, cols, valid) in mask()) {
        prop_assume!(cols >= 3);
        let mesh = mesh_from_mask(&valid, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let p = r * cols + c;
                let (next, prev) = ((c + 1) % cols, (c + cols - 1) % cols);
                let mut slots = Vec::new();
                if r + 1 < rows {
                    slots.push((r + 1) * cols + c);
                    slots.push((r + 1) * cols + next);
                }
                slots.push(r * cols + next);
                if r > 0 {
                    slots.push((r - 1) * cols + c);
                    slots.push((r - 1) * cols + prev);
                }
                slots.push(r * cols + prev);
                let expect: Vec<usize> = if valid[p] {
                    slots.into_iter().filter(|&q| valid[q]).collect()
                } else {
                    vec![]
                };
                let got: Vec<usize> = mesh.neighbors(p).collect();
                prop_assert_eq!(got, expect, "point ({}, {})", r, c);
            }
        }
    }

    #[test]
    fn no_anti_diagonal_links((rows, cols, valid) in mask()) {
        prop_assume!(cols >= 3);
        let mesh = mesh_from_mask(&valid, rows, cols);
        for (a, b) in mesh.links() {
            let (ra, ca, rb, cb) = (a / cols, a % cols, b / cols, b % cols);
            // the only diagonal runs down and to the next column
            if ra != rb && ca != cb {
                let (upper_c, lower_c) = if ra < rb { (ca, cb) } else { (cb, ca) };
                prop_assert_eq!(lower_c, (upper_c + 1) % cols);
            }
        }
    }
}

#[test]
fn batch_and_streaming_agree_on_a_cloud() {
    let (rows, cols) = (6, 40);
    let points = (0..rows * cols)
        .map(|i| {
            let r = if i % 7 == 3 {
                0.0
            } else {
                5.0 + (i % 5) as f64
            };
            SphericalPoint::new(
                -0.1 * (i / cols) as f64,
                (i % cols) as f64 * std::f64::consts::TAU / cols as f64,
                r,
            )
        })
        .collect();
    let cloud = StructuredCloud::new(rows, cols, points).unwrap();
    for k in [1, 3, 7] {
        let sub = subsample(&cloud, k).unwrap();
        let batch = build_mesh(&sub);
        let streamed = mesh_from_mask(sub.validity(), sub.rows(), sub.cols());
        assert_eq!(batch, streamed);
        let (online, _) = surfseg::normals::mesh_and_normals_online(&sub).unwrap();
        assert_eq!(online, batch);
    }
}
