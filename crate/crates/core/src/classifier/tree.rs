use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Samples, N_CLASSES};

/// Tree node in pre-order storage: a split's left child is the next node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        /// `x[feature] <= threshold` goes left.
        threshold: f64,
        right: usize,
    },
    Leaf {
        counts: [u32; N_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> (usize, usize) {
            // returns (depth below `at`, index after the subtree)
            match &nodes[at] {
                Node::Leaf { .. } => (0, at + 1),
                Node::Split { .. } => {
                    let (l, next) = walk(nodes, at + 1);
                    let (r, end) = walk(nodes, next);
                    (1 + l.max(r), end)
                }
            }
        }
        walk(&self.nodes, 0).0
    }

    /// Index of the leaf reached by `x`.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        at + 1
                    } else {
                        *right
                    };
                }
                Node::Leaf { .. } => return at,
            }
        }
    }

    /// Adds the normalised class distribution of `x`'s leaf to `acc`.
    #[inline]
    pub(crate) fn accumulate(&self, x: &[f64], acc: &mut [f64; N_CLASSES]) {
        if let Node::Leaf { counts } = &self.nodes[self.leaf_index(x)] {
            let total: u32 = counts.iter().sum();
            if total > 0 {
                let inv = 1.0 / total as f64;
                for (a, &c) in acc.iter_mut().zip(counts) {
                    *a += c as f64 * inv;
                }
            }
        }
    }
}

pub(crate) struct Settings {
    pub randomized_thresholds: bool,
    pub shuffle_features: bool,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

/// Draws `n` indices with replacement and marks which were drawn.
pub(crate) fn bootstrap(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<bool>) {
    let mut in_bag = vec![false; n];
    let idx = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            i
        })
        .collect();
    (idx, in_bag)
}

struct Task {
    start: usize,
    end: usize,
    depth: usize,
    /// Split node whose right child this task becomes.
    parent: Option<usize>,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    /// Sum over children of `Σ count² / size`; larger is purer.
    purity: f64,
}

fn class_counts(samples: &Samples, idx: &[usize]) -> [u32; N_CLASSES] {
    let mut counts = [0u32; N_CLASSES];
    for &i in idx {
        counts[samples.y[i]] += 1;
    }
    counts
}

#[inline]
fn purity(counts: &[u32; N_CLASSES], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    counts.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / n as f64
}

/// Grows one tree over the sample indices in `idx` (reordered in place).
pub(crate) fn grow(
    samples: &Samples,
    idx: &mut [usize],
    settings: &Settings,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = Vec::new();
    let mut stack = vec![Task {
        start: 0,
        end: idx.len(),
        depth: 0,
        parent: None,
    }];
    let mut features: Vec<usize> = (0..samples.dim).collect();
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(idx.len());

    while let Some(task) = stack.pop() {
        let id = nodes.len();
        if let Some(parent) = task.parent {
            if let Node::Split { right, .. } = &mut nodes[parent] {
                *right = id;
            }
        }
        let node_idx = &mut idx[task.start..task.end];
        let counts = class_counts(samples, node_idx);
        let n = node_idx.len() as u32;
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = settings.max_depth.is_some_and(|d| task.depth >= d);
        let split = if pure || depth_capped || (n as usize) < settings.min_samples_split {
            None
        } else {
            best_split(
                samples,
                node_idx,
                &counts,
                settings,
                &mut features,
                &mut scratch,
                rng,
            )
        };
        let Some(split) = split else {
            nodes.push(Node::Leaf { counts });
            continue;
        };

        let mut left = 0;
        for k in 0..node_idx.len() {
            if samples.row(node_idx[k])[split.feature] <= split.threshold {
                node_idx.swap(left, k);
                left += 1;
            }
        }
        debug_assert!(left > 0 && left < node_idx.len());
        nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            right: usize::MAX,
        });
        let mid = task.start + left;
        stack.push(Task {
            start: mid,
            end: task.end,
            depth: task.depth + 1,
            parent: Some(id),
        });
        stack.push(Task {
            start: task.start,
            end: mid,
            depth: task.depth + 1,
            parent: None,
        });
    }
    Tree { nodes }
}

fn best_split(
    samples: &Samples,
    idx: &[usize],
    counts: &[u32; N_CLASSES],
    settings: &Settings,
    features: &mut [usize],
    scratch: &mut Vec<(f64, usize)>,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let n = idx.len() as u32;
    let parent = purity(counts, n);
    // strict improvement, with slack for summation rounding
    let floor = parent + 1e-9 * n as f64;
    let mut best: Option<Candidate> = None;
    let dim = features.len();

    for visited in 0..dim {
        if visited >= settings.max_features && best.is_some() {
            break;
        }
        if settings.shuffle_features {
            let j = rng.random_range(visited..dim);
            features.swap(visited, j);
        }
        let feature = features[visited];
        let candidate = if settings.randomized_thresholds {
            random_threshold(samples, idx, feature, rng)
        } else {
            best_threshold(samples, idx, feature, scratch)
        };
        if let Some(c) = candidate {
            if c.purity > floor && best.is_none_or(|b| c.purity > b.purity) {
                best = Some(c);
            }
        }
    }
    best
}

fn best_threshold(
    samples: &Samples,
    idx: &[usize],
    feature: usize,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<Candidate> {
    scratch.clear();
    scratch.extend(idx.iter().map(|&i| (samples.row(i)[feature], samples.y[i])));
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if scratch[0].0 == scratch[scratch.len() - 1].0 {
        return None;
    }
    let mut right = [0u32; N_CLASSES];
    for &(_, c) in scratch.iter() {
        right[c] += 1;
    }
    let mut left = [0u32; N_CLASSES];
    // running Σ count² for both sides
    let mut left_sq = 0.0f64;
    let mut right_sq: f64 = right.iter().map(|&c| (c as f64).powi(2)).sum();
    let n = scratch.len();
    let mut best: Option<Candidate> = None;
    for k in 0..n - 1 {
        let c = scratch[k].1;
        left_sq += 2.0 * left[c] as f64 + 1.0;
        right_sq -= 2.0 * right[c] as f64 - 1.0;
        left[c] += 1;
        right[c] -= 1;
        let (a, b) = (scratch[k].0, scratch[k + 1].0);
        if a == b {
            continue;
        }
        let nl = (k + 1) as f64;
        let p = left_sq / nl + right_sq / (n as f64 - nl);
        if best.is_none_or(|bst| p > bst.purity) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Candidate {
                feature,
                threshold,
                purity: p,
            });
        }
    }
    best
}

fn random_threshold(
    samples: &Samples,
    idx: &[usize],
    feature: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in idx {
        let v = samples.row(i)[feature];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        return None;
    }
    let threshold = rng.random_range(lo..hi);
    let mut left = [0u32; N_CLASSES];
    let mut right = [0u32; N_CLASSES];
    for &i in idx {
        if samples.row(i)[feature] <= threshold {
            left[samples.y[i]] += 1;
        } else {
            right[samples.y[i]] += 1;
        }
    }
    let nl: u32 = left.iter().sum();
    let nr: u32 = right.iter().sum();
    Some(Candidate {
        feature,
        threshold,
        purity: purity(&left, nl) + purity(&right, nr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{tests::blobs, train, TrainParams, Variant};
    use crate::cloud::SemanticClass;

    fn gini(counts: &[u32; N_CLASSES]) -> f64 {
        let n: u32 = counts.iter().sum();
        1.0 - counts
            .iter()
            .map(|&c| (c as f64 / n as f64).powi(2))
            .sum::<f64>()
    }

    #[test]
    fn every_split_lowers_gini() {
        let classes = [
            SemanticClass::Plane,
            SemanticClass::Cylinder,
            SemanticClass::Sphere,
            SemanticClass::Cone,
        ];
        let data = blobs(50, &classes, 1.6, 21);
        for variant in [Variant::DecisionTree, Variant::ExtraTrees] {
            let model = train(
                &data,
                &TrainParams {
                    n_trees: 5,
                    seed: 1,
                    ..TrainParams::with_variant(variant)
                },
            )
            .unwrap();
            for tree in model.trees() {
                // route the full training set and recount at every node
                let mut at_node: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes().len()];
                for (i, f) in data.iter().enumerate() {
                    let x = f.feature.as_slice();
                    let mut at = 0;
                    loop {
                        at_node[at].push(i);
                        match &tree.nodes()[at] {
                            Node::Split {
                                feature,
                                threshold,
                                right,
                            } => {
                                at = if x[*feature] <= *threshold {
                                    at + 1
                                } else {
                                    *right
                                }
                            }
                            Node::Leaf { .. } => break,
                        }
                    }
                }
                let counts = |ids: &[usize]| {
                    let mut c = [0u32; N_CLASSES];
                    ids.iter()
                        .for_each(|&i| c[data[i].class.unwrap().index()] += 1);
                    c
                };
                for (at, node) in tree.nodes().iter().enumerate() {
                    if let Node::Split { right, .. } = node {
                        let p = counts(&at_node[at]);
                        let l = counts(&at_node[at + 1]);
                        let r = counts(&at_node[*right]);
                        let (nl, nr) = (at_node[at + 1].len() as f64, at_node[*right].len() as f64);
                        let child = (nl * gini(&l) + nr * gini(&r)) / (nl + nr);
                        assert!(child < gini(&p), "{variant}: node {at}");
                    }
                }
            }
        }
    }

    #[test]
    fn pure_leaf_gives_full_confidence() {
        let data = blobs(30, &[SemanticClass::Plane, SemanticClass::Sphere], 0.2, 8);
        let model = train(&data, &TrainParams::with_variant(Variant::DecisionTree)).unwrap();
        let tree = &model.trees()[0];
        assert!(tree.depth() >= 1);
        let p = model.predict(data[0].feature.as_slice()).unwrap();
        assert_eq!(p.confidence[p.class.index()], 1.0);
    }

    #[test]
    fn depth_cap_is_respected() {
        let data = blobs(
            40,
            &[
                SemanticClass::Plane,
                SemanticClass::Sphere,
                SemanticClass::Cone,
            ],
            2.0,
            9,
        );
        let model = train(
            &data,
            &TrainParams {
                max_depth: Some(2),
                ..TrainParams::with_variant(Variant::DecisionTree)
            },
        )
        .unwrap();
        assert!(model.trees()[0].depth() <= 2);
    }
}
