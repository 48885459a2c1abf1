//! Versioned textual model files.
//!
//! ```text
//! SLMODEL v1 variant=rdf dim=49 classes=5 trees=100
//! params n_trees=100 max_depth=none min_samples_split=2 max_features=auto k=5 seed=7
//! tree 0 nodes=41
//! S <feature> <threshold>
//! L <count per class>
//! ...
//! ```
//!
//! Nodes are dumped in pre-order. kNN models store `samples=<n>` followed by
//! `<class> <values...>` rows instead of trees. Floats use the shortest
//! representation that parses back to the same value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Body, ForestModel, Node, Samples, TrainParams, Tree, Variant, N_CLASSES};
use crate::error::{Error, Result};

const MAGIC: &str = "SLMODEL";
const VERSION: &str = "v1";

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file), path)
}

fn opt<T: std::fmt::Display>(v: Option<T>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |v| v.to_string())
}

pub fn write_model<W: Write>(model: &ForestModel, w: &mut W) -> std::io::Result<()> {
    let p = &model.params;
    writeln!(
        w,
        "{MAGIC} {VERSION} variant={} dim={} classes={N_CLASSES} trees={}",
        p.variant,
        model.dim,
        model.trees().len()
    )?;
    writeln!(
        w,
        "params n_trees={} max_depth={} min_samples_split={} max_features={} k={} seed={}",
        p.n_trees,
        opt(p.max_depth, "none"),
        p.min_samples_split,
        opt(p.max_features, "auto"),
        p.k,
        p.seed
    )?;
    match &model.body {
        Body::Trees(trees) => {
            for (t, tree) in trees.iter().enumerate() {
                writeln!(w, "tree {t} nodes={}", tree.nodes().len())?;
                for node in tree.nodes() {
                    match node {
                        Node::Split {
                            feature, threshold, ..
                        } => writeln!(w, "S {feature} {threshold}")?,
                        Node::Leaf { counts } => {
                            write!(w, "L")?;
                            for c in counts {
                                write!(w, " {c}")?;
                            }
                            writeln!(w)?;
                        }
                    }
                }
            }
        }
        Body::Knn(samples) => {
            writeln!(w, "samples={}", samples.len())?;
            for i in 0..samples.len() {
                write!(w, "{}", samples.y[i])?;
                for v in samples.row(i) {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

struct Lines<'p, R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
    path: &'p Path,
    line: usize,
}

impl<R: BufRead> Lines<'_, R> {
    fn next_line(&mut self) -> Result<String> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                l.map_err(|e| Error::io(self.path, e))
            }
            None => Err(Error::parse(
                self.path,
                self.line + 1,
                "unexpected end of file",
            )),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.line, msg)
    }
}

fn kv<'a>(tok: &'a str, key: &str) -> Option<&'a str> {
    tok.strip_prefix(key)?.strip_prefix('=')
}

fn parse_kv<T: std::str::FromStr, R: BufRead>(
    lines: &Lines<'_, R>,
    tok: Option<&str>,
    key: &str,
) -> Result<T> {
    tok.and_then(|t| kv(t, key))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| lines.err(format!("expected {key}=<value>")))
}

fn parse_opt<T: std::str::FromStr, R: BufRead>(
    lines: &Lines<'_, R>,
    tok: Option<&str>,
    key: &str,
    none: &str,
) -> Result<Option<T>> {
    match tok.and_then(|t| kv(t, key)) {
        Some(v) if v == none => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| lines.err(format!("bad {key}"))),
        None => Err(lines.err(format!("expected {key}=<value>"))),
    }
}

pub fn read_model<R: BufRead>(reader: R, path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let mut lines = Lines {
        inner: reader.lines().enumerate(),
        path,
        line: 0,
    };

    let header = lines.next_line()?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some(MAGIC) {
        return Err(lines.err("missing SLMODEL header"));
    }
    match tok.next() {
        Some(VERSION) => {}
        Some(v) => return Err(Error::ModelVersion(v.to_string())),
        None => return Err(lines.err("missing version")),
    }
    let variant: Variant = tok
        .next()
        .and_then(|t| kv(t, "variant"))
        .ok_or_else(|| lines.err("expected variant=<name>"))?
        .parse()
        .map_err(|_| lines.err("unknown variant"))?;
    let dim: usize = parse_kv(&lines, tok.next(), "dim")?;
    let classes: usize = parse_kv(&lines, tok.next(), "classes")?;
    if classes != N_CLASSES {
        return Err(lines.err(format!("model has {classes} classes, expected {N_CLASSES}")));
    }
    let n_trees_stored: usize = parse_kv(&lines, tok.next(), "trees")?;

    let params_line = lines.next_line()?;
    let mut tok = params_line.split_whitespace();
    if tok.next() != Some("params") {
        return Err(lines.err("expected params line"));
    }
    let params = TrainParams {
        variant,
        n_trees: parse_kv(&lines, tok.next(), "n_trees")?,
        max_depth: parse_opt(&lines, tok.next(), "max_depth", "none")?,
        min_samples_split: parse_kv(&lines, tok.next(), "min_samples_split")?,
        max_features: parse_opt(&lines, tok.next(), "max_features", "auto")?,
        k: parse_kv(&lines, tok.next(), "k")?,
        seed: parse_kv(&lines, tok.next(), "seed")?,
    };

    let body = if variant == Variant::Knn {
        let line = lines.next_line()?;
        let n: usize = parse_kv(&lines, Some(line.trim()), "samples")?;
        let mut x = Vec::with_capacity(n * dim);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next_line()?;
            let mut tok = line.split_whitespace();
            let class: usize = tok
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|&c| c < N_CLASSES)
                .ok_or_else(|| lines.err("bad class"))?;
            let row = tok
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| lines.err("bad value"))?;
            if row.len() != dim {
                return Err(lines.err(format!("expected {dim} values, found {}", row.len())));
            }
            x.extend(row);
            y.push(class);
        }
        Body::Knn(Samples { x, y, dim })
    } else {
        let mut trees = Vec::with_capacity(n_trees_stored);
        for t in 0..n_trees_stored {
            let line = lines.next_line()?;
            let mut tok = line.split_whitespace();
            if tok.next() != Some("tree")
                || tok.next().and_then(|v| v.parse::<usize>().ok()) != Some(t)
            {
                return Err(lines.err(format!("expected `tree {t}`")));
            }
            let n_nodes: usize = parse_kv(&lines, tok.next(), "nodes")?;
            trees.push(read_tree(&mut lines, n_nodes, dim)?);
        }
        Body::Trees(trees)
    };
    Ok(ForestModel { params, dim, body })
}

fn read_tree<R: BufRead>(lines: &mut Lines<'_, R>, n_nodes: usize, dim: usize) -> Result<Tree> {
    let mut nodes = Vec::with_capacity(n_nodes);
    // splits still waiting for their right child
    let mut open: Vec<usize> = Vec::new();
    let mut complete = false;
    for _ in 0..n_nodes {
        let line = lines.next_line()?;
        if complete {
            return Err(lines.err("node after the tree was complete"));
        }
        let id = nodes.len();
        let mut tok = line.split_whitespace();
        let node = match tok.next() {
            Some("S") => {
                let feature: usize = tok
                    .next()
                    .and_then(|v| v.parse().ok())
                    .filter(|&f| f < dim)
                    .ok_or_else(|| lines.err("bad split feature"))?;
                let threshold: f64 = tok
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| lines.err("bad split threshold"))?;
                Node::Split {
                    feature,
                    threshold,
                    right: usize::MAX,
                }
            }
            Some("L") => {
                let mut counts = [0u32; N_CLASSES];
                for c in counts.iter_mut() {
                    *c = tok
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| lines.err("bad leaf count"))?;
                }
                Node::Leaf { counts }
            }
            _ => return Err(lines.err("expected S or L node")),
        };
        if tok.next().is_some() {
            return Err(lines.err("trailing fields"));
        }
        let is_leaf = matches!(node, Node::Leaf { .. });
        nodes.push(node);
        if is_leaf {
            // this leaf closes subtrees; the next node is the right child of
            // the innermost open split
            match open.pop() {
                Some(split) => {
                    if let Node::Split { right, .. } = &mut nodes[split] {
                        *right = id + 1;
                    }
                }
                None => complete = true,
            }
        } else {
            open.push(id);
        }
    }
    if !complete {
        return Err(lines.err("truncated tree"));
    }
    Ok(Tree::from_nodes(nodes))
}
