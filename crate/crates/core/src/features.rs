//! Segment descriptors: point density followed by three normalised
//! histograms of the normal components.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::cloud::SemanticClass;
use crate::error::{Error, Result};
use crate::mesh::SubsampledCloud;
use crate::normals::NormalMap;
use crate::segment::LabelMap;

pub const DEFAULT_BINS: usize = 16;

/// Histogram bin of a normal component: `floor(b(x+1)/2)`, with `x = 1`
/// going to the last bin. Values outside `[-1, 1]` are clamped first.
#[inline]
pub fn bin_index(x: f64, bins: usize) -> usize {
    let x = x.clamp(-1.0, 1.0);
    if x >= 1.0 {
        return bins - 1;
    }
    ((bins as f64 * (x + 1.0) / 2.0).floor() as usize).min(bins - 1)
}

/// Length of the descriptor for `bins` bins per histogram.
pub const fn feature_dim(bins: usize) -> usize {
    3 * bins + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeature {
    values: Vec<f64>,
    bins: usize,
}

impl SegmentFeature {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || (values.len() - 1) % 3 != 0 {
            return Err(Error::Param(format!(
                "descriptor length {} is not 3b+1",
                values.len()
            )));
        }
        let bins = (values.len() - 1) / 3;
        Ok(SegmentFeature { values, bins })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn density(&self) -> f64 {
        self.values[0]
    }

    /// Histogram of component `axis` (0 = î, 1 = ĵ, 2 = k̂).
    pub fn histogram(&self, axis: usize) -> &[f64] {
        let start = 1 + axis * self.bins;
        &self.values[start..start + self.bins]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub segment_id: u32,
    /// Majority ground-truth class; only present for training data.
    pub class: Option<SemanticClass>,
    pub feature: SegmentFeature,
}

/// One descriptor per segment label, in ascending label order.
pub fn extract_features(
    labels: &LabelMap,
    normals: &NormalMap,
    bins: usize,
) -> Vec<LabeledFeature> {
    assert!(bins >= 1, "at least one bin");
    let segments = labels.segment_count() as usize;
    let total = normals.count();
    let mut counts = vec![0u32; segments];
    let mut hist = vec![0u32; segments * 3 * bins];
    for (idx, n) in normals.iter() {
        let label = labels.get(idx) as usize;
        if label == 0 {
            continue;
        }
        let s = label - 1;
        counts[s] += 1;
        let h = &mut hist[s * 3 * bins..(s + 1) * 3 * bins];
        for axis in 0..3 {
            h[axis * bins + bin_index(n[axis], bins)] += 1;
        }
    }

    let mut out = Vec::with_capacity(segments);
    for s in 0..segments {
        let count = counts[s];
        if count == 0 {
            warn!("segment {} has no normals, skipped", s + 1);
            continue;
        }
        let mut values = Vec::with_capacity(feature_dim(bins));
        values.push(count as f64 / total as f64);
        let inv = 1.0 / count as f64;
        values.extend(
            hist[s * 3 * bins..(s + 1) * 3 * bins]
                .iter()
                .map(|&c| c as f64 * inv),
        );
        out.push(LabeledFeature {
            segment_id: s as u32 + 1,
            class: None,
            feature: SegmentFeature { values, bins },
        });
    }
    out
}

/// Most frequent class; ties go to the lowest class code.
pub fn majority_class(classes: impl IntoIterator<Item = SemanticClass>) -> Result<SemanticClass> {
    let mut votes = [0usize; SemanticClass::COUNT];
    for c in classes {
        votes[c.index()] += 1;
    }
    let (best, count) = votes
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if count == 0 {
        return Err(Error::EmptySegment);
    }
    Ok(SemanticClass::ALL[best])
}

/// Sets each feature's class to the majority ground truth over the
/// segment's normal-bearing points. No-op when the cloud has no ground truth.
pub fn assign_majority_classes(
    features: &mut [LabeledFeature],
    labels: &LabelMap,
    normals: &NormalMap,
    sub: &SubsampledCloud<'_>,
) {
    let Some(gt) = sub.parent().ground_truth() else {
        return;
    };
    let segments = labels.segment_count() as usize;
    let mut votes = vec![[0usize; SemanticClass::COUNT]; segments];
    for (idx, _) in normals.iter() {
        let label = labels.get(idx) as usize;
        if label > 0 {
            votes[label - 1][gt[sub.parent_index(idx)].class.index()] += 1;
        }
    }
    for f in features.iter_mut() {
        let v = &votes[f.segment_id as usize - 1];
        let classes = v
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(SemanticClass::ALL[c], n));
        f.class = majority_class(classes).ok();
    }
}

pub fn write_features<W: Write>(features: &[LabeledFeature], w: &mut W) -> std::io::Result<()> {
    for f in features {
        write!(w, "{}", f.segment_id)?;
        match f.class {
            Some(c) => write!(w, " {}", c.code())?,
            None => write!(w, " ?")?,
        }
        for v in f.feature.as_slice() {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_features(features: &[LabeledFeature], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_features(features, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_features<R: BufRead>(reader: R, path: impl AsRef<Path>) -> Result<Vec<LabeledFeature>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let segment_id = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, lineno, "bad segment id"))?;
        let class = match tok.next() {
            Some("?") => None,
            Some(t) => Some(
                t.parse()
                    .ok()
                    .and_then(SemanticClass::from_code)
                    .ok_or_else(|| Error::parse(path, lineno, format!("bad class `{t}`")))?,
            ),
            None => return Err(Error::parse(path, lineno, "missing class")),
        };
        let values = tok
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(path, lineno, "bad feature value"))?;
        let feature = SegmentFeature::from_values(values)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if let Some(first) = out.first().map(|f: &LabeledFeature| f.feature.dim()) {
            if first != feature.dim() {
                return Err(Error::parse(
                    path,
                    lineno,
                    "descriptor length changes between lines",
                ));
            }
        }
        out.push(LabeledFeature {
            segment_id,
            class,
            feature,
        });
    }
    Ok(out)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<LabeledFeature>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(BufReader::new(file), path)
}
