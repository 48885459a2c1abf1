use super::{Samples, N_CLASSES};

/// Vote shares among the `k` nearest stored samples (Euclidean). Equal
/// distances keep training order.
pub(crate) fn votes(samples: &Samples, k: usize, x: &[f64]) -> [f64; N_CLASSES] {
    let mut dist: Vec<(f64, usize)> = (0..samples.len())
        .map(|i| {
            let d = samples
                .row(i)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            (d, i)
        })
        .collect();
    let k = k.min(dist.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, cmp);
    }
    let mut out = [0.0; N_CLASSES];
    for &(_, i) in &dist[..k] {
        out[samples.y[i]] += 1.0 / k as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_neighbours_vote() {
        let samples = Samples {
            x: vec![0.0, 1.0, 2.0, 10.0, 11.0],
            y: vec![0, 0, 3, 3, 3],
            dim: 1,
        };
        assert_eq!(
            votes(&samples, 3, &[0.5]),
            [2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0, 0.0]
        );
        assert_eq!(votes(&samples, 1, &[10.6])[3], 1.0);
        // k larger than the training set uses everything
        assert_eq!(votes(&samples, 9, &[0.0])[0], 0.4);
    }
}
