use std::time::Duration;

use crate::cloud::StructuredCloud;
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, STAGES};

#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub stage: &'static str,
    pub avg_ms: f64,
    pub max_ms: f64,
    pub min_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// The pipeline stages followed by `total`.
    pub stages: Vec<StageStats>,
    /// Timed runs (clouds × repetitions).
    pub runs: usize,
}

impl LatencyReport {
    pub fn stage(&self, name: &str) -> Option<&StageStats> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn total(&self) -> &StageStats {
        self.stages
            .last()
            .expect("report always ends with the total")
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Times every cloud `repetitions` times after `warmup` untimed passes
/// over the whole set. Runs on the calling thread.
pub fn bench_pipeline(
    clouds: &[StructuredCloud],
    pipeline: &Pipeline,
    repetitions: usize,
    warmup: usize,
) -> Result<LatencyReport> {
    if clouds.is_empty() || repetitions == 0 {
        return Err(Error::Param(
            "benchmark needs at least one cloud and one repetition".into(),
        ));
    }
    for _ in 0..warmup {
        for c in clouds {
            pipeline.run(c)?;
        }
    }
    let mut samples: Vec<[f64; 7]> = Vec::with_capacity(clouds.len() * repetitions);
    for _ in 0..repetitions {
        for c in clouds {
            let t = pipeline.run(c)?.timings;
            let mut row = [0.0; 7];
            for (slot, d) in row.iter_mut().zip(t.0) {
                *slot = ms(d);
            }
            row[6] = ms(t.total());
            samples.push(row);
        }
    }
    let names = STAGES.iter().copied().chain(std::iter::once("total"));
    let stages = names
        .enumerate()
        .map(|(i, stage)| {
            let col = samples.iter().map(|s| s[i]);
            StageStats {
                stage,
                avg_ms: col.clone().sum::<f64>() / samples.len() as f64,
                max_ms: col.clone().fold(f64::NEG_INFINITY, f64::max),
                min_ms: col.fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    Ok(LatencyReport {
        stages,
        runs: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SphericalPoint;
    use crate::pipeline::PipelineParams;

    fn bowl(cols: usize) -> StructuredCloud {
        let rows = 8;
        let points = (0..rows * cols)
            .map(|i| {
                let theta = -0.2 - 0.03 * (i / cols) as f64;
                let phi = (i % cols) as f64 * std::f64::consts::TAU / cols as f64;
                SphericalPoint::new(theta, phi, 2.0 / -theta.sin())
            })
            .collect();
        StructuredCloud::new(rows, cols, points).unwrap()
    }

    #[test]
    fn report_lists_every_stage_and_orders_stats() {
        let p = Pipeline::new(PipelineParams::default()).unwrap();
        let r = bench_pipeline(&[bowl(360), bowl(180)], &p, 2, 1).unwrap();
        let names: Vec<&str> = r.stages.iter().map(|s| s.stage).collect();
        assert_eq!(
            names,
            ["mesh", "normals", "segment", "densify", "features", "predict", "total"]
        );
        assert_eq!(r.runs, 4);
        for s in &r.stages {
            assert!(s.min_ms <= s.avg_ms && s.avg_ms <= s.max_ms, "{s:?}");
        }
        assert!(bench_pipeline(&[], &p, 1, 0).is_err());
    }
}
