use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use rayon::prelude::*;
use surfseg::classifier::{load_model, save_model, train as train_model, TrainParams};
use surfseg::cloud::{export_ply, load_cloud};
use surfseg::eval::{
    bench_pipeline, classwise_prf, edge_f1_cloud, format_latency_table, format_metrics_table,
    semantic_confusion, write_latency_csv, write_metrics_csv, ConfusionMatrix,
};
use surfseg::features::save_features;
use surfseg::sim::{
    generate_dataset, DatasetConfig, LidarSpec, Manifest, ManifestEntry, Mirror, Split,
};
use surfseg::{
    LabeledFeature, Pipeline, PipelineParams, SegmentationParams, SemanticClass, StructuredCloud,
};

use crate::{BenchArgs, CliError, EvalArgs, GenArgs, PipelineArgs, SegmentArgs, TrainArgs};

type Result<T> = std::result::Result<T, CliError>;

/// Class given to valid cells that the pipeline could not classify.
const UNCLASSIFIED: SemanticClass = SemanticClass::Plane;

fn pipeline_params(a: &PipelineArgs) -> Result<PipelineParams> {
    let params = PipelineParams {
        k_interval: a.interval,
        segmentation: SegmentationParams::new(a.theta_thres, a.dist_thres)?,
        bins: a.bins,
    };
    params.validate()?;
    Ok(params)
}

fn build_pipeline(a: &PipelineArgs, model: Option<&Path>) -> Result<Pipeline> {
    let p = Pipeline::new(pipeline_params(a)?)?;
    match model {
        Some(path) => Ok(p.with_model(load_model(path)?)?),
        None => Ok(p),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn gen(a: GenArgs) -> Result<()> {
    let config = DatasetConfig {
        scenes: a.scenes,
        shifts: a.shifts,
        augment: !a.no_augment,
        lidar: LidarSpec {
            noise_sigma: a.noise,
            horizontal_step: a.step.to_radians(),
            ..LidarSpec::default()
        },
        seed: a.seed.seed,
        ..DatasetConfig::default()
    };
    let manifest = generate_dataset(&config, &a.out)?;
    let count = |s| manifest.split(s).count();
    println!(
        "wrote {} manifest entries to {} (train {}, val {}, test {})",
        manifest.entries.len(),
        a.out.join("manifest.txt").display(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

pub fn segment(a: SegmentArgs) -> Result<()> {
    let pipeline = build_pipeline(&a.pipeline, a.model.as_deref())?;
    let cloud = load_cloud(&a.cloud)?;
    let out = pipeline.run(&cloud)?;
    write_file(&a.labels, |w| out.dense_labels.write_dump(w))?;
    if let Some(path) = &a.features {
        save_features(&out.features, path)?;
    }
    if let Some(path) = &a.classes {
        write_file(path, |w| {
            for (i, c) in out.segment_classes.iter().enumerate() {
                if let Some(c) = c {
                    writeln!(w, "{} {}", i + 1, c.name())?;
                }
            }
            Ok(())
        })?;
    }
    if let Some(path) = &a.ply {
        let classes: Vec<SemanticClass> = out
            .point_classes()
            .iter()
            .map(|c| c.unwrap_or(UNCLASSIFIED))
            .collect();
        export_ply(&cloud, &classes, path)?;
    }
    println!(
        "{} segments, {} of {} valid points labelled",
        out.dense_labels.segment_count(),
        out.dense_labels
            .labels()
            .iter()
            .filter(|l| **l != 0)
            .count(),
        cloud.valid_count()
    );
    Ok(())
}

/// Loads each entry (mirrored as listed) and maps it in parallel, keeping
/// manifest order.
fn map_entries<T: Send>(
    manifest: &Manifest,
    entries: &[&ManifestEntry],
    jobs: usize,
    f: impl Fn(&StructuredCloud) -> surfseg::Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = thread_pool(jobs)?;
    let results: Vec<surfseg::Result<T>> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| manifest.load_entry(e).and_then(|c| f(&c)))
            .collect()
    });
    Ok(results.into_iter().collect::<surfseg::Result<Vec<T>>>()?)
}

fn semantic_report(
    manifest: &Manifest,
    entries: &[&ManifestEntry],
    pipeline: &Pipeline,
    jobs: usize,
) -> Result<ConfusionMatrix> {
    let parts = map_entries(manifest, entries, jobs, |c| {
        let out = pipeline.run(c)?;
        semantic_confusion(&out, c, UNCLASSIFIED)
    })?;
    let mut total = ConfusionMatrix::new();
    parts.iter().for_each(|m| total.merge(m));
    Ok(total)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let pipeline = build_pipeline(&a.pipeline, None)?;
    let entries: Vec<&ManifestEntry> = manifest.split(Split::Train).collect();
    if entries.is_empty() {
        return Err(CliError::Usage("manifest has no training entries".into()));
    }
    let per_cloud = map_entries(&manifest, &entries, a.jobs, |c| {
        pipeline.training_features(c)
    })?;
    let features: Vec<LabeledFeature> = per_cloud.into_iter().flatten().collect();
    info!(
        "training on {} segments from {} scans",
        features.len(),
        entries.len()
    );
    let params = TrainParams {
        variant: a.classifier,
        n_trees: a.trees,
        max_depth: a.max_depth,
        min_samples_split: a.min_samples_split,
        max_features: a.max_features,
        k: a.k,
        seed: a.seed.seed,
    };
    let model = train_model(&features, &params)?;
    save_model(&model, &a.model)?;
    println!(
        "trained {} on {} segments -> {}",
        a.classifier,
        features.len(),
        a.model.display()
    );

    let val: Vec<&ManifestEntry> = manifest.split(Split::Val).collect();
    if val.is_empty() {
        return Ok(());
    }
    let pipeline = pipeline.with_model(model)?;
    let conf = semantic_report(&manifest, &val, &pipeline, a.jobs)?;
    let (iou, prf) = (conf.miou(), classwise_prf(&conf));
    println!(
        "validation ({} scans)\n{}",
        val.len(),
        format_metrics_table(&iou, &prf)
    );
    if let Some(path) = &a.report {
        write_file(path, |w| write_metrics_csv(w, &iou, &prf))?;
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let pipeline = build_pipeline(&a.pipeline, a.model.as_deref())?;
    // mirrored copies are training augmentation, not extra test data
    let entries: Vec<&ManifestEntry> = manifest
        .split(a.split)
        .filter(|e| e.mirror == Mirror::None)
        .collect();
    if entries.is_empty() {
        return Err(CliError::Usage(format!(
            "manifest has no {} entries",
            a.split
        )));
    }
    let scores = map_entries(&manifest, &entries, a.jobs, |c| {
        let out = pipeline.run(c)?;
        let edges = edge_f1_cloud(&out.dense_labels, c, a.dilate)?;
        let conf = if pipeline.model().is_some() {
            Some(semantic_confusion(&out, c, UNCLASSIFIED)?)
        } else {
            None
        };
        Ok((edges, conf))
    })?;
    let n = scores.len() as f64;
    let mean =
        |f: fn(&surfseg::eval::EdgeScore) -> f64| scores.iter().map(|(e, _)| f(e)).sum::<f64>() / n;
    let (p, r, f1) = (mean(|e| e.precision), mean(|e| e.recall), mean(|e| e.f1));
    println!(
        "edges over {} scans (interval {}, dilation {}): precision {p:.4} recall {r:.4} f1 {f1:.4}",
        scores.len(),
        a.pipeline.interval,
        a.dilate
    );
    if let Some(path) = &a.edge_csv {
        write_file(path, |w| {
            writeln!(w, "precision,recall,f1,clouds")?;
            writeln!(w, "{p:.6},{r:.6},{f1:.6},{}", scores.len())
        })?;
    }
    if pipeline.model().is_none() {
        if a.csv.is_some() {
            return Err(CliError::Usage("--csv needs --model".into()));
        }
        return Ok(());
    }
    let mut conf = ConfusionMatrix::new();
    scores
        .iter()
        .filter_map(|(_, c)| c.as_ref())
        .for_each(|m| conf.merge(m));
    let (iou, prf) = (conf.miou(), classwise_prf(&conf));
    println!("{}", format_metrics_table(&iou, &prf));
    if let Some(path) = &a.csv {
        write_file(path, |w| write_metrics_csv(w, &iou, &prf))?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let pipeline = build_pipeline(&a.pipeline, a.model.as_deref())?;
    let mut clouds = Vec::new();
    if let Some(path) = &a.manifest {
        let manifest = Manifest::load(path)?;
        for e in manifest.split(a.split).filter(|e| e.mirror == Mirror::None) {
            if a.limit.is_some_and(|l| clouds.len() >= l) {
                break;
            }
            clouds.push(manifest.load_entry(e)?);
        }
    } else {
        for path in a.cloud.iter().take(a.limit.unwrap_or(usize::MAX)) {
            clouds.push(load_cloud(path)?);
        }
    }
    if clouds.is_empty() {
        return Err(CliError::Usage("no clouds to benchmark".into()));
    }
    let report = bench_pipeline(&clouds, &pipeline, a.reps, a.warmup)?;
    print!("{}", format_latency_table(&report));
    if let Some(path) = &a.csv {
        write_file(path, |w| write_latency_csv(w, &report))?;
    }
    Ok(())
}
