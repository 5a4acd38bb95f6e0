//! Synthetic end-to-end run. Child seeds of `--seed`:
//!
//! | index | use |
//! |-------|-----|
//! | 0 | layout of the built-in growth script |
//! | 1 | scene and patches of the estimator sweep |
//! | 2 | evaluation scenes (scene `i` gets child `i`) |
//! | 3 | evaluation patches (scene `i` gets child `i`) |

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use coverkit::mcc::estimate_cover;
use coverkit::ordination::DcaConfig;
use coverkit::rng::child_seed;
use coverkit::synthetic::{generate_scenes, GrowingShape, GrowthScript, OracleCover, SceneConfig, Shape, VisibleCover};
use coverkit::{
    generate_scene, grow_series, interpolate_series, msae, sample_patches, species_sigma, CoverVector,
    InterpolationPolicy, LayeredScene, SampleMode, SamplePlan,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::covers::CoverTable;
use crate::evaluate::{score, sigma_rows, Scores, SpeciesSigma};
use crate::{output, Outcome};

pub const OCCLUDED_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Growth script JSON; defaults to three linearly widening rectangles.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Number of evaluation scenes.
    #[arg(long, default_value_t = 20)]
    pub scenes: usize,
    #[arg(long, default_value_t = 256)]
    pub scene_size: u32,
    #[arg(long, default_value_t = 4)]
    pub species: usize,
    /// Fewest shapes a species gets in an evaluation scene.
    #[arg(long, default_value_t = 0)]
    pub min_shapes: u32,
    #[arg(long, default_value_t = 5)]
    pub max_shapes: u32,
    #[arg(long, default_value_t = 128)]
    pub patch_size: u32,
    /// Patches per evaluation scene.
    #[arg(long, default_value_t = 65536)]
    pub patches: u32,
    /// Patch counts of the estimator-error sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64,256")]
    pub sweep: Vec<u32>,
    /// Repetitions per sweep point.
    #[arg(long, default_value_t = 400)]
    pub trials: u64,
    #[arg(long, default_value_t = 14)]
    pub max_gap_days: u32,
    #[arg(long, default_value_t = coverkit::ordination::DEFAULT_AXES)]
    pub n_axes: usize,
    #[arg(long, default_value_t = coverkit::ordination::DEFAULT_SEGMENTS)]
    pub n_segments: usize,
    /// Also write scene bundles, cover tables and manifests here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Config {
    pub command: &'static str,
    pub seed: u64,
    pub script: Option<String>,
    pub scene: SceneConfig,
    pub scenes: usize,
    pub patch_size: u32,
    pub patches: u32,
    pub mode: SampleMode,
    pub sweep: Vec<u32>,
    pub trials: u64,
    pub policy: InterpolationPolicy,
    pub dca: DcaConfig,
    pub out_dir: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct InterpolationSummary {
    pub days: usize,
    pub reference_records: usize,
    pub interpolated_records: usize,
    pub annotated_records: usize,
    /// Largest absolute cover difference between an interpolated label and
    /// the held-out truth of that day.
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub n: u32,
    pub rmse: f64,
    pub rmse_sqrt_n: f64,
}

#[derive(Debug, Serialize)]
pub struct EstimatorSummary {
    pub true_cover: CoverVector,
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of ln(rmse) against ln(n).
    pub slope: f64,
}

#[derive(Debug, Serialize)]
pub struct SceneScore {
    pub scene: String,
    pub occluded_fraction: f64,
    pub oracle_msae: f64,
    pub visible_msae: f64,
    /// MSAE of each predictor against the top-layer (visible) cover.
    pub oracle_to_visible_msae: f64,
    pub visible_to_visible_msae: f64,
}

#[derive(Debug, Serialize)]
pub struct MetricSummary {
    pub sigma: Vec<SpeciesSigma>,
    pub oracle: Scores,
    pub visible: Scores,
    pub scenes: Vec<SceneScore>,
    pub occluded_threshold: f64,
    pub occluded_scenes: usize,
    /// Occluded scenes where the visible-only predictor has the larger MSAE.
    pub visible_worse_on_occluded: usize,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: Config,
    pub interpolation: InterpolationSummary,
    pub estimator: EstimatorSummary,
    pub metrics: MetricSummary,
}

const BUILTIN_SPECIES: [&str; 3] = ["Trifolium", "Achillea", "Grasses"];

/// Three rectangles widening by whole pixels per day, so each species'
/// cover is exactly linear in time.
pub fn builtin_script(seed: u64) -> GrowthScript {
    let rect = |x: f64, y: f64, w: f64, h: f64| Shape::Rect { x, y, w, h };
    let shapes = [
        ("Trifolium", rect(8.0, 8.0, 20.0, 120.0)),
        ("Achillea", rect(40.0, 100.0, 16.0, 96.0)),
        ("Grasses", rect(100.0, 30.0, 40.0, 200.0)),
    ];
    GrowthScript {
        width: 256,
        height: 256,
        species: BUILTIN_SPECIES.iter().map(|s| s.to_string()).collect(),
        rates: vec![2.0, 3.0, 1.0],
        first_day: 0,
        last_day: 56,
        seed,
        shapes: shapes
            .into_iter()
            .map(|(species, shape)| GrowingShape {
                species: species.to_string(),
                shape,
            })
            .collect(),
    }
}

pub fn scene_config(args: &Args) -> SceneConfig {
    let size = f64::from(args.scene_size);
    SceneConfig {
        width: args.scene_size,
        height: args.scene_size,
        species: (0..args.species).map(|i| format!("species_{i}")).collect(),
        shapes_per_species: (args.min_shapes, args.max_shapes),
        size_range: (size / 16.0, size / 5.0),
    }
}

fn interpolation_summary(script: &GrowthScript, policy: &InterpolationPolicy) -> anyhow::Result<(InterpolationSummary, coverkit::synthetic::GrownSeries)> {
    let grown = grow_series(script)?;
    let (dense, report) = interpolate_series(&grown.series, policy)?;
    let mut max_abs_error = 0.0f64;
    let mut total = 0.0;
    let mut cells = 0usize;
    for (record, truth) in dense.records().iter().zip(&grown.truths) {
        if let Some(a) = record.annotation.as_ref().filter(|a| !a.is_reference()) {
            for (got, want) in a.cover.values().iter().zip(truth.values()) {
                let e = (got - want).abs();
                max_abs_error = max_abs_error.max(e);
                total += e;
                cells += 1;
            }
        }
    }
    Ok((
        InterpolationSummary {
            days: grown.days.len(),
            reference_records: report.reference_records,
            interpolated_records: report.interpolated_records,
            annotated_records: dense.annotated_count(),
            max_abs_error,
            mean_abs_error: if cells > 0 { total / cells as f64 } else { 0.0 },
        },
        grown,
    ))
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Root-mean-square error of wrap-mode oracle estimates against true cover,
/// over `trials` independent patch sets per count.
pub fn estimator_sweep(
    scene: &LayeredScene,
    patch_size: u32,
    counts: &[u32],
    trials: u64,
    seed: u64,
) -> anyhow::Result<EstimatorSummary> {
    let truth = scene.true_cover();
    let mut points = Vec::with_capacity(counts.len());
    for (i, &n) in counts.iter().enumerate() {
        let point_seed = child_seed(seed, i as u64);
        let squared: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| -> anyhow::Result<f64> {
                let plan = SamplePlan::new(child_seed(point_seed, trial), scene.descriptor().width, scene.descriptor().height, patch_size, n)?
                    .with_mode(SampleMode::Wrap);
                let estimate = estimate_cover(&OracleCover, scene, &sample_patches(&plan)?)?;
                Ok(estimate
                    .values()
                    .iter()
                    .zip(truth.values())
                    .map(|(e, t)| (e - t) * (e - t))
                    .sum())
            })
            .collect::<anyhow::Result<_>>()?;
        let cells = (trials as usize * truth.len()) as f64;
        let rmse = (squared.iter().sum::<f64>() / cells).sqrt();
        points.push(SweepPoint {
            n,
            rmse,
            rmse_sqrt_n: rmse * f64::from(n).sqrt(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| f64::from(p.n).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.rmse.ln()).collect();
    Ok(EstimatorSummary {
        true_cover: truth.clone(),
        slope: slope(&xs, &ys),
        points,
    })
}

struct Estimates {
    oracle: Vec<CoverVector>,
    visible: Vec<CoverVector>,
}

fn estimate_scenes(scenes: &[LayeredScene], patch_size: u32, patches: u32, seed: u64) -> anyhow::Result<Estimates> {
    let pairs: Vec<(CoverVector, CoverVector)> = scenes
        .iter()
        .enumerate()
        .map(|(i, scene)| -> anyhow::Result<_> {
            let d = scene.descriptor();
            let plan = SamplePlan::new(child_seed(seed, i as u64), d.width, d.height, patch_size, patches)?
                .with_mode(SampleMode::Wrap);
            let specs = sample_patches(&plan)?;
            Ok((
                estimate_cover(&OracleCover, scene, &specs)?,
                estimate_cover(&VisibleCover, scene, &specs)?,
            ))
        })
        .collect::<anyhow::Result<_>>()?;
    let (oracle, visible) = pairs.into_iter().unzip();
    Ok(Estimates { oracle, visible })
}

pub fn build(args: &Args) -> anyhow::Result<Report> {
    let policy = InterpolationPolicy::new(args.max_gap_days)?;
    let dca = DcaConfig {
        n_axes: args.n_axes,
        n_segments: args.n_segments,
    };
    let script = match &args.script {
        Some(path) => {
            let text = crate::read_text(path)?;
            serde_json::from_str::<GrowthScript>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => builtin_script(child_seed(args.seed, 0)),
    };
    let (interpolation, grown) = interpolation_summary(&script, &policy)?;

    let config = scene_config(args);
    let sweep_scene = generate_scene(child_seed(args.seed, 1), &config)?;
    let estimator = estimator_sweep(&sweep_scene, args.patch_size, &args.sweep, args.trials, child_seed(args.seed, 1))?;

    let scenes = generate_scenes(child_seed(args.seed, 2), &config, args.scenes)?;
    let estimates = estimate_scenes(&scenes, args.patch_size, args.patches, child_seed(args.seed, 3))?;
    let registry = Arc::clone(scenes.first().context("at least one scene is required")?.registry());
    let ids: Vec<String> = (0..scenes.len()).map(|i| format!("scene_{i:03}")).collect();
    let table = |covers: Vec<CoverVector>| CoverTable::new(Arc::clone(&registry), ids.clone(), covers);
    let target = table(scenes.iter().map(|s| s.true_cover().clone()).collect());
    let oracle = table(estimates.oracle);
    let visible = table(estimates.visible);
    let sigma = species_sigma(&target.covers)?;
    let oracle_scores = score(&target, &oracle, &sigma, dca)?;
    let visible_scores = score(&target, &visible, &sigma, dca)?;

    let mut scene_scores = Vec::with_capacity(scenes.len());
    for (i, scene) in scenes.iter().enumerate() {
        let seen = scene.visible_cover();
        scene_scores.push(SceneScore {
            scene: ids[i].clone(),
            occluded_fraction: scene.occluded_fraction(),
            oracle_msae: oracle_scores.per_image[i].msae,
            visible_msae: visible_scores.per_image[i].msae,
            oracle_to_visible_msae: msae(&seen, &oracle.covers[i], &sigma)?,
            visible_to_visible_msae: msae(&seen, &visible.covers[i], &sigma)?,
        });
    }
    let occluded: Vec<&SceneScore> = scene_scores
        .iter()
        .filter(|s| s.occluded_fraction >= OCCLUDED_THRESHOLD)
        .collect();
    let visible_worse = occluded.iter().filter(|s| s.visible_msae > s.oracle_msae).count();

    if let Some(dir) = &args.out_dir {
        write_artifacts(dir, &scenes, &ids, &target, &oracle, &visible, &grown)?;
    }

    Ok(Report {
        config: Config {
            command: "simulate",
            seed: args.seed,
            script: args.script.as_ref().map(|p| p.display().to_string()),
            scene: config,
            scenes: args.scenes,
            patch_size: args.patch_size,
            patches: args.patches,
            mode: SampleMode::Wrap,
            sweep: args.sweep.clone(),
            trials: args.trials,
            policy,
            dca,
            out_dir: args.out_dir.as_ref().map(|p| p.display().to_string()),
        },
        interpolation,
        estimator,
        metrics: MetricSummary {
            sigma: sigma_rows(&sigma),
            oracle: oracle_scores,
            visible: visible_scores,
            occluded_threshold: OCCLUDED_THRESHOLD,
            occluded_scenes: occluded.len(),
            visible_worse_on_occluded: visible_worse,
            scenes: scene_scores,
        },
    })
}

fn write_artifacts(
    dir: &std::path::Path,
    scenes: &[LayeredScene],
    ids: &[String],
    target: &CoverTable,
    oracle: &CoverTable,
    visible: &CoverTable,
    grown: &coverkit::synthetic::GrownSeries,
) -> anyhow::Result<()> {
    for (scene, id) in scenes.iter().zip(ids) {
        scene.write_bundle(&dir.join("scenes"), id)?;
    }
    output::write_file(&dir.join("target.csv"), target.to_csv().as_bytes())?;
    output::write_file(&dir.join("oracle.csv"), oracle.to_csv().as_bytes())?;
    output::write_file(&dir.join("visible.csv"), visible.to_csv().as_bytes())?;
    let epoch = chrono_epoch();
    let registry = grown.truths[0].registry();
    let manifest = coverkit::Manifest {
        registry: Arc::clone(registry),
        epoch: Some(epoch),
        series: vec![grown.series.clone()],
    };
    output::write_file(&dir.join("growth_manifest.csv"), manifest.to_csv().as_bytes())?;
    let truth = coverkit::Manifest {
        series: vec![grown.truth_series()],
        ..manifest
    };
    output::write_file(&dir.join("growth_truth.csv"), truth.to_csv().as_bytes())?;
    let registry_text: String = registry.names().iter().map(|n| format!("{n}\n")).collect();
    output::write_file(&dir.join("growth_registry.txt"), registry_text.as_bytes())?;
    Ok(())
}

fn chrono_epoch() -> coverkit::dataset::NaiveDate {
    coverkit::dataset::NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

pub fn run(args: &Args, pretty: bool) -> anyhow::Result<Outcome> {
    let report = build(args)?;
    output::emit(&report, args.out.as_deref(), pretty)?;
    Ok(Outcome::Clean)
}
