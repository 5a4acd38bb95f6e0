use std::path::PathBuf;

use anyhow::{bail, Context};
use coverkit::metrics::{IouReport, SigmaVector};
use coverkit::ordination::{DcaConfig, DpcReport};
use coverkit::{dpc, iou, msae, species_sigma, SegMap};
use serde::Serialize;

use crate::covers::CoverTable;
use crate::{output, Outcome};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Target cover table (`image_id,<species...>`, percent).
    #[arg(long)]
    pub target: PathBuf,
    /// Predicted cover table with the same image ids and species.
    #[arg(long)]
    pub predicted: PathBuf,
    /// `target`, or a cover table whose rows define per-species sigma.
    #[arg(long, default_value = "target")]
    pub sigma_from: String,
    /// Predicted and true label maps as `PRED.png=TRUTH.png`; repeatable.
    #[arg(long = "segmap", value_name = "PRED=TRUTH")]
    pub segmaps: Vec<String>,
    #[arg(long, default_value_t = coverkit::ordination::DEFAULT_AXES)]
    pub n_axes: usize,
    #[arg(long, default_value_t = coverkit::ordination::DEFAULT_SEGMENTS)]
    pub n_segments: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Config {
    pub command: &'static str,
    pub target: String,
    pub predicted: String,
    pub sigma_from: String,
    pub segmaps: Vec<String>,
    pub dca: DcaConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeciesSigma {
    pub species: String,
    pub sigma: f64,
    pub floored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageScore {
    pub image_id: String,
    pub msae: f64,
}

/// Cover-based scores of one prediction table.
#[derive(Debug, Clone, Serialize)]
pub struct Scores {
    pub images: usize,
    pub msae: f64,
    pub per_image: Vec<ImageScore>,
    pub dpc: Option<DpcReport>,
    /// Why DPC could not be computed, when it could not.
    pub dpc_error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SegmapScore {
    pub predicted: String,
    pub truth: String,
    pub iou: IouReport,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: Config,
    pub sigma: Vec<SpeciesSigma>,
    #[serde(flatten)]
    pub scores: Scores,
    pub miou: Option<f64>,
    pub segmaps: Vec<SegmapScore>,
}

pub fn sigma_rows(sigma: &SigmaVector) -> Vec<SpeciesSigma> {
    sigma
        .iter()
        .map(|(species, value)| SpeciesSigma {
            species: species.to_string(),
            sigma: value,
            floored: sigma.floored.iter().any(|f| f == species),
        })
        .collect()
}

/// MSAE per image and its mean, plus DPC between the two tables. `predicted`
/// must already be aligned to `target`.
pub fn score(target: &CoverTable, predicted: &CoverTable, sigma: &SigmaVector, dca: DcaConfig) -> anyhow::Result<Scores> {
    if target.ids.is_empty() {
        bail!("no images to evaluate");
    }
    let per_image = target
        .ids
        .iter()
        .zip(target.covers.iter().zip(&predicted.covers))
        .map(|(id, (t, p))| {
            Ok(ImageScore {
                image_id: id.clone(),
                msae: msae(t, p, sigma)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mean = per_image.iter().map(|s| s.msae).sum::<f64>() / per_image.len() as f64;
    let (dpc_report, dpc_error) = match dpc(&target.matrix()?, &predicted.matrix()?, dca) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Scores {
        images: per_image.len(),
        msae: mean,
        per_image,
        dpc: dpc_report,
        dpc_error,
    })
}

pub fn build(args: &Args) -> anyhow::Result<Report> {
    let target = CoverTable::read(&args.target)?;
    let predicted = CoverTable::read(&args.predicted)?
        .aligned_to(&target.registry, &target.ids)
        .with_context(|| format!("{} does not match {}", args.predicted.display(), args.target.display()))?;
    let sigma_source = if args.sigma_from == "target" {
        target.clone()
    } else {
        let path = PathBuf::from(&args.sigma_from);
        let table = CoverTable::read(&path)?;
        let ids = table.ids.clone();
        table.aligned_to(&target.registry, &ids)?
    };
    let sigma = species_sigma(&sigma_source.covers)?;
    let dca = DcaConfig {
        n_axes: args.n_axes,
        n_segments: args.n_segments,
    };
    let scores = score(&target, &predicted, &sigma, dca)?;

    let mut segmaps = Vec::new();
    for pair in &args.segmaps {
        let Some((pred, truth)) = pair.split_once('=') else {
            bail!("--segmap expects PRED=TRUTH, got {pair:?}");
        };
        let p = SegMap::read_png(pred.as_ref())?;
        let t = SegMap::read_png(truth.as_ref())?;
        segmaps.push(SegmapScore {
            predicted: pred.to_string(),
            truth: truth.to_string(),
            iou: iou(&p, &t).with_context(|| format!("comparing {pred} with {truth}"))?,
        });
    }
    let means: Vec<f64> = segmaps.iter().filter_map(|s| s.iou.mean).collect();
    let miou = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);

    Ok(Report {
        config: Config {
            command: "evaluate",
            target: args.target.display().to_string(),
            predicted: args.predicted.display().to_string(),
            sigma_from: args.sigma_from.clone(),
            segmaps: args.segmaps.clone(),
            dca,
        },
        sigma: sigma_rows(&sigma),
        scores,
        miou,
        segmaps,
    })
}

pub fn run(args: &Args, pretty: bool) -> anyhow::Result<Outcome> {
    let report = build(args)?;
    output::emit(&report, args.out.as_deref(), pretty)?;
    Ok(Outcome::Clean)
}
