use std::path::PathBuf;

use anyhow::Context;
use coverkit::interp::{InterpError, InterpolationReport};
use coverkit::{interpolate_series, InterpolationPolicy};
use serde::Serialize;

use crate::{output, validate, Outcome};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub registry: PathBuf,
    /// Reference pairs further apart than this are left unlabelled.
    #[arg(long, default_value_t = 14)]
    pub max_gap_days: u32,
    /// Densified manifest destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Config {
    pub command: &'static str,
    pub manifest: String,
    pub registry: String,
    pub out: String,
    pub policy: InterpolationPolicy,
}

#[derive(Debug, Serialize)]
pub struct SkippedSeries {
    pub unit_id: String,
    pub camera_id: String,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct Totals {
    pub records: usize,
    pub reference_records: usize,
    pub interpolated_records: usize,
    pub annotated_records: usize,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: Config,
    pub totals: Totals,
    pub series: Vec<InterpolationReport>,
    /// Series passed through unchanged because they cannot be interpolated.
    pub skipped_series: Vec<SkippedSeries>,
}

pub fn run(args: &Args, pretty: bool) -> anyhow::Result<Outcome> {
    let policy = InterpolationPolicy::new(args.max_gap_days)?;
    let manifest = validate::load(&args.manifest, &args.registry)?;
    let mut densified = Vec::with_capacity(manifest.series.len());
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for series in &manifest.series {
        match interpolate_series(series, &policy) {
            Ok((out, report)) => {
                densified.push(out);
                reports.push(report);
            }
            Err(e @ InterpError::TooFewReferences { .. }) => {
                skipped.push(SkippedSeries {
                    unit_id: series.unit_id().to_string(),
                    camera_id: series.camera_id().to_string(),
                    reason: e.to_string(),
                });
                densified.push(series.clone());
            }
            Err(e) => {
                return Err(e).with_context(|| format!("interpolating ({}, {})", series.unit_id(), series.camera_id()))
            }
        }
    }

    let densified = coverkit::Manifest {
        registry: manifest.registry.clone(),
        epoch: manifest.epoch,
        series: densified,
    };
    output::write_file(&args.out, densified.to_csv().as_bytes())?;
    let densified = densified.series;

    let totals = Totals {
        records: densified.iter().map(|s| s.records().len()).sum(),
        reference_records: densified.iter().map(|s| s.reference_count()).sum(),
        interpolated_records: reports.iter().map(|r| r.interpolated_records).sum(),
        annotated_records: densified.iter().map(|s| s.annotated_count()).sum(),
    };
    let report = Report {
        config: Config {
            command: "interpolate",
            manifest: args.manifest.display().to_string(),
            registry: args.registry.display().to_string(),
            out: args.out.display().to_string(),
            policy,
        },
        totals,
        series: reports,
        skipped_series: skipped,
    };
    output::emit(&report, args.report.as_deref(), pretty)?;
    Ok(Outcome::Clean)
}
