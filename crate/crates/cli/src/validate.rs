use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use coverkit::dataset::{parse_manifest, validate_series, Finding, SpeciesRegistry, ValidationReport};
use serde::Serialize;

use crate::{output, read_text, Outcome};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Manifest CSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Species registry, one name per line.
    #[arg(long)]
    pub registry: PathBuf,
    /// Reference gaps longer than this many days are reported.
    #[arg(long, default_value_t = 14)]
    pub max_gap_days: u32,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Config {
    pub command: &'static str,
    pub manifest: String,
    pub registry: String,
    pub max_gap_days: u32,
}

#[derive(Debug, Serialize)]
pub struct SeriesEntry {
    #[serde(flatten)]
    pub report: ValidationReport,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: Config,
    pub epoch: Option<String>,
    pub series: Vec<SeriesEntry>,
    pub finding_count: usize,
}

pub fn load(manifest: &PathBuf, registry: &PathBuf) -> anyhow::Result<coverkit::Manifest> {
    let registry = SpeciesRegistry::parse(&read_text(registry)?)
        .with_context(|| format!("reading registry {}", registry.display()))?;
    parse_manifest(&read_text(manifest)?, &Arc::new(registry)).with_context(|| format!("parsing {}", manifest.display()))
}

pub fn build(args: &Args) -> anyhow::Result<Report> {
    let manifest = load(&args.manifest, &args.registry)?;
    let series: Vec<SeriesEntry> = manifest
        .series
        .iter()
        .map(|s| {
            let report = validate_series(s);
            let findings = report.findings(args.max_gap_days);
            SeriesEntry { report, findings }
        })
        .collect();
    Ok(Report {
        config: Config {
            command: "validate",
            manifest: args.manifest.display().to_string(),
            registry: args.registry.display().to_string(),
            max_gap_days: args.max_gap_days,
        },
        epoch: manifest.epoch.map(|d| d.to_string()),
        finding_count: series.iter().map(|s| s.findings.len()).sum(),
        series,
    })
}

pub fn run(args: &Args, pretty: bool) -> anyhow::Result<Outcome> {
    let report = build(args)?;
    output::emit(&report, args.out.as_deref(), pretty)?;
    Ok(if report.finding_count > 0 {
        Outcome::Findings
    } else {
        Outcome::Clean
    })
}
