use std::path::PathBuf;
use std::time::Instant;

use coverkit::mcc::{budget_count, extract_patch};
use coverkit::{sample_patches, SamplePlan};
use serde::Serialize;

use crate::{output, Outcome};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 2688)]
    pub width: u32,
    #[arg(long, default_value_t = 1536)]
    pub height: u32,
    #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
    pub patch_sizes: Vec<u32>,
    #[arg(long, default_value_t = 0.5)]
    pub budget_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timed runs per configuration; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub repeats: u32,
    /// Leave out all wall-clock measurements, making the report reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Config {
    pub command: &'static str,
    pub width: u32,
    pub height: u32,
    pub patch_sizes: Vec<u32>,
    pub budget_ratio: f64,
    pub seed: u64,
    pub repeats: u32,
    pub timing: bool,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub seconds: f64,
    pub patches_per_second: f64,
    pub pixels_per_second: f64,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub patch_size: u32,
    pub count: u32,
    pub sampled_pixels: u64,
    pub sampled_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: Config,
    pub image_pixels: u64,
    pub configurations: Vec<Row>,
    /// The first patch size at 1, 2, 4 and 8 times its budget count.
    pub scaling: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling_fit: Option<ScalingFit>,
}

/// Median wall time of sampling `count` patches and copying their pixels out.
fn time_run(pixels: &[u8], args: &Args, patch: u32, count: u32) -> anyhow::Result<f64> {
    let mut times = Vec::with_capacity(args.repeats as usize);
    for r in 0..args.repeats.max(1) {
        let plan = SamplePlan::new(coverkit::rng::child_seed(args.seed, u64::from(r)), args.width, args.height, patch, count)?;
        let start = Instant::now();
        let mut checksum = 0u64;
        for p in sample_patches(&plan)? {
            let data = extract_patch(pixels, args.width, args.height, 3, &p);
            checksum = checksum.wrapping_add(u64::from(data[data.len() / 2]));
        }
        std::hint::black_box(checksum);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

fn row(pixels: Option<&[u8]>, args: &Args, patch: u32, count: u32) -> anyhow::Result<Row> {
    let plan = SamplePlan::new(args.seed, args.width, args.height, patch, count)?;
    let sampled = plan.sampled_pixels();
    let timing = match pixels {
        Some(px) => {
            let seconds = time_run(px, args, patch, count)?.max(1e-9);
            Some(Timing {
                seconds,
                patches_per_second: f64::from(count) / seconds,
                pixels_per_second: sampled as f64 / seconds,
            })
        }
        None => None,
    };
    Ok(Row {
        patch_size: patch,
        count,
        sampled_pixels: sampled,
        sampled_fraction: sampled as f64 / (f64::from(args.width) * f64::from(args.height)),
        timing,
    })
}

/// Slope and R² of the least-squares line through `(x, y)`.
pub fn fit(x: &[f64], y: &[f64]) -> ScalingFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    ScalingFit {
        slope: sxy / sxx,
        r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 },
    }
}

pub fn build(args: &Args) -> anyhow::Result<Report> {
    anyhow::ensure!(!args.patch_sizes.is_empty(), "at least one patch size is required");
    let pixels: Option<Vec<u8>> = (!args.no_timing).then(|| {
        let (w, h) = (args.width as usize, args.height as usize);
        (0..w * h * 3).map(|i| (i % 251) as u8).collect()
    });
    let px = pixels.as_deref();
    let mut configurations = Vec::new();
    for &patch in &args.patch_sizes {
        let count = budget_count(args.width, args.height, patch, args.budget_ratio)?;
        configurations.push(row(px, args, patch, count)?);
    }
    let base = &configurations[0];
    let scaling = [1, 2, 4, 8]
        .into_iter()
        .map(|k| row(px, args, base.patch_size, base.count * k))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let scaling_fit = px.map(|_| {
        let x: Vec<f64> = scaling.iter().map(|r| (r.sampled_pixels as f64).ln()).collect();
        let y: Vec<f64> = scaling
            .iter()
            .map(|r| r.timing.as_ref().expect("timed").seconds.ln())
            .collect();
        fit(&x, &y)
    });
    Ok(Report {
        config: Config {
            command: "bench",
            width: args.width,
            height: args.height,
            patch_sizes: args.patch_sizes.clone(),
            budget_ratio: args.budget_ratio,
            seed: args.seed,
            repeats: args.repeats,
            timing: !args.no_timing,
        },
        image_pixels: u64::from(args.width) * u64::from(args.height),
        configurations,
        scaling,
        scaling_fit,
    })
}

pub fn run(args: &Args, pretty: bool) -> anyhow::Result<Outcome> {
    let report = build(args)?;
    output::emit(&report, args.out.as_deref(), pretty)?;
    Ok(Outcome::Clean)
}
