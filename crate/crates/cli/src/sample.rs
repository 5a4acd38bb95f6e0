use std::path::PathBuf;

use anyhow::Context;
use coverkit::mcc::budget_count;
use coverkit::{sample_patches, PatchSpec, SampleMode, SamplePlan};
use image::{Rgb, RgbImage};
use serde::Serialize;

use crate::{output, Outcome};

#[derive(Debug, Clone, clap::Args)]
#[command(group(clap::ArgGroup::new("amount").required(true).args(["count", "budget_ratio"])))]
#[command(group(clap::ArgGroup::new("extent").required(true).args(["image", "width"])))]
pub struct Args {
    /// PNG or JPEG image; its dimensions define the sampling window.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Image width when no image is given.
    #[arg(long, requires = "height")]
    pub width: Option<u32>,
    #[arg(long, requires = "width")]
    pub height: Option<u32>,
    /// Side length of the square patches.
    #[arg(long)]
    pub patch_size: u32,
    /// Number of patches.
    #[arg(long)]
    pub count: Option<u32>,
    /// Sampled pixels over image pixels; the count is derived from it.
    #[arg(long)]
    pub budget_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample positions anywhere on the image and let patches wrap around.
    #[arg(long)]
    pub wrap: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Draw patch outlines over the image (or a black canvas) into this PNG.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Config {
    pub command: &'static str,
    pub image: Option<String>,
    pub width: u32,
    pub height: u32,
    pub patch_size: u32,
    pub count: Option<u32>,
    pub budget_ratio: Option<f64>,
    pub seed: u64,
    pub mode: SampleMode,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: Config,
    pub patch_count: u32,
    pub sampled_pixels: u64,
    pub image_pixels: u64,
    pub sampled_fraction: f64,
    pub patches: Vec<PatchSpec>,
}

const OUTLINE_COLOURS: [[u8; 3]; 6] = [
    [255, 64, 64],
    [64, 200, 64],
    [64, 128, 255],
    [255, 200, 0],
    [200, 64, 255],
    [0, 220, 220],
];

/// Outlines `patch` on `canvas`, wrapping around the edges.
pub fn draw_outline(canvas: &mut RgbImage, patch: &PatchSpec, colour: Rgb<u8>) {
    let (w, h) = canvas.dimensions();
    let mut put = |dx: u32, dy: u32| canvas.put_pixel((patch.x + dx) % w, (patch.y + dy) % h, colour);
    for dx in 0..patch.w {
        put(dx, 0);
        put(dx, patch.h - 1);
    }
    for dy in 0..patch.h {
        put(0, dy);
        put(patch.w - 1, dy);
    }
}

pub fn build(args: &Args) -> anyhow::Result<Report> {
    let (width, height) = match (&args.image, args.width, args.height) {
        (Some(path), _, _) => image::image_dimensions(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(w), Some(h)) => (w, h),
        _ => anyhow::bail!("either --image or both --width and --height are required"),
    };
    let count = match (args.count, args.budget_ratio) {
        (Some(n), None) => n,
        (None, Some(ratio)) => budget_count(width, height, args.patch_size, ratio)?,
        _ => anyhow::bail!("exactly one of --count and --budget-ratio is required"),
    };
    let mode = if args.wrap { SampleMode::Wrap } else { SampleMode::Clamped };
    let plan = SamplePlan::new(args.seed, width, height, args.patch_size, count)?.with_mode(mode);
    let patches = sample_patches(&plan)?;
    let image_pixels = u64::from(width) * u64::from(height);
    Ok(Report {
        config: Config {
            command: "sample",
            image: args.image.as_ref().map(|p| p.display().to_string()),
            width,
            height,
            patch_size: args.patch_size,
            count: args.count,
            budget_ratio: args.budget_ratio,
            seed: args.seed,
            mode,
        },
        patch_count: count,
        sampled_pixels: plan.sampled_pixels(),
        image_pixels,
        sampled_fraction: plan.sampled_pixels() as f64 / image_pixels as f64,
        patches,
    })
}

pub fn run(args: &Args, pretty: bool) -> anyhow::Result<Outcome> {
    let report = build(args)?;
    if let Some(path) = &args.overlay {
        let mut canvas = match &args.image {
            Some(image) => image::open(image)
                .with_context(|| format!("decoding {}", image.display()))?
                .to_rgb8(),
            None => RgbImage::new(report.config.width, report.config.height),
        };
        for (i, patch) in report.patches.iter().enumerate() {
            draw_outline(&mut canvas, patch, Rgb(OUTLINE_COLOURS[i % OUTLINE_COLOURS.len()]));
        }
        canvas.save(path).with_context(|| format!("writing {}", path.display()))?;
    }
    output::emit(&report, args.out.as_deref(), pretty)?;
    Ok(Outcome::Clean)
}
