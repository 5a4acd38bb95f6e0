//! coverkit: densify sparse plant-cover annotations over image time series,
//! estimate whole-image cover from randomly cropped patches, and score cover
//! predictions.
//!
//! Modules, bottom-up:
//!
//! - [`dataset`]: species registry, cover vectors, annotated image series and
//!   the manifest CSV format.
//! - [`interp`]: linear label interpolation between consecutive reference
//!   annotations.
//! - [`grid`]: binary membership grids and summed-area tables.
//! - [`mcc`]: Monte-Carlo Cropping (patch sampling, pixel budgets, patch-mean
//!   cover estimates and their exact expectation).
//! - [`metrics`]: per-species sigma, scaled absolute error, IoU on label maps.
//! - [`ordination`]: correspondence analysis, detrending by segments,
//!   symmetric Procrustes and the DCA-Procrustes correlation.
//! - [`synthetic`]: layered synthetic scenes with exactly known cover, oracle
//!   predictors and linear-growth series.
//! - [`rng`]: the seeded generator and child-seed derivation used everywhere.

pub mod dataset;
pub mod grid;
pub mod interp;
pub mod mcc;
pub mod metrics;
pub mod ordination;
pub mod rng;
pub mod synthetic;

pub use dataset::{
    parse_manifest, Annotation, CoverVector, ImageRecord, Manifest, PlotSeries, Provenance, SpeciesRegistry,
};
pub use interp::{interpolate_pair, interpolate_series, InterpolationPolicy};
pub use mcc::{
    budget_count, estimate_cover, patch_expectation, sample_patches, CoverPredictor, PatchSpec,
    SampleMode, SamplePlan,
};
pub use metrics::{iou, msae, species_sigma, SegMap, SigmaVector};
pub use ordination::{ca_axis, dca, dpc, procrustes, AbundanceMatrix, Ordination};
pub use synthetic::{generate_scene, grow_series, LayeredScene};
