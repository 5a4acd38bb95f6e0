//! Monte-Carlo Cropping.
//!
//! Square patches are drawn uniformly (with replacement) from the valid
//! top-left positions of an image, a [`CoverPredictor`] scores each patch, and
//! the per-species mean over patches estimates the whole-image cover.
//!
//! The limit of that mean as the patch count grows is [`patch_expectation`],
//! the cover averaged over every valid patch position. Border pixels lie in
//! fewer patches than interior ones, so this differs from the whole-image
//! cover unless the patch spans the image. [`SampleMode::Wrap`] samples on the
//! torus instead, where every pixel lies in exactly `patch²` positions and the
//! limit is the whole-image cover.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CoverVector, DatasetError, SpeciesRegistry};
use crate::grid::{MembershipGrid, SummedAreaTable};
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum MccError {
    #[error("patch size must be positive")]
    ZeroPatch,
    #[error("patch size {patch} exceeds the {width}x{height} image")]
    PatchTooLarge { patch: u32, width: u32, height: u32 },
    #[error("patch count must be at least 1")]
    NoPatches,
    #[error("budget ratio must be positive and finite, got {0}")]
    BudgetRatio(f64),
    #[error("patch {index} {patch:?} does not fit the {width}x{height} image")]
    InvalidPatch {
        index: usize,
        patch: PatchSpec,
        width: u32,
        height: u32,
    },
    #[error("predictor failed on patch {index} {patch:?}: {source}")]
    Predictor {
        index: usize,
        patch: PatchSpec,
        source: PredictError,
    },
    #[error("predictions for patch {index} are keyed by a different species set")]
    KeyingMismatch { index: usize },
    #[error("membership grid {index} is {got_width}x{got_height}, expected {width}x{height}")]
    GridSize {
        index: usize,
        width: u32,
        height: u32,
        got_width: u32,
        got_height: u32,
    },
    #[error("{grids} membership grids for {species} species")]
    GridCount { grids: usize, species: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct PredictError(pub String);

/// Axis-aligned crop. On a `W × H` image a patch with `x + w > W` or
/// `y + h > H` continues from the opposite edge (wrap mode only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchSpec {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PatchSpec {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn pixels(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Lies entirely inside the image without wrapping.
    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }

    /// Valid as either a plain or a toroidal crop.
    pub fn is_valid_on(&self, width: u32, height: u32) -> bool {
        self.w >= 1 && self.h >= 1 && self.w <= width && self.h <= height && self.x < width && self.y < height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Top-left corners uniform over `[0, W-w] × [0, H-h]`.
    #[default]
    Clamped,
    /// Top-left corners uniform over `[0, W) × [0, H)`, patches wrap around.
    Wrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub patch_size: u32,
    pub count: u32,
    pub width: u32,
    pub height: u32,
    pub mode: SampleMode,
}

impl SamplePlan {
    pub fn new(seed: u64, width: u32, height: u32, patch_size: u32, count: u32) -> Result<Self, MccError> {
        let plan = Self {
            seed,
            patch_size,
            count,
            width,
            height,
            mode: SampleMode::Clamped,
        };
        plan.check()?;
        Ok(plan)
    }

    pub fn with_mode(mut self, mode: SampleMode) -> Self {
        self.mode = mode;
        self
    }

    fn check(&self) -> Result<(), MccError> {
        if self.patch_size == 0 {
            return Err(MccError::ZeroPatch);
        }
        if self.patch_size > self.width.min(self.height) {
            return Err(MccError::PatchTooLarge {
                patch: self.patch_size,
                width: self.width,
                height: self.height,
            });
        }
        if self.count == 0 {
            return Err(MccError::NoPatches);
        }
        Ok(())
    }

    /// Total pixels covered by all patches, overlaps counted repeatedly.
    pub fn sampled_pixels(&self) -> u64 {
        u64::from(self.count) * u64::from(self.patch_size).pow(2)
    }
}

/// Draws `plan.count` patches. For each patch the x coordinate is drawn before
/// the y coordinate, both from the plan's seeded stream.
pub fn sample_patches(plan: &SamplePlan) -> Result<Vec<PatchSpec>, MccError> {
    plan.check()?;
    let p = plan.patch_size;
    let (x_positions, y_positions) = match plan.mode {
        SampleMode::Clamped => (plan.width - p + 1, plan.height - p + 1),
        SampleMode::Wrap => (plan.width, plan.height),
    };
    let mut rng = SeededRng::new(plan.seed);
    Ok((0..plan.count)
        .map(|_| {
            let x = rng.below(u64::from(x_positions)) as u32;
            let y = rng.below(u64::from(y_positions)) as u32;
            PatchSpec::new(x, y, p, p)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRounding {
    /// Nearest power of two to the ideal count.
    #[default]
    PowerOfTwo,
    /// Nearest integer, ties away from zero.
    Nearest,
}

/// Patch count whose pixel total is about `budget_ratio · W · H`.
///
/// The ideal count `budget_ratio · W · H / patch²` is rounded to the nearest
/// power of two (in log space), which gives 8 patches of 512², 32 of 256²,
/// 2 of 1024² and 128 of 128² at ratio 0.5 on a 2688×1536 image.
pub fn budget_count(width: u32, height: u32, patch_size: u32, budget_ratio: f64) -> Result<u32, MccError> {
    budget_count_with(width, height, patch_size, budget_ratio, BudgetRounding::PowerOfTwo)
}

pub fn budget_count_with(
    width: u32,
    height: u32,
    patch_size: u32,
    budget_ratio: f64,
    rounding: BudgetRounding,
) -> Result<u32, MccError> {
    if !(budget_ratio.is_finite() && budget_ratio > 0.0) {
        return Err(MccError::BudgetRatio(budget_ratio));
    }
    if patch_size == 0 {
        return Err(MccError::ZeroPatch);
    }
    let ideal = budget_ratio * f64::from(width) * f64::from(height) / f64::from(patch_size).powi(2);
    let n = match rounding {
        BudgetRounding::Nearest => ideal.round(),
        BudgetRounding::PowerOfTwo => ideal.log2().round().exp2(),
    };
    Ok(n.clamp(1.0, f64::from(u32::MAX)) as u32)
}

pub trait RasterExtent {
    fn width(&self) -> u32;
    fn height(&self) -> u32;
}

/// Per-patch cover predictor over images of type `I`.
///
/// Must be deterministic for a fixed `(image, patch)` and safe to call from
/// several threads. Patches that run past the right or bottom edge wrap.
pub trait CoverPredictor<I: ?Sized>: Sync {
    fn predict(&self, image: &I, patch: &PatchSpec) -> Result<CoverVector, PredictError>;
}

impl<I: ?Sized, F> CoverPredictor<I> for F
where
    F: Fn(&I, &PatchSpec) -> Result<CoverVector, PredictError> + Sync,
{
    fn predict(&self, image: &I, patch: &PatchSpec) -> Result<CoverVector, PredictError> {
        self(image, patch)
    }
}

/// Mean of the per-patch predictions. Predictions may run in parallel; the
/// sum is always taken in patch order so the result is bit-reproducible.
pub fn estimate_cover<I, P>(predictor: &P, image: &I, patches: &[PatchSpec]) -> Result<CoverVector, MccError>
where
    I: RasterExtent + Sync + ?Sized,
    P: CoverPredictor<I> + ?Sized,
{
    if patches.is_empty() {
        return Err(MccError::NoPatches);
    }
    let (width, height) = (image.width(), image.height());
    if let Some((index, patch)) = patches
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_valid_on(width, height))
    {
        return Err(MccError::InvalidPatch {
            index,
            patch: *patch,
            width,
            height,
        });
    }

    let predictions: Vec<Result<CoverVector, PredictError>> =
        patches.par_iter().map(|p| predictor.predict(image, p)).collect();

    let mut sums: Option<(Arc<SpeciesRegistry>, Vec<f64>)> = None;
    for (index, (prediction, patch)) in predictions.into_iter().zip(patches).enumerate() {
        let cover = prediction.map_err(|source| MccError::Predictor {
            index,
            patch: *patch,
            source,
        })?;
        match &mut sums {
            None => sums = Some((Arc::clone(cover.registry()), cover.values().to_vec())),
            Some((registry, acc)) => {
                if cover.registry().as_ref() != registry.as_ref() {
                    return Err(MccError::KeyingMismatch { index });
                }
                for (a, v) in acc.iter_mut().zip(cover.values()) {
                    *a += v;
                }
            }
        }
    }
    let (registry, sums) = sums.expect("at least one patch");
    let n = patches.len() as f64;
    let mean = sums.into_iter().map(|s| (s / n).clamp(0.0, 1.0)).collect();
    Ok(CoverVector::new(registry, mean)?)
}

/// Exact expected patch cover under uniform sampling, one membership grid per
/// registry species. Uses summed-area tables, `O(W·H)` per species.
pub fn patch_expectation(
    registry: &Arc<SpeciesRegistry>,
    grids: &[MembershipGrid],
    patch_size: u32,
    mode: SampleMode,
) -> Result<CoverVector, MccError> {
    if grids.len() != registry.len() {
        return Err(MccError::GridCount {
            grids: grids.len(),
            species: registry.len(),
        });
    }
    let (width, height) = (grids[0].width(), grids[0].height());
    for (index, g) in grids.iter().enumerate() {
        if g.width() != width || g.height() != height {
            return Err(MccError::GridSize {
                index,
                width,
                height,
                got_width: g.width(),
                got_height: g.height(),
            });
        }
    }
    if patch_size == 0 {
        return Err(MccError::ZeroPatch);
    }
    if patch_size > width.min(height) {
        return Err(MccError::PatchTooLarge {
            patch: patch_size,
            width,
            height,
        });
    }
    let values = grids
        .iter()
        .map(|g| expectation_from_table(&SummedAreaTable::new(g), patch_size, mode))
        .collect();
    Ok(CoverVector::new(Arc::clone(registry), values)?)
}

/// Expected fraction of set cells in a `patch × patch` window over every
/// valid position, as a single rounding of the exact ratio of integers.
pub fn expectation_from_table(sat: &SummedAreaTable, patch: u32, mode: SampleMode) -> f64 {
    let (width, height) = (sat.width(), sat.height());
    let mut total: u128 = 0;
    let positions: u128 = match mode {
        SampleMode::Clamped => {
            for y in 0..=height - patch {
                for x in 0..=width - patch {
                    total += u128::from(sat.sum(x, y, x + patch, y + patch));
                }
            }
            u128::from(width - patch + 1) * u128::from(height - patch + 1)
        }
        SampleMode::Wrap => {
            for y in 0..height {
                for x in 0..width {
                    total += u128::from(sat.wrapped_sum(x, y, patch, patch));
                }
            }
            u128::from(width) * u128::from(height)
        }
    };
    let pixels = positions * u128::from(patch) * u128::from(patch);
    ratio_to_f64(total, pixels)
}

/// Nearest double to `num / den` for `num ≤ den`.
fn ratio_to_f64(num: u128, den: u128) -> f64 {
    if num == den {
        return 1.0;
    }
    if den < (1u128 << 53) {
        // Both operands exact, so the division rounds once.
        return num as f64 / den as f64;
    }
    // Reduce first; the rare remainder case loses at most one extra rounding.
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Copies the pixels of `patch` out of a row-major buffer with `channels`
/// interleaved samples per pixel, wrapping past the right and bottom edges.
pub fn extract_patch<T: Copy>(pixels: &[T], width: u32, height: u32, channels: usize, patch: &PatchSpec) -> Vec<T> {
    assert!(patch.is_valid_on(width, height), "patch outside image");
    assert_eq!(pixels.len(), width as usize * height as usize * channels);
    let mut out = Vec::with_capacity(patch.pixels() as usize * channels);
    let row_len = width as usize * channels;
    for dy in 0..patch.h {
        let y = (patch.y + dy) % height;
        let row = &pixels[y as usize * row_len..(y as usize + 1) * row_len];
        let x_end = patch.x + patch.w;
        if x_end <= width {
            out.extend_from_slice(&row[patch.x as usize * channels..x_end as usize * channels]);
        } else {
            out.extend_from_slice(&row[patch.x as usize * channels..]);
            out.extend_from_slice(&row[..(x_end - width) as usize * channels]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Grid1(MembershipGrid);

    impl RasterExtent for Grid1 {
        fn width(&self) -> u32 {
            self.0.width()
        }
        fn height(&self) -> u32 {
            self.0.height()
        }
    }

    fn one_species() -> Arc<SpeciesRegistry> {
        Arc::new(SpeciesRegistry::new(["A"]).unwrap())
    }

    fn counting_predictor(reg: Arc<SpeciesRegistry>) -> impl Fn(&Grid1, &PatchSpec) -> Result<CoverVector, PredictError> + Sync {
        move |img: &Grid1, p: &PatchSpec| {
            let mut hits = 0u64;
            for dy in 0..p.h {
                for dx in 0..p.w {
                    hits += u64::from(img.0.get((p.x + dx) % img.0.width(), (p.y + dy) % img.0.height()));
                }
            }
            CoverVector::new(reg.clone(), vec![hits as f64 / p.pixels() as f64]).map_err(|e| PredictError(e.to_string()))
        }
    }

    fn all_positions(width: u32, height: u32, patch: u32) -> Vec<PatchSpec> {
        (0..=height - patch)
            .flat_map(|y| (0..=width - patch).map(move |x| PatchSpec::new(x, y, patch, patch)))
            .collect()
    }

    #[test]
    fn published_pixel_budgets() {
        assert_eq!(budget_count(2688, 1536, 512, 0.5).unwrap(), 8);
        assert_eq!(budget_count(2688, 1536, 256, 0.5).unwrap(), 32);
        assert_eq!(budget_count(2688, 1536, 256, 0.25).unwrap(), 16);
        assert_eq!(budget_count(2688, 1536, 256, 1.0).unwrap(), 64);
        assert_eq!(budget_count(2688, 1536, 1024, 0.5).unwrap(), 2);
        assert_eq!(budget_count(2688, 1536, 128, 0.5).unwrap(), 128);
        assert_eq!(budget_count(2688, 1536, 512, 0.25).unwrap(), 4);
        assert_eq!(budget_count(2688, 1536, 512, 1.0).unwrap(), 16);
        assert_eq!(budget_count(64, 64, 64, 0.01).unwrap(), 1);
        assert!(budget_count(64, 64, 8, 0.0).is_err());
    }

    #[test]
    fn nearest_rounding_follows_the_plain_formula() {
        assert_eq!(budget_count_with(2688, 1536, 128, 0.5, BudgetRounding::Nearest).unwrap(), 126);
        assert_eq!(budget_count_with(2688, 1536, 256, 0.5, BudgetRounding::Nearest).unwrap(), 32);
    }

    #[test]
    fn samples_stay_inside_the_valid_range() {
        let plan = SamplePlan::new(11, 2688, 1536, 1024, 2).unwrap();
        let patches = sample_patches(&plan).unwrap();
        assert_eq!(patches.len(), 2);
        for p in patches {
            assert!(p.x <= 1664 && p.y <= 512);
            assert!(p.fits(2688, 1536));
        }
    }

    #[test]
    fn full_size_patch_has_one_position() {
        let plan = SamplePlan::new(5, 64, 64, 64, 7).unwrap();
        assert!(sample_patches(&plan).unwrap().iter().all(|p| *p == PatchSpec::full(64, 64)));
    }

    #[test]
    fn plan_errors() {
        assert!(matches!(SamplePlan::new(0, 2688, 1536, 2688, 1), Err(MccError::PatchTooLarge { .. })));
        assert!(matches!(SamplePlan::new(0, 64, 64, 8, 0), Err(MccError::NoPatches)));
        assert!(matches!(SamplePlan::new(0, 64, 64, 0, 1), Err(MccError::ZeroPatch)));
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = sample_patches(&SamplePlan::new(9, 500, 400, 32, 50).unwrap()).unwrap();
        let b = sample_patches(&SamplePlan::new(9, 500, 400, 32, 50).unwrap()).unwrap();
        let c = sample_patches(&SamplePlan::new(10, 500, 400, 32, 50).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrap_mode_reaches_every_corner() {
        let plan = SamplePlan::new(3, 4, 4, 2, 2000).unwrap().with_mode(SampleMode::Wrap);
        let patches = sample_patches(&plan).unwrap();
        assert!(patches.iter().any(|p| p.x == 3 && p.y == 3));
        assert!(patches.iter().all(|p| p.x < 4 && p.y < 4));
    }

    #[test]
    fn four_by_four_enumerations() {
        let reg = one_species();
        let predictor = counting_predictor(reg.clone());
        let half = Grid1(MembershipGrid::from_fn(4, 4, |x, _| x < 2));
        let column = Grid1(MembershipGrid::from_fn(4, 4, |x, _| x == 0));
        let patches = all_positions(4, 4, 2);
        assert_eq!(patches.len(), 9);
        assert_eq!(estimate_cover(&predictor, &half, &patches).unwrap().values(), &[0.5]);
        assert_eq!(estimate_cover(&predictor, &column, &patches).unwrap().values(), &[1.0 / 6.0]);
        assert_eq!(patch_expectation(&reg, std::slice::from_ref(&half.0), 2, SampleMode::Clamped).unwrap().values(), &[0.5]);
        assert_eq!(patch_expectation(&reg, std::slice::from_ref(&column.0), 2, SampleMode::Clamped).unwrap().values(), &[1.0 / 6.0]);
        assert_eq!(patch_expectation(&reg, std::slice::from_ref(&column.0), 2, SampleMode::Wrap).unwrap().values(), &[0.25]);
    }

    #[test]
    fn uniform_field_expectation_is_one() {
        let reg = one_species();
        let g = MembershipGrid::from_fn(9, 7, |_, _| true);
        for p in 1..=7 {
            assert_eq!(patch_expectation(&reg, std::slice::from_ref(&g), p, SampleMode::Clamped).unwrap().values(), &[1.0]);
        }
    }

    #[test]
    fn full_frame_patch_gives_true_cover() {
        let reg = one_species();
        let img = Grid1(MembershipGrid::from_fn(10, 6, |x, y| (x * y) % 4 == 1));
        let est = estimate_cover(&counting_predictor(reg), &img, &[PatchSpec::full(10, 6)]).unwrap();
        assert_eq!(est.values()[0], img.0.count() as f64 / 60.0);
    }

    #[test]
    fn predictor_failures_name_the_patch() {
        let reg = one_species();
        let img = Grid1(MembershipGrid::new(8, 8));
        let failing = move |_: &Grid1, p: &PatchSpec| {
            if p.x == 3 {
                Err(PredictError("boom".into()))
            } else {
                Ok(CoverVector::zeros(reg.clone()))
            }
        };
        let patches = [PatchSpec::new(0, 0, 2, 2), PatchSpec::new(3, 1, 2, 2), PatchSpec::new(3, 2, 2, 2)];
        match estimate_cover(&failing, &img, &patches) {
            Err(MccError::Predictor { index, patch, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(patch, patches[1]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            estimate_cover(&failing, &img, &[PatchSpec::new(8, 0, 2, 2)]),
            Err(MccError::InvalidPatch { index: 0, .. })
        ));
        assert!(matches!(estimate_cover(&failing, &img, &[]), Err(MccError::NoPatches)));
    }

    #[test]
    fn extract_patch_wraps() {
        let pixels: Vec<u8> = (0..12).collect(); // 4x3, one channel
        assert_eq!(extract_patch(&pixels, 4, 3, 1, &PatchSpec::new(1, 1, 2, 2)), vec![5, 6, 9, 10]);
        assert_eq!(extract_patch(&pixels, 4, 3, 1, &PatchSpec::new(3, 2, 2, 2)), vec![11, 8, 3, 0]);
    }

    proptest! {
        #[test]
        fn budget_stays_within_a_factor_of_root_two(
            w in 64u32..4000, h in 64u32..4000, p in 1u32..64, ratio in 0.05f64..2.0,
        ) {
            let n = budget_count(w, h, p, ratio).unwrap();
            let achieved = f64::from(n) * f64::from(p).powi(2) / (f64::from(w) * f64::from(h));
            let ideal = ratio;
            if n > 1 {
                prop_assert!(achieved <= ideal * 2f64.sqrt() * (1.0 + 1e-12));
                prop_assert!(achieved >= ideal / 2f64.sqrt() * (1.0 - 1e-12));
            }
            let nearest = budget_count_with(w, h, p, ratio, BudgetRounding::Nearest).unwrap();
            let slack = 0.5 * f64::from(p).powi(2) / (f64::from(w) * f64::from(h));
            let achieved = f64::from(nearest) * f64::from(p).powi(2) / (f64::from(w) * f64::from(h));
            if nearest > 1 {
                prop_assert!((achieved - ratio).abs() <= slack * (1.0 + 1e-9));
            }
        }

        #[test]
        fn identical_plans_give_identical_estimates(seed in any::<u64>()) {
            let reg = one_species();
            let img = Grid1(MembershipGrid::from_fn(16, 12, |x, y| (x + y) % 3 == 0));
            let plan = SamplePlan::new(seed, 16, 12, 4, 25).unwrap();
            let p1 = sample_patches(&plan).unwrap();
            let p2 = sample_patches(&plan).unwrap();
            prop_assert_eq!(&p1, &p2);
            let e1 = estimate_cover(&counting_predictor(reg.clone()), &img, &p1).unwrap();
            let e2 = estimate_cover(&counting_predictor(reg), &img, &p2).unwrap();
            prop_assert_eq!(e1.values()[0].to_bits(), e2.values()[0].to_bits());
        }
    }
}
