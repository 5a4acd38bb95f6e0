//! Layered synthetic scenes with exactly known cover.
//!
//! A scene is a z-ordered stack of layers, each a species and a set of
//! rectangles or ellipses. A pixel belongs to a shape when its centre lies
//! inside it. True (occlusion-disregarding) cover counts every pixel of a
//! species' union of shapes; the visible map keeps only the topmost layer.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Annotation, CoverVector, DatasetError, Day, ImageRecord, PlotSeries, SpeciesRegistry};
use crate::grid::{MembershipGrid, SummedAreaTable};
use crate::mcc::{CoverPredictor, PatchSpec, PredictError, RasterExtent};
use crate::metrics::{MetricError, SegMap};
use crate::rng::{child_seed, SeededRng};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("a scene needs at least one species")]
    NoSpecies,
    #[error("scene dimensions must be positive, got {0}x{1}")]
    EmptyRaster(u32, u32),
    #[error("at most 255 species fit in a label map, got {0}")]
    TooManySpecies(usize),
    #[error("layer {layer} names unknown species {species:?}")]
    UnknownSpecies { layer: usize, species: String },
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("shape extent {extent} on day {day} is negative")]
    NegativeExtent { day: Day, extent: f64 },
    #[error("day range {first}..={last} is shorter than 8 days")]
    ShortDayRange { first: Day, last: Day },
    #[error("{0} growth rates for {1} species")]
    RateCount(usize, usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// A shape in pixel coordinates. Rectangles are `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rect { x: f64, y: f64, w: f64, h: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Shape {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Shape::Rect { x, y, w, h } => px >= x && px < x + w && py >= y && py < y + h,
            Shape::Ellipse { cx, cy, rx, ry } => {
                if rx <= 0.0 || ry <= 0.0 {
                    return false;
                }
                let (dx, dy) = ((px - cx) / rx, (py - cy) / ry);
                dx * dx + dy * dy <= 1.0
            }
        }
    }

    /// Pixel index range `[x0, x1) × [y0, y1)` that can contain set pixels.
    fn pixel_bounds(&self, width: u32, height: u32) -> (u32, u32, u32, u32) {
        let (left, top, right, bottom) = match *self {
            Shape::Rect { x, y, w, h } => (x, y, x + w, y + h),
            Shape::Ellipse { cx, cy, rx, ry } => (cx - rx, cy - ry, cx + rx, cy + ry),
        };
        let clamp = |v: f64, max: u32| v.clamp(0.0, f64::from(max)) as u32;
        (
            clamp((left - 0.5).floor(), width),
            clamp((top - 0.5).floor(), height),
            clamp((right + 0.5).ceil(), width),
            clamp((bottom + 0.5).ceil(), height),
        )
    }

    fn rasterize_into(&self, grid: &mut MembershipGrid, mut mark: impl FnMut(u32, u32)) {
        let (x0, y0, x1, y1) = self.pixel_bounds(grid.width(), grid.height());
        for y in y0..y1 {
            for x in x0..x1 {
                if self.contains(f64::from(x) + 0.5, f64::from(y) + 0.5) {
                    grid.set(x, y, true);
                    mark(x, y);
                }
            }
        }
    }

    /// The shape `days` days later under linear growth of `rate` pixels per
    /// day: rectangles widen, ellipse radii grow.
    pub fn grown(&self, rate: f64, days: f64) -> Shape {
        match *self {
            Shape::Rect { x, y, w, h } => Shape::Rect {
                x,
                y,
                w: w + rate * days,
                h,
            },
            Shape::Ellipse { cx, cy, rx, ry } => Shape::Ellipse {
                cx,
                cy,
                rx: rx + rate * days,
                ry: ry + rate * days,
            },
        }
    }

    fn min_extent(&self) -> f64 {
        match *self {
            Shape::Rect { w, h, .. } => w.min(h),
            Shape::Ellipse { rx, ry, .. } => rx.min(ry),
        }
    }
}

/// One z-level: a species and the shapes it occupies at that level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub species: String,
    pub shapes: Vec<Shape>,
}

/// On-disk description of a scene; layers are listed bottom to top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub width: u32,
    pub height: u32,
    pub species: Vec<String>,
    pub layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthScript>,
}

#[derive(Debug, Clone)]
pub struct LayeredScene {
    descriptor: SceneDescriptor,
    registry: Arc<SpeciesRegistry>,
    layer_grids: Vec<MembershipGrid>,
    grids: Vec<MembershipGrid>,
    tables: Vec<SummedAreaTable>,
    visible: SegMap,
    visible_tables: Vec<SummedAreaTable>,
    true_cover: CoverVector,
}

impl LayeredScene {
    pub fn new(descriptor: SceneDescriptor) -> Result<Self, SceneError> {
        let (width, height) = (descriptor.width, descriptor.height);
        if width == 0 || height == 0 {
            return Err(SceneError::EmptyRaster(width, height));
        }
        if descriptor.species.is_empty() {
            return Err(SceneError::NoSpecies);
        }
        if descriptor.species.len() > 255 {
            return Err(SceneError::TooManySpecies(descriptor.species.len()));
        }
        let registry = Arc::new(SpeciesRegistry::new(descriptor.species.iter().cloned())?);
        let mut grids = vec![MembershipGrid::new(width, height); registry.len()];
        let mut labels = vec![0u8; width as usize * height as usize];
        let mut layer_grids = Vec::with_capacity(descriptor.layers.len());
        for (index, layer) in descriptor.layers.iter().enumerate() {
            let species = registry
                .index_of(&layer.species)
                .ok_or_else(|| SceneError::UnknownSpecies {
                    layer: index,
                    species: layer.species.clone(),
                })?;
            let label = species as u8 + 1;
            let mut grid = MembershipGrid::new(width, height);
            for shape in &layer.shapes {
                shape.rasterize_into(&mut grid, |x, y| {
                    labels[y as usize * width as usize + x as usize] = label;
                });
            }
            let union = &mut grids[species];
            for (i, &set) in grid.cells().iter().enumerate() {
                if set {
                    union.set(i as u32 % width, i as u32 / width, true);
                }
            }
            layer_grids.push(grid);
        }
        let area = f64::from(width) * f64::from(height);
        let true_cover = CoverVector::new(
            Arc::clone(&registry),
            grids.iter().map(|g| g.count() as f64 / area).collect(),
        )?;
        let tables = grids.iter().map(SummedAreaTable::new).collect();
        let visible_tables = (1..=registry.len() as u8)
            .map(|label| {
                SummedAreaTable::from_counts(width, height, |x, y| {
                    u64::from(labels[y as usize * width as usize + x as usize] == label)
                })
            })
            .collect();
        let visible = SegMap::new(width, height, labels, registry.names().to_vec())?;
        Ok(Self {
            descriptor,
            registry,
            layer_grids,
            grids,
            tables,
            visible,
            visible_tables,
            true_cover,
        })
    }

    pub fn descriptor(&self) -> &SceneDescriptor {
        &self.descriptor
    }

    pub fn registry(&self) -> &Arc<SpeciesRegistry> {
        &self.registry
    }

    /// Per-species union grids, in registry order.
    pub fn grids(&self) -> &[MembershipGrid] {
        &self.grids
    }

    pub fn tables(&self) -> &[SummedAreaTable] {
        &self.tables
    }

    pub fn visible(&self) -> &SegMap {
        &self.visible
    }

    pub fn true_cover(&self) -> &CoverVector {
        &self.true_cover
    }

    /// Visible share of the image per species.
    pub fn visible_cover(&self) -> CoverVector {
        let area = self.pixel_count() as f64;
        let values = self.visible_tables.iter().map(|t| t.total() as f64 / area).collect();
        CoverVector::new(Arc::clone(&self.registry), values).expect("fractions of the image")
    }

    pub fn pixel_count(&self) -> u64 {
        u64::from(self.descriptor.width) * u64::from(self.descriptor.height)
    }

    /// Fraction of the image area taken by hidden foliage: summed over
    /// species, pixels of the species that another layer covers.
    pub fn occluded_fraction(&self) -> f64 {
        let hidden: u64 = self
            .tables
            .iter()
            .zip(&self.visible_tables)
            .map(|(all, seen)| all.total() - seen.total())
            .sum();
        hidden as f64 / self.pixel_count() as f64
    }

    /// Writes `<stem>.json`, `<stem>_visible.png` and one
    /// `<stem>_layer_NNN.png` per layer (each with its palette sidecar).
    pub fn write_bundle(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, SceneError> {
        let io = |path: &Path, e: &dyn std::fmt::Display| SceneError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
        let mut written = Vec::new();
        let json_path = dir.join(format!("{stem}.json"));
        let json = serde_json::to_string_pretty(&self.descriptor).expect("descriptor serializes");
        std::fs::write(&json_path, json + "\n").map_err(|e| io(&json_path, &e))?;
        written.push(json_path);

        let visible_path = dir.join(format!("{stem}_visible.png"));
        self.visible.write_png(&visible_path)?;
        written.push(visible_path);

        let (w, h) = (self.descriptor.width, self.descriptor.height);
        for (i, (layer, grid)) in self.descriptor.layers.iter().zip(&self.layer_grids).enumerate() {
            let label = self.registry.index_of(&layer.species).expect("checked at construction") as u8 + 1;
            let labels = grid.cells().iter().map(|&c| if c { label } else { 0 }).collect();
            let map = SegMap::new(w, h, labels, self.registry.names().to_vec())?;
            let path = dir.join(format!("{stem}_layer_{i:03}.png"));
            map.write_png(&path)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn read_descriptor(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let descriptor: SceneDescriptor = serde_json::from_str(&text).map_err(|e| SceneError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::new(descriptor)
    }
}

impl RasterExtent for LayeredScene {
    fn width(&self) -> u32 {
        self.descriptor.width
    }

    fn height(&self) -> u32 {
        self.descriptor.height
    }
}

fn patch_cover(scene: &LayeredScene, tables: &[SummedAreaTable], patch: &PatchSpec) -> Result<CoverVector, PredictError> {
    let (w, h) = (scene.width(), scene.height());
    if !patch.is_valid_on(w, h) {
        return Err(PredictError(format!("patch {patch:?} is outside the {w}x{h} scene")));
    }
    let pixels = patch.pixels() as f64;
    let values = tables
        .iter()
        .map(|t| t.wrapped_sum(patch.x, patch.y, patch.w, patch.h) as f64 / pixels)
        .collect();
    CoverVector::new(Arc::clone(&scene.registry), values).map_err(|e| PredictError(e.to_string()))
}

/// The ideal predictor: per-species fraction of patch pixels inside the
/// species' shapes, hidden or not.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleCover;

impl CoverPredictor<LayeredScene> for OracleCover {
    fn predict(&self, scene: &LayeredScene, patch: &PatchSpec) -> Result<CoverVector, PredictError> {
        patch_cover(scene, &scene.tables, patch)
    }
}

/// Sees only the top layer, like a segmentation model.
#[derive(Debug, Clone, Copy, Default)]
pub struct VisibleCover;

impl CoverPredictor<LayeredScene> for VisibleCover {
    fn predict(&self, scene: &LayeredScene, patch: &PatchSpec) -> Result<CoverVector, PredictError> {
        patch_cover(scene, &scene.visible_tables, patch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    pub species: Vec<String>,
    /// Inclusive range; each species draws its own shape count from it.
    pub shapes_per_species: (u32, u32),
    /// Half-extent range in pixels for rectangles and ellipse radii.
    pub size_range: (f64, f64),
}

impl SceneConfig {
    fn check(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::EmptyRaster(self.width, self.height));
        }
        if self.species.is_empty() {
            return Err(SceneError::NoSpecies);
        }
        let (min_shapes, max_shapes) = self.shapes_per_species;
        if min_shapes > max_shapes {
            return Err(SceneError::BadRange(format!("shape count ({min_shapes}, {max_shapes})")));
        }
        let (lo, hi) = self.size_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(SceneError::BadRange(format!("size range ({lo}, {hi})")));
        }
        Ok(())
    }
}

fn random_shape(rng: &mut SeededRng, width: u32, height: u32, size: (f64, f64)) -> Shape {
    let cx = rng.range_f64(0.0, f64::from(width));
    let cy = rng.range_f64(0.0, f64::from(height));
    let a = rng.range_f64(size.0, size.1);
    let b = rng.range_f64(size.0, size.1);
    if rng.below(2) == 0 {
        Shape::Rect {
            x: cx - a,
            y: cy - b,
            w: 2.0 * a,
            h: 2.0 * b,
        }
    } else {
        Shape::Ellipse { cx, cy, rx: a, ry: b }
    }
}

/// A random scene, identical for identical `(seed, config)`. Every shape gets
/// its own layer and layers are stacked in random order.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<LayeredScene, SceneError> {
    config.check()?;
    let mut rng = SeededRng::new(seed);
    let mut layers = Vec::new();
    let (min_shapes, max_shapes) = config.shapes_per_species;
    for species in &config.species {
        let count = rng.inclusive(u64::from(min_shapes), u64::from(max_shapes));
        for _ in 0..count {
            layers.push(Layer {
                species: species.clone(),
                shapes: vec![random_shape(&mut rng, config.width, config.height, config.size_range)],
            });
        }
    }
    rng.shuffle(&mut layers);
    LayeredScene::new(SceneDescriptor {
        width: config.width,
        height: config.height,
        species: config.species.clone(),
        layers,
        seed: Some(seed),
        growth: None,
    })
}

/// `count` scenes; scene `i` uses `child_seed(seed, i)`. Generated in parallel.
pub fn generate_scenes(seed: u64, config: &SceneConfig, count: usize) -> Result<Vec<LayeredScene>, SceneError> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_scene(child_seed(seed, i as u64), config))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowingShape {
    pub species: String,
    /// Shape on `first_day`.
    pub shape: Shape,
}

/// Linear growth of a fixed layout over a day range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthScript {
    pub width: u32,
    pub height: u32,
    pub species: Vec<String>,
    /// Pixels per day for each species, in `species` order.
    pub rates: Vec<f64>,
    pub first_day: Day,
    pub last_day: Day,
    pub seed: u64,
    /// Bottom to top; each shape is its own layer.
    pub shapes: Vec<GrowingShape>,
}

impl GrowthScript {
    /// A script with `shapes_per_species` random shapes per species, drawn
    /// from `seed` with half-extents in `size_range`.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        seed: u64,
        width: u32,
        height: u32,
        species: Vec<String>,
        rates: Vec<f64>,
        days: (Day, Day),
        shapes_per_species: u32,
        size_range: (f64, f64),
    ) -> Result<Self, SceneError> {
        SceneConfig {
            width,
            height,
            species: species.clone(),
            shapes_per_species: (shapes_per_species, shapes_per_species),
            size_range,
        }
        .check()?;
        let mut rng = SeededRng::new(seed);
        let mut shapes = Vec::new();
        for name in &species {
            for _ in 0..shapes_per_species {
                shapes.push(GrowingShape {
                    species: name.clone(),
                    shape: random_shape(&mut rng, width, height, size_range),
                });
            }
        }
        rng.shuffle(&mut shapes);
        let script = Self {
            width,
            height,
            species,
            rates,
            first_day: days.0,
            last_day: days.1,
            seed,
            shapes,
        };
        script.check()?;
        Ok(script)
    }

    pub fn check(&self) -> Result<(), SceneError> {
        if self.species.is_empty() {
            return Err(SceneError::NoSpecies);
        }
        if self.rates.len() != self.species.len() {
            return Err(SceneError::RateCount(self.rates.len(), self.species.len()));
        }
        if self.last_day - self.first_day + 1 < 8 {
            return Err(SceneError::ShortDayRange {
                first: self.first_day,
                last: self.last_day,
            });
        }
        let span = (self.last_day - self.first_day) as f64;
        for (index, g) in self.shapes.iter().enumerate() {
            let species = self
                .species
                .iter()
                .position(|s| *s == g.species)
                .ok_or_else(|| SceneError::UnknownSpecies {
                    layer: index,
                    species: g.species.clone(),
                })?;
            // Extents are linear in time, so checking both ends covers the range.
            for (day, days) in [(self.first_day, 0.0), (self.last_day, span)] {
                let extent = g.shape.grown(self.rates[species], days).min_extent();
                if extent.is_nan() || extent < 0.0 {
                    return Err(SceneError::NegativeExtent { day, extent });
                }
            }
        }
        Ok(())
    }

    pub fn scene_on(&self, day: Day) -> Result<LayeredScene, SceneError> {
        let elapsed = (day - self.first_day) as f64;
        let layers = self
            .shapes
            .iter()
            .map(|g| {
                let species = self.species.iter().position(|s| *s == g.species).unwrap_or(0);
                Layer {
                    species: g.species.clone(),
                    shapes: vec![g.shape.grown(self.rates[species], elapsed)],
                }
            })
            .collect();
        LayeredScene::new(SceneDescriptor {
            width: self.width,
            height: self.height,
            species: self.species.clone(),
            layers,
            seed: Some(self.seed),
            growth: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GrownSeries {
    /// Every day as a record; references only on days divisible by 7.
    pub series: PlotSeries,
    pub days: Vec<Day>,
    pub scenes: Vec<LayeredScene>,
    /// Held-out true cover for every day.
    pub truths: Vec<CoverVector>,
}

impl GrownSeries {
    /// The held-out truths as a fully referenced series.
    pub fn truth_series(&self) -> PlotSeries {
        let records = self
            .series
            .records()
            .iter()
            .zip(&self.truths)
            .map(|(r, truth)| {
                ImageRecord::new(
                    r.unit_id.clone(),
                    r.camera_id.clone(),
                    r.time,
                    r.image_path.clone(),
                    Some(Annotation::reference(r.time, truth.clone())),
                )
            })
            .collect();
        PlotSeries::new(self.series.unit_id(), self.series.camera_id(), records).expect("same layout as series")
    }
}

pub const SYNTHETIC_UNIT: &str = "synthetic";
pub const SYNTHETIC_CAMERA: &str = "cam0";

/// Daily scenes over the script's range with weekly exact references.
pub fn grow_series(script: &GrowthScript) -> Result<GrownSeries, SceneError> {
    script.check()?;
    let days: Vec<Day> = (script.first_day..=script.last_day).collect();
    let scenes: Vec<LayeredScene> = days
        .par_iter()
        .map(|&d| script.scene_on(d))
        .collect::<Result<_, _>>()?;
    let truths: Vec<CoverVector> = scenes.iter().map(|s| s.true_cover().clone()).collect();
    let records = days
        .iter()
        .zip(&truths)
        .map(|(&day, truth)| {
            let annotation = (day.rem_euclid(7) == 0).then(|| Annotation::reference(day, truth.clone()));
            ImageRecord::new(SYNTHETIC_UNIT, SYNTHETIC_CAMERA, day, format!("day_{day:04}.png"), annotation)
        })
        .collect();
    Ok(GrownSeries {
        series: PlotSeries::new(SYNTHETIC_UNIT, SYNTHETIC_CAMERA, records)?,
        days,
        scenes,
        truths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcc::estimate_cover;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    fn scene(width: u32, height: u32, species: &[&str], layers: Vec<(&str, Shape)>) -> LayeredScene {
        LayeredScene::new(SceneDescriptor {
            width,
            height,
            species: names(species),
            layers: layers
                .into_iter()
                .map(|(s, shape)| Layer {
                    species: s.to_string(),
                    shapes: vec![shape],
                })
                .collect(),
            seed: None,
            growth: None,
        })
        .unwrap()
    }

    fn rect(x: f64, y: f64, w: f64, h: f64) -> Shape {
        Shape::Rect { x, y, w, h }
    }

    #[test]
    fn empty_scene() {
        let config = SceneConfig {
            width: 32,
            height: 16,
            species: names(&["a", "b"]),
            shapes_per_species: (0, 0),
            size_range: (1.0, 4.0),
        };
        let s = generate_scene(1, &config).unwrap();
        assert_eq!(s.true_cover().values(), &[0.0, 0.0]);
        assert!(s.visible().labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn left_half_rectangle() {
        let s = scene(256, 256, &["a"], vec![("a", rect(0.0, 0.0, 128.0, 256.0))]);
        assert_eq!(s.true_cover().values(), &[0.5]);
    }

    #[test]
    fn full_overlap_counts_both_layers() {
        let s = scene(8, 8, &["a", "b"], vec![("a", rect(0.0, 0.0, 8.0, 8.0)), ("b", rect(0.0, 0.0, 8.0, 8.0))]);
        assert_eq!(s.true_cover().values(), &[1.0, 1.0]);
        assert!(s.visible().labels().iter().all(|&l| l == 2));
        assert_eq!(s.occluded_fraction(), 1.0);
        assert_eq!(s.visible_cover().values(), &[0.0, 1.0]);
    }

    #[test]
    fn oracle_patches() {
        let s = scene(8, 8, &["a", "b"], vec![("a", rect(2.0, 2.0, 4.0, 4.0))]);
        let full = OracleCover.predict(&s, &PatchSpec::full(8, 8)).unwrap();
        assert_eq!(full.values(), s.true_cover().values());
        let inside = OracleCover.predict(&s, &PatchSpec::new(3, 3, 2, 2)).unwrap();
        assert_eq!(inside.values(), &[1.0, 0.0]);
        let edge = OracleCover.predict(&s, &PatchSpec::new(1, 3, 2, 2)).unwrap();
        assert_eq!(edge.values(), &[0.5, 0.0]);
        assert!(OracleCover.predict(&s, &PatchSpec::new(8, 0, 2, 2)).is_err());
    }

    #[test]
    fn ellipse_rasterizes_by_pixel_centre() {
        let s = scene(5, 5, &["a"], vec![("a", Shape::Ellipse { cx: 2.5, cy: 2.5, rx: 1.0, ry: 1.0 })]);
        // Centre pixel plus its four neighbours sit exactly on or inside the circle.
        assert_eq!(s.grids()[0].count(), 5);
    }

    #[test]
    fn visible_never_exceeds_true() {
        let config = SceneConfig {
            width: 64,
            height: 48,
            species: names(&["a", "b", "c"]),
            shapes_per_species: (2, 5),
            size_range: (3.0, 15.0),
        };
        for seed in 0..10 {
            let s = generate_scene(seed, &config).unwrap();
            let visible = s.visible_cover();
            for (v, t) in visible.values().iter().zip(s.true_cover().values()) {
                assert!(v <= t);
            }
            assert!(visible.total() <= 1.0);
            let again = generate_scene(seed, &config).unwrap();
            assert_eq!(again.visible(), s.visible());
        }
    }

    #[test]
    fn wrapped_oracle_estimate_uses_the_torus() {
        let s = scene(4, 4, &["a"], vec![("a", rect(0.0, 0.0, 1.0, 4.0))]);
        let patches: Vec<PatchSpec> = (0..4).flat_map(|y| (0..4).map(move |x| PatchSpec::new(x, y, 2, 2))).collect();
        let est = estimate_cover(&OracleCover, &s, &patches).unwrap();
        assert_eq!(est.values(), &[0.25]);
    }

    #[test]
    fn growth_validation() {
        let script = GrowthScript {
            width: 16,
            height: 16,
            species: names(&["a"]),
            rates: vec![-1.0],
            first_day: 0,
            last_day: 10,
            seed: 0,
            shapes: vec![GrowingShape {
                species: "a".into(),
                shape: rect(0.0, 0.0, 4.0, 4.0),
            }],
        };
        assert!(matches!(script.check(), Err(SceneError::NegativeExtent { day: 10, .. })));
        let short = GrowthScript {
            rates: vec![1.0],
            last_day: 6,
            ..script
        };
        assert!(matches!(short.check(), Err(SceneError::ShortDayRange { .. })));
    }

    #[test]
    fn weekly_references() {
        let script = GrowthScript {
            width: 16,
            height: 16,
            species: names(&["a"]),
            rates: vec![1.0],
            first_day: 0,
            last_day: 14,
            seed: 0,
            shapes: vec![GrowingShape {
                species: "a".into(),
                shape: rect(0.0, 0.0, 1.0, 16.0),
            }],
        };
        let grown = grow_series(&script).unwrap();
        assert_eq!(grown.series.records().len(), 15);
        assert_eq!(grown.series.reference_count(), 3);
        assert_eq!(grown.truths[7].values(), &[0.5]);
        assert_eq!(grown.truth_series().reference_count(), 15);
    }
}
