//! Cover and segmentation metrics: per-species sigma, the sigma-scaled mean
//! absolute error, and per-species IoU on label maps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{CoverVector, PlotSeries, SpeciesRegistry};

/// Lower bound applied to per-species sigma.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("sigma needs at least 2 annotations, got {0}")]
    TooFewAnnotations(usize),
    #[error("inputs are keyed by different species sets")]
    KeyingMismatch,
    #[error("label maps differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("label map must have positive dimensions")]
    EmptyMap,
    #[error("label buffer has {got} entries, expected {expected}")]
    LabelCount { expected: usize, got: usize },
    #[error("label {label} exceeds the palette of {palette} species")]
    LabelOutOfRange { label: u8, palette: usize },
    #[error("palette holds {0} species; at most 255 fit an 8-bit label map")]
    PaletteTooLarge(usize),
    #[error("palette repeats species {0:?}")]
    DuplicatePaletteEntry(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Per-species population standard deviation of cover.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaVector {
    #[serde(skip)]
    registry: Arc<SpeciesRegistry>,
    sigma: Vec<f64>,
    /// Number of annotations the values were computed from.
    pub count: usize,
    /// Species whose sigma fell below [`SIGMA_FLOOR`] and was raised to it.
    pub floored: Vec<String>,
}

impl SigmaVector {
    /// Sigma values given directly; anything below the floor is raised to it.
    pub fn new(registry: Arc<SpeciesRegistry>, sigma: Vec<f64>, count: usize) -> Result<Self, MetricError> {
        if sigma.len() != registry.len() {
            return Err(MetricError::KeyingMismatch);
        }
        let mut floored = Vec::new();
        let sigma = sigma
            .into_iter()
            .zip(registry.names())
            .map(|(s, name)| {
                if s.is_nan() || s < SIGMA_FLOOR {
                    floored.push(name.clone());
                    SIGMA_FLOOR
                } else {
                    s
                }
            })
            .collect();
        Ok(Self {
            registry,
            sigma,
            count,
            floored,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn registry(&self) -> &Arc<SpeciesRegistry> {
        &self.registry
    }

    /// Every sigma multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma: self.sigma.iter().map(|s| s * k).collect(),
            ..self.clone()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.registry
            .names()
            .iter()
            .map(String::as_str)
            .zip(self.sigma.iter().copied())
    }
}

/// Population standard deviation per species.
///
/// Each species' values are sorted before summing, so the result does not
/// depend on the order of `annotations`.
pub fn species_sigma(annotations: &[CoverVector]) -> Result<SigmaVector, MetricError> {
    if annotations.len() < 2 {
        return Err(MetricError::TooFewAnnotations(annotations.len()));
    }
    let first = &annotations[0];
    if annotations.iter().any(|a| !a.same_keying(first)) {
        return Err(MetricError::KeyingMismatch);
    }
    let n = annotations.len() as f64;
    let sigma = (0..first.len())
        .map(|s| {
            let mut column: Vec<f64> = annotations.iter().map(|a| a.values()[s]).collect();
            column.sort_by(f64::total_cmp);
            let mean = column.iter().sum::<f64>() / n;
            let mut deviations: Vec<f64> = column.iter().map(|v| (v - mean) * (v - mean)).collect();
            deviations.sort_by(f64::total_cmp);
            (deviations.iter().sum::<f64>() / n).sqrt()
        })
        .collect();
    SigmaVector::new(Arc::clone(first.registry()), sigma, annotations.len())
}

/// Covers to estimate sigma from: references, plus interpolated labels when asked.
pub fn training_covers(series: &[PlotSeries], include_interpolated: bool) -> Vec<CoverVector> {
    series
        .iter()
        .flat_map(|s| s.records())
        .filter_map(|r| r.annotation.as_ref())
        .filter(|a| include_interpolated || a.is_reference())
        .map(|a| a.cover.clone())
        .collect()
}

/// Mean over species of `|t/σ − p/σ|`.
pub fn msae(target: &CoverVector, prediction: &CoverVector, sigma: &SigmaVector) -> Result<f64, MetricError> {
    if !target.same_keying(prediction) || target.registry().as_ref() != sigma.registry().as_ref() {
        return Err(MetricError::KeyingMismatch);
    }
    let n = target.len() as f64;
    let total: f64 = target
        .values()
        .iter()
        .zip(prediction.values())
        .zip(sigma.values())
        .map(|((t, p), s)| (t / s - p / s).abs())
        .sum();
    Ok(total / n)
}

/// Label map: 0 is background, label `k ≥ 1` is `palette[k - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMap {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    palette: Vec<String>,
}

impl SegMap {
    pub fn new(width: u32, height: u32, labels: Vec<u8>, palette: Vec<String>) -> Result<Self, MetricError> {
        if width == 0 || height == 0 {
            return Err(MetricError::EmptyMap);
        }
        let expected = width as usize * height as usize;
        if labels.len() != expected {
            return Err(MetricError::LabelCount {
                expected,
                got: labels.len(),
            });
        }
        if palette.len() > 255 {
            return Err(MetricError::PaletteTooLarge(palette.len()));
        }
        for (i, name) in palette.iter().enumerate() {
            if palette[..i].contains(name) {
                return Err(MetricError::DuplicatePaletteEntry(name.clone()));
            }
        }
        if let Some(&label) = labels.iter().find(|&&l| usize::from(l) > palette.len()) {
            return Err(MetricError::LabelOutOfRange {
                label,
                palette: palette.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
            palette,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn palette(&self) -> &[String] {
        &self.palette
    }

    pub fn label_at(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn species_at(&self, x: u32, y: u32) -> Option<&str> {
        match self.label_at(x, y) {
            0 => None,
            l => Some(&self.palette[usize::from(l) - 1]),
        }
    }

    /// Writes an indexed-colour PNG plus a `<stem>.json` palette sidecar.
    pub fn write_png(&self, path: &Path) -> Result<(), MetricError> {
        let io = |e: &dyn std::fmt::Display| MetricError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = File::create(path).map_err(|e| io(&e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_palette(palette_colours(self.palette.len()));
        let mut writer = encoder.write_header().map_err(|e| io(&e))?;
        writer.write_image_data(&self.labels).map_err(|e| io(&e))?;
        writer.finish().map_err(|e| io(&e))?;

        let sidecar: BTreeMap<String, &str> = self
            .palette
            .iter()
            .enumerate()
            .map(|(i, name)| ((i + 1).to_string(), name.as_str()))
            .collect();
        let json = serde_json::to_string_pretty(&sidecar).expect("string map serializes");
        let side = sidecar_path(path);
        std::fs::write(&side, json + "\n").map_err(|e| MetricError::Io {
            path: side,
            message: e.to_string(),
        })
    }

    /// Reads an 8-bit indexed or greyscale PNG and its `<stem>.json` sidecar.
    pub fn read_png(path: &Path) -> Result<Self, MetricError> {
        let io = |e: &dyn std::fmt::Display| MetricError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = File::open(path).map_err(|e| io(&e))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info().map_err(|e| io(&e))?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| io(&"image too large"))?];
        let info = reader.next_frame(&mut buf).map_err(|e| io(&e))?;
        let ok_format = matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale)
            && info.bit_depth == png::BitDepth::Eight;
        if !ok_format {
            return Err(io(&"label maps must be 8-bit indexed or greyscale PNG"));
        }
        buf.truncate(info.buffer_size());
        let (width, height) = (info.width, info.height);
        let labels = if info.line_size == width as usize {
            buf
        } else {
            buf.chunks(info.line_size)
                .flat_map(|row| &row[..width as usize])
                .copied()
                .collect()
        };

        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| MetricError::Io {
            path: side.clone(),
            message: e.to_string(),
        })?;
        let entries: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| MetricError::Io {
            path: side.clone(),
            message: e.to_string(),
        })?;
        let mut indexed = Vec::with_capacity(entries.len());
        for (key, name) in entries {
            let label: usize = key.parse().map_err(|_| MetricError::Io {
                path: side.clone(),
                message: format!("palette key {key:?} is not a label number"),
            })?;
            indexed.push((label, name));
        }
        indexed.sort();
        let contiguous = indexed.iter().enumerate().all(|(i, (label, _))| *label == i + 1);
        if !contiguous {
            return Err(MetricError::Io {
                path: side,
                message: "palette labels must be 1..=n without holes".into(),
            });
        }
        let palette = indexed.into_iter().map(|(_, name)| name).collect();
        Self::new(width, height, labels, palette)
    }
}

fn sidecar_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("json")
}

fn palette_colours(species: usize) -> Vec<u8> {
    let mut out = vec![0, 0, 0];
    for i in 0..species {
        // Golden-angle hue walk at full saturation.
        let hue = (i as f64 * 137.507_764) % 360.0;
        let (r, g, b) = hsv_to_rgb(hue, 0.85, 0.95);
        out.extend([r, g, b]);
    }
    out
}

pub(crate) fn hsv_to_rgb(hue: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let h = hue / 60.0;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to8 = |f: f64| ((f + m) * 255.0).round() as u8;
    (to8(r), to8(g), to8(b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesIou {
    pub species: String,
    pub iou: f64,
    pub intersection: u64,
    pub union: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouReport {
    /// Species present in at least one of the maps, in first-seen palette order.
    pub per_species: Vec<SpeciesIou>,
    /// Mean over `per_species`; `None` when both maps are all background.
    pub mean: Option<f64>,
}

/// Per-species intersection over union, matching species by name.
pub fn iou(pred: &SegMap, truth: &SegMap) -> Result<IouReport, MetricError> {
    if (pred.width, pred.height) != (truth.width, truth.height) {
        return Err(MetricError::DimensionMismatch(pred.width, pred.height, truth.width, truth.height));
    }
    let mut species: Vec<&str> = pred.palette.iter().map(String::as_str).collect();
    for name in &truth.palette {
        if !species.contains(&name.as_str()) {
            species.push(name);
        }
    }
    // Label -> index into `species`; background maps to None.
    let lookup = |palette: &[String]| -> Vec<Option<usize>> {
        std::iter::once(None)
            .chain(palette.iter().map(|n| species.iter().position(|s| s == n)))
            .collect()
    };
    let pred_map = lookup(&pred.palette);
    let truth_map = lookup(&truth.palette);

    let mut inter = vec![0u64; species.len()];
    let mut union = vec![0u64; species.len()];
    for (&lp, &lt) in pred.labels.iter().zip(&truth.labels) {
        let sp = pred_map[usize::from(lp)];
        let st = truth_map[usize::from(lt)];
        match (sp, st) {
            (Some(a), Some(b)) if a == b => {
                inter[a] += 1;
                union[a] += 1;
            }
            _ => {
                if let Some(a) = sp {
                    union[a] += 1;
                }
                if let Some(b) = st {
                    union[b] += 1;
                }
            }
        }
    }
    let per_species: Vec<SpeciesIou> = species
        .iter()
        .enumerate()
        .filter(|&(i, _)| union[i] > 0)
        .map(|(i, name)| SpeciesIou {
            species: name.to_string(),
            iou: inter[i] as f64 / union[i] as f64,
            intersection: inter[i],
            union: union[i],
        })
        .collect();
    let mean = (!per_species.is_empty())
        .then(|| per_species.iter().map(|s| s.iou).sum::<f64>() / per_species.len() as f64);
    Ok(IouReport { per_species, mean })
}
