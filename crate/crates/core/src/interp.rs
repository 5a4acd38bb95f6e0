//! Linear label interpolation between consecutive reference annotations.
//!
//! An unannotated frame at day `t` between references at `t0 < t < t1` gets
//!
//! ```text
//! cover(t) = (cover(t0) * (t1 - t) + cover(t1) * (t - t0)) / (t1 - t0)
//! ```
//!
//! per species. Frames before the first or after the last reference are never
//! labelled, and neither are frames inside gaps longer than
//! [`InterpolationPolicy::max_gap_days`].

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{Annotation, CoverVector, DatasetError, Day, PlotSeries, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("day {t} lies outside the reference interval [{t0}, {t1}]")]
    OutsideInterval { t: Day, t0: Day, t1: Day },
    #[error("degenerate reference interval: {t0} must precede {t1}")]
    DegenerateInterval { t0: Day, t1: Day },
    #[error("interpolation needs reference annotations at both ends")]
    NotReference,
    #[error("reference covers are keyed by different species sets")]
    KeyingMismatch,
    #[error("series ({unit}, {camera}) has {found} reference annotations; at least 2 are required")]
    TooFewReferences {
        unit: String,
        camera: String,
        found: usize,
    },
    #[error("max_gap_days must be at least 1")]
    ZeroGap,
    #[error("extrapolation beyond the reference envelope is not supported")]
    Extrapolation,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InterpolationPolicy {
    max_gap_days: u32,
    extrapolate: bool,
}

impl Default for InterpolationPolicy {
    fn default() -> Self {
        Self {
            max_gap_days: 14,
            extrapolate: false,
        }
    }
}

impl InterpolationPolicy {
    pub fn new(max_gap_days: u32) -> Result<Self, InterpError> {
        if max_gap_days == 0 {
            return Err(InterpError::ZeroGap);
        }
        Ok(Self {
            max_gap_days,
            extrapolate: false,
        })
    }

    /// Only `false` is accepted for now.
    pub fn with_extrapolate(self, extrapolate: bool) -> Result<Self, InterpError> {
        if extrapolate {
            return Err(InterpError::Extrapolation);
        }
        Ok(self)
    }

    pub fn max_gap_days(&self) -> u32 {
        self.max_gap_days
    }

    pub fn extrapolate(&self) -> bool {
        self.extrapolate
    }
}

/// Weight of an interpolated label: 1 at a reference, 1/2 halfway between.
pub fn confidence(t: Day, t0: Day, t1: Day) -> Result<f64, InterpError> {
    if t0 >= t1 {
        return Err(InterpError::DegenerateInterval { t0, t1 });
    }
    if t < t0 || t > t1 {
        return Err(InterpError::OutsideInterval { t, t0, t1 });
    }
    let nearest = (t - t0).min(t1 - t) as f64;
    Ok(1.0 - nearest / (t1 - t0) as f64)
}

/// Cover at day `t` on the straight line between two reference annotations.
///
/// Returns the endpoint covers unchanged at `t0` and `t1`. Each value is
/// clamped to the closed range spanned by its endpoints, which only absorbs
/// rounding.
pub fn interpolate_pair(a0: &Annotation, a1: &Annotation, t: Day) -> Result<CoverVector, InterpError> {
    if !a0.is_reference() || !a1.is_reference() {
        return Err(InterpError::NotReference);
    }
    interpolate_covers(&a0.cover, a0.time, &a1.cover, a1.time, t)
}

fn interpolate_covers(
    c0: &CoverVector,
    t0: Day,
    c1: &CoverVector,
    t1: Day,
    t: Day,
) -> Result<CoverVector, InterpError> {
    if t0 >= t1 {
        return Err(InterpError::DegenerateInterval { t0, t1 });
    }
    if t < t0 || t > t1 {
        return Err(InterpError::OutsideInterval { t, t0, t1 });
    }
    if !c0.same_keying(c1) {
        return Err(InterpError::KeyingMismatch);
    }
    if t == t0 {
        return Ok(c0.clone());
    }
    if t == t1 {
        return Ok(c1.clone());
    }
    let left = (t1 - t) as f64;
    let right = (t - t0) as f64;
    let span = (t1 - t0) as f64;
    let values = c0
        .values()
        .iter()
        .zip(c1.values())
        .map(|(&v0, &v1)| {
            let v = (v0 * left + v1 * right) / span;
            v.clamp(v0.min(v1), v0.max(v1))
        })
        .collect();
    Ok(CoverVector::new(Arc::clone(c0.registry()), values)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedGap {
    pub start: Day,
    pub end: Day,
    pub length: Day,
    /// Frames inside the gap left without a label.
    pub frames: Vec<Day>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InterpolationReport {
    pub unit_id: String,
    pub camera_id: String,
    pub total_records: usize,
    pub reference_records: usize,
    pub interpolated_records: usize,
    pub skipped_gaps: Vec<SkippedGap>,
    /// Frames before the first or after the last reference.
    pub outside_envelope: Vec<Day>,
}

impl InterpolationReport {
    pub fn unlabelled(&self) -> usize {
        self.total_records - self.reference_records - self.interpolated_records
    }
}

/// Labels every unannotated frame between two consecutive references that are
/// at most `max_gap_days` apart. References are kept as they are; any earlier
/// interpolated labels are recomputed or dropped.
pub fn interpolate_series(
    series: &PlotSeries,
    policy: &InterpolationPolicy,
) -> Result<(PlotSeries, InterpolationReport), InterpError> {
    let records = series.records();
    let refs: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.reference().is_some())
        .map(|(i, _)| i)
        .collect();
    if refs.len() < 2 {
        return Err(InterpError::TooFewReferences {
            unit: series.unit_id().to_string(),
            camera: series.camera_id().to_string(),
            found: refs.len(),
        });
    }

    let mut labels: Vec<Option<Annotation>> = records
        .iter()
        .map(|r| r.reference().cloned())
        .collect();
    let mut skipped_gaps = Vec::new();
    let mut interpolated = 0;

    for pair in refs.windows(2) {
        let (i0, i1) = (pair[0], pair[1]);
        let a0 = records[i0].reference().expect("reference index");
        let a1 = records[i1].reference().expect("reference index");
        let length = a1.time - a0.time;
        let inner = i0 + 1..i1;
        if length > i64::from(policy.max_gap_days) {
            skipped_gaps.push(SkippedGap {
                start: a0.time,
                end: a1.time,
                length,
                frames: records[inner].iter().map(|r| r.time).collect(),
            });
            continue;
        }
        for i in inner {
            let t = records[i].time;
            let cover = interpolate_pair(a0, a1, t)?;
            let weight = confidence(t, a0.time, a1.time)?;
            labels[i] = Some(Annotation {
                time: t,
                cover,
                provenance: Provenance::Interpolated {
                    left_time: a0.time,
                    right_time: a1.time,
                    confidence: weight,
                },
            });
            interpolated += 1;
        }
    }

    let (first, last) = (refs[0], refs[refs.len() - 1]);
    let outside_envelope = records[..first]
        .iter()
        .chain(&records[last + 1..])
        .map(|r| r.time)
        .collect();

    let report = InterpolationReport {
        unit_id: series.unit_id().to_string(),
        camera_id: series.camera_id().to_string(),
        total_records: records.len(),
        reference_records: refs.len(),
        interpolated_records: interpolated,
        skipped_gaps,
        outside_envelope,
    };
    Ok((series.with_annotations(labels), report))
}
