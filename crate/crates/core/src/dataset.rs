//! Plots, image records and cover annotations, plus the manifest CSV format.
//!
//! A manifest has one row per image:
//!
//! ```text
//! unit_id,camera_id,date,image_path,annotated,<species 1>,...,<species n>[,provenance,confidence,left_date,right_date]
//! ```
//!
//! Species cells hold percent cover. Rows are grouped into one [`PlotSeries`]
//! per `(unit_id, camera_id)` and dates become day indices relative to the
//! earliest date in the file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

pub use chrono::NaiveDate;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Day index relative to the series epoch.
pub type Day = i64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("species registry is empty")]
    EmptyRegistry,
    #[error("species name on line {line} is empty")]
    EmptySpeciesName { line: usize },
    #[error("duplicate species name {0:?}")]
    DuplicateSpecies(String),
    #[error("cover vector has {got} values but the registry has {expected} species")]
    CoverLength { expected: usize, got: usize },
    #[error("cover for {species:?} is {value}, outside [0, 1]")]
    CoverRange { species: String, value: f64 },
    #[error("cover vectors are keyed by different species sets")]
    KeyingMismatch,
    #[error("unknown species {0:?}")]
    UnknownSpecies(String),
    #[error("invalid interpolation interval: left {left}, time {time}, right {right}")]
    InterpolationInterval { left: Day, time: Day, right: Day },
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("record times must be strictly increasing (day {prev} followed by day {next})")]
    Unordered { prev: Day, next: Day },
    #[error("record on day {time} has an empty image path")]
    EmptyImagePath { time: Day },
    #[error("record on day {time} belongs to ({unit}, {camera}), not to its series")]
    ForeignRecord {
        time: Day,
        unit: String,
        camera: String,
    },
    #[error("annotation day {annotation} does not match record day {record}")]
    AnnotationTime { record: Day, annotation: Day },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("header is missing column {0:?}")]
    MissingColumn(String),
    #[error("header has unknown column {0:?}")]
    UnknownColumn(String),
    #[error("header repeats column {0:?}")]
    DuplicateColumn(String),
    #[error("line {line}: unparseable date {value:?}")]
    Date { line: u64, value: String },
    #[error("line {line}: sub-day timestamp {value:?} (dates must be YYYY-MM-DD)")]
    SubDay { line: u64, value: String },
    #[error("line {line}: duplicate ({unit}, {camera}, {date}), first seen on line {first_line}")]
    Duplicate {
        line: u64,
        first_line: u64,
        unit: String,
        camera: String,
        date: NaiveDate,
    },
    #[error("line {line}: annotated row has a blank cell for species {species:?}")]
    BlankSpecies { line: u64, species: String },
    #[error("line {line}: percent {value:?} for {species:?} is not a number in [0, 100]")]
    Percent {
        line: u64,
        species: String,
        value: String,
    },
    #[error("line {line}: annotated flag must be 0 or 1, got {value:?}")]
    Flag { line: u64, value: String },
    #[error("line {line}: {message}")]
    Provenance { line: u64, message: String },
    #[error("line {line}: {source}")]
    Record { line: u64, source: DatasetError },
}

impl ManifestError {
    /// Manifest line the error refers to, when it has one.
    pub fn line(&self) -> Option<u64> {
        match self {
            Self::Csv { line, .. }
            | Self::Date { line, .. }
            | Self::SubDay { line, .. }
            | Self::Duplicate { line, .. }
            | Self::BlankSpecies { line, .. }
            | Self::Percent { line, .. }
            | Self::Flag { line, .. }
            | Self::Provenance { line, .. }
            | Self::Record { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Ordered set of species names. The order defines vector indices everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeciesRegistry {
    names: Vec<String>,
}

impl SpeciesRegistry {
    pub fn new<I, S>(names: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DatasetError::EmptyRegistry);
        }
        let mut seen = HashSet::new();
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(DatasetError::EmptySpeciesName { line: i + 1 });
            }
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateSpecies(name.clone()));
            }
        }
        Ok(Self { names })
    }

    /// Parses a registry file: one species per line, blank lines ignored.
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let names: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Per-species ground-cover fractions in `[0, 1]`, keyed by a registry.
///
/// Cover ignores occlusion, so the total over species may exceed 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverVector {
    registry: Arc<SpeciesRegistry>,
    values: Vec<f64>,
}

impl CoverVector {
    pub fn new(registry: Arc<SpeciesRegistry>, values: Vec<f64>) -> Result<Self, DatasetError> {
        if values.len() != registry.len() {
            return Err(DatasetError::CoverLength {
                expected: registry.len(),
                got: values.len(),
            });
        }
        for (name, &v) in registry.names().iter().zip(&values) {
            if !(0.0..=1.0).contains(&v) {
                return Err(DatasetError::CoverRange {
                    species: name.clone(),
                    value: v,
                });
            }
        }
        Ok(Self { registry, values })
    }

    pub fn zeros(registry: Arc<SpeciesRegistry>) -> Self {
        let values = vec![0.0; registry.len()];
        Self { registry, values }
    }

    /// Builds a vector from `(species, fraction)` pairs; every registry species must appear.
    pub fn from_pairs<'a, I>(registry: Arc<SpeciesRegistry>, pairs: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut values = vec![None; registry.len()];
        for (name, v) in pairs {
            let idx = registry
                .index_of(name)
                .ok_or_else(|| DatasetError::UnknownSpecies(name.to_string()))?;
            values[idx] = Some(v);
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or(DatasetError::CoverLength {
                expected: registry.len(),
                got: 0,
            })?;
        Self::new(registry, values)
    }

    pub fn registry(&self) -> &Arc<SpeciesRegistry> {
        &self.registry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, species: &str) -> Option<f64> {
        self.registry.index_of(species).map(|i| self.values[i])
    }

    /// Sum over species. May exceed 1.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn same_keying(&self, other: &CoverVector) -> bool {
        Arc::ptr_eq(&self.registry, &other.registry) || self.registry == other.registry
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.registry
            .names()
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }
}

impl Serialize for CoverVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (name, v) in self.iter() {
            map.serialize_entry(name, &v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Reference,
    Interpolated {
        left_time: Day,
        right_time: Day,
        confidence: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub time: Day,
    pub cover: CoverVector,
    pub provenance: Provenance,
}

impl Annotation {
    pub fn reference(time: Day, cover: CoverVector) -> Self {
        Self {
            time,
            cover,
            provenance: Provenance::Reference,
        }
    }

    pub fn interpolated(
        time: Day,
        cover: CoverVector,
        left_time: Day,
        right_time: Day,
        confidence: f64,
    ) -> Result<Self, DatasetError> {
        if !(left_time < right_time && left_time <= time && time <= right_time) {
            return Err(DatasetError::InterpolationInterval {
                left: left_time,
                time,
                right: right_time,
            });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(DatasetError::Confidence(confidence));
        }
        Ok(Self {
            time,
            cover,
            provenance: Provenance::Interpolated {
                left_time,
                right_time,
                confidence,
            },
        })
    }

    pub fn is_reference(&self) -> bool {
        matches!(self.provenance, Provenance::Reference)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub unit_id: String,
    pub camera_id: String,
    pub time: Day,
    pub image_path: String,
    pub annotation: Option<Annotation>,
}

impl ImageRecord {
    pub fn new(
        unit_id: impl Into<String>,
        camera_id: impl Into<String>,
        time: Day,
        image_path: impl Into<String>,
        annotation: Option<Annotation>,
    ) -> Self {
        Self {
            unit_id: unit_id.into(),
            camera_id: camera_id.into(),
            time,
            image_path: image_path.into(),
            annotation,
        }
    }

    pub fn reference(&self) -> Option<&Annotation> {
        self.annotation.as_ref().filter(|a| a.is_reference())
    }
}

/// Time-ordered images of one `(unit, camera)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    unit_id: String,
    camera_id: String,
    records: Vec<ImageRecord>,
}

impl PlotSeries {
    pub fn new(
        unit_id: impl Into<String>,
        camera_id: impl Into<String>,
        records: Vec<ImageRecord>,
    ) -> Result<Self, DatasetError> {
        let series = Self {
            unit_id: unit_id.into(),
            camera_id: camera_id.into(),
            records,
        };
        series.check()?;
        Ok(series)
    }

    fn check(&self) -> Result<(), DatasetError> {
        for r in &self.records {
            if r.unit_id != self.unit_id || r.camera_id != self.camera_id {
                return Err(DatasetError::ForeignRecord {
                    time: r.time,
                    unit: r.unit_id.clone(),
                    camera: r.camera_id.clone(),
                });
            }
            if r.image_path.is_empty() {
                return Err(DatasetError::EmptyImagePath { time: r.time });
            }
            if let Some(a) = &r.annotation {
                if a.time != r.time {
                    return Err(DatasetError::AnnotationTime {
                        record: r.time,
                        annotation: a.time,
                    });
                }
            }
        }
        for pair in self.records.windows(2) {
            if pair[0].time >= pair[1].time {
                return Err(DatasetError::Unordered {
                    prev: pair[0].time,
                    next: pair[1].time,
                });
            }
        }
        Ok(())
    }

    pub fn unit_id(&self) -> &str {
        &self.unit_id
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    /// Replaces the annotations of every record, keeping times and paths.
    ///
    /// `annotations` must have one entry per record.
    pub(crate) fn with_annotations(&self, annotations: Vec<Option<Annotation>>) -> Self {
        assert_eq!(annotations.len(), self.records.len());
        let records = self
            .records
            .iter()
            .zip(annotations)
            .map(|(r, annotation)| ImageRecord {
                annotation,
                ..r.clone()
            })
            .collect();
        Self {
            unit_id: self.unit_id.clone(),
            camera_id: self.camera_id.clone(),
            records,
        }
    }

    pub fn references(&self) -> impl Iterator<Item = &Annotation> + '_ {
        self.records.iter().filter_map(ImageRecord::reference)
    }

    pub fn reference_count(&self) -> usize {
        self.references().count()
    }

    pub fn annotated_count(&self) -> usize {
        self.records.iter().filter(|r| r.annotation.is_some()).count()
    }

    /// A series without any reference annotation cannot be used.
    pub fn is_usable(&self) -> bool {
        self.reference_count() > 0
    }
}

/// Parsed manifest: the series plus the date that day 0 refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub registry: Arc<SpeciesRegistry>,
    /// Earliest date in the file; `None` for an empty manifest.
    pub epoch: Option<NaiveDate>,
    pub series: Vec<PlotSeries>,
}

impl Manifest {
    pub fn to_csv(&self) -> String {
        let epoch = self
            .epoch
            .unwrap_or_else(|| NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date"));
        write_manifest(&self.series, &self.registry, epoch)
    }
}

const BASE_COLUMNS: [&str; 5] = ["unit_id", "camera_id", "date", "image_path", "annotated"];
const EXTRA_COLUMNS: [&str; 4] = ["provenance", "confidence", "left_date", "right_date"];

struct Columns {
    base: [usize; 5],
    species: Vec<usize>,
    extra: [Option<usize>; 4],
}

impl Columns {
    fn locate(header: &csv::StringRecord, registry: &SpeciesRegistry) -> Result<Self, ManifestError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, name) in header.iter().enumerate() {
            let name = name.trim();
            if index.insert(name, i).is_some() {
                return Err(ManifestError::DuplicateColumn(name.to_string()));
            }
        }
        let find = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| ManifestError::MissingColumn(name.to_string()))
        };
        let mut base = [0; 5];
        for (slot, name) in base.iter_mut().zip(BASE_COLUMNS) {
            *slot = find(name)?;
        }
        let species = registry
            .names()
            .iter()
            .map(|n| find(n))
            .collect::<Result<Vec<_>, _>>()?;
        let extra = EXTRA_COLUMNS.map(|name| index.get(name).copied());
        for name in index.keys() {
            let known = BASE_COLUMNS.contains(name)
                || EXTRA_COLUMNS.contains(name)
                || registry.index_of(name).is_some();
            if !known {
                return Err(ManifestError::UnknownColumn(name.to_string()));
            }
        }
        Ok(Self {
            base,
            species,
            extra,
        })
    }
}

struct RawRow {
    line: u64,
    unit: String,
    camera: String,
    date: NaiveDate,
    path: String,
    cover: Option<CoverVector>,
    interpolated: Option<(f64, NaiveDate, NaiveDate)>,
}

fn parse_date(line: u64, value: &str) -> Result<NaiveDate, ManifestError> {
    let value = value.trim();
    if let Ok(d) = NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        return Ok(d);
    }
    // A valid calendar date followed by a time component.
    let has_time = value.len() > 10
        && value.is_char_boundary(10)
        && NaiveDate::parse_from_str(&value[..10], "%Y-%m-%d").is_ok();
    if has_time {
        Err(ManifestError::SubDay {
            line,
            value: value.to_string(),
        })
    } else {
        Err(ManifestError::Date {
            line,
            value: value.to_string(),
        })
    }
}

fn is_plain_decimal(s: &str) -> bool {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    !(int.is_empty() && frac.is_empty()) && digits(int) && digits(frac)
}

/// Converts a percent string to a fraction by shifting the decimal point, so
/// the result is the double nearest to `percent / 100`.
pub fn percent_to_fraction(text: &str) -> Option<f64> {
    let text = text.trim();
    if !is_plain_decimal(text) {
        return None;
    }
    let percent: f64 = text.parse().ok()?;
    if !(0.0..=100.0).contains(&percent) {
        return None;
    }
    format!("{text}e-2").parse().ok()
}

/// Renders a fraction as a percent string with at least six decimals. The
/// digits are the shortest that identify the fraction, so
/// `percent_to_fraction(fraction_to_percent(f)) == f` for every finite `f`.
pub fn fraction_to_percent(fraction: f64) -> String {
    const MIN_DECIMALS: usize = 6;
    if fraction == 0.0 {
        return format!("0.{}", "0".repeat(MIN_DECIMALS));
    }
    let sci = format!("{:e}", fraction.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i64 = exp.parse::<i64>().expect("integer exponent") + 2;
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    // value = 0.<digits> * 10^(exp + 1)
    let point = exp + 1;
    let (int_part, mut frac_part) = if point <= 0 {
        ("0".to_string(), "0".repeat((-point) as usize) + &digits)
    } else if point as usize >= digits.len() {
        (digits.clone() + &"0".repeat(point as usize - digits.len()), String::new())
    } else {
        let (a, b) = digits.split_at(point as usize);
        (a.to_string(), b.to_string())
    };
    while frac_part.len() < MIN_DECIMALS {
        frac_part.push('0');
    }
    let sign = if fraction < 0.0 { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

/// Parses a manifest document. Errors carry the 1-based file line.
pub fn parse_manifest(text: &str, registry: &Arc<SpeciesRegistry>) -> Result<Manifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| ManifestError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols = Columns::locate(&header, registry)?;

    let mut rows = Vec::new();
    let mut seen: HashMap<(String, String, NaiveDate), u64> = HashMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| ManifestError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        let unit = field(cols.base[0]).to_string();
        let camera = field(cols.base[1]).to_string();
        let date = parse_date(line, field(cols.base[2]))?;
        let path = field(cols.base[3]).to_string();
        if path.is_empty() {
            return Err(ManifestError::Record {
                line,
                source: DatasetError::EmptyImagePath { time: 0 },
            });
        }
        let annotated = match field(cols.base[4]) {
            "0" => false,
            "1" => true,
            other => {
                return Err(ManifestError::Flag {
                    line,
                    value: other.to_string(),
                })
            }
        };
        if let Some(&first_line) = seen.get(&(unit.clone(), camera.clone(), date)) {
            return Err(ManifestError::Duplicate {
                line,
                first_line,
                unit,
                camera,
                date,
            });
        }
        seen.insert((unit.clone(), camera.clone(), date), line);

        let mut cover = None;
        let mut interpolated = None;
        if annotated {
            let mut values = Vec::with_capacity(registry.len());
            for (name, &col) in registry.names().iter().zip(&cols.species) {
                let cell = field(col);
                if cell.is_empty() {
                    return Err(ManifestError::BlankSpecies {
                        line,
                        species: name.clone(),
                    });
                }
                let v = percent_to_fraction(cell).ok_or_else(|| ManifestError::Percent {
                    line,
                    species: name.clone(),
                    value: cell.to_string(),
                })?;
                values.push(v);
            }
            cover = Some(
                CoverVector::new(Arc::clone(registry), values)
                    .map_err(|source| ManifestError::Record { line, source })?,
            );
            let extra = |k: usize| cols.extra[k].map(field).unwrap_or("");
            match extra(0) {
                "" | "reference" => {}
                "interpolated" => {
                    let confidence: f64 =
                        extra(1).parse().map_err(|_| ManifestError::Provenance {
                            line,
                            message: format!("bad confidence {:?}", extra(1)),
                        })?;
                    let left = parse_date(line, extra(2))?;
                    let right = parse_date(line, extra(3))?;
                    interpolated = Some((confidence, left, right));
                }
                other => {
                    return Err(ManifestError::Provenance {
                        line,
                        message: format!("unknown provenance {other:?}"),
                    })
                }
            }
        }
        rows.push(RawRow {
            line,
            unit,
            camera,
            date,
            path,
            cover,
            interpolated,
        });
    }

    let epoch = rows.iter().map(|r| r.date).min();
    let mut grouped: BTreeMap<(String, String), Vec<RawRow>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry((row.unit.clone(), row.camera.clone()))
            .or_default()
            .push(row);
    }

    let mut series = Vec::with_capacity(grouped.len());
    for ((unit, camera), mut rows) in grouped {
        rows.sort_by_key(|r| r.date);
        let epoch = epoch.expect("non-empty group implies an epoch");
        let day = |d: NaiveDate| (d - epoch).num_days();
        let mut records = Vec::with_capacity(rows.len());
        for row in rows {
            let time = day(row.date);
            let annotation = match (row.cover, row.interpolated) {
                (None, _) => None,
                (Some(cover), None) => Some(Annotation::reference(time, cover)),
                (Some(cover), Some((confidence, left, right))) => Some(
                    Annotation::interpolated(time, cover, day(left), day(right), confidence)
                        .map_err(|source| ManifestError::Record {
                            line: row.line,
                            source,
                        })?,
                ),
            };
            records.push(ImageRecord {
                unit_id: row.unit,
                camera_id: row.camera,
                time,
                image_path: row.path,
                annotation,
            });
        }
        // Ordering and uniqueness were established above.
        series.push(PlotSeries {
            unit_id: unit,
            camera_id: camera,
            records,
        });
    }

    Ok(Manifest {
        registry: Arc::clone(registry),
        epoch,
        series,
    })
}

/// Renders series as a manifest, day `d` written as `epoch + d`.
pub fn write_manifest(series: &[PlotSeries], registry: &SpeciesRegistry, epoch: NaiveDate) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let header: Vec<&str> = BASE_COLUMNS
        .iter()
        .copied()
        .chain(registry.names().iter().map(String::as_str))
        .chain(EXTRA_COLUMNS)
        .collect();
    writer.write_record(&header).expect("in-memory write");
    let date = |d: Day| (epoch + chrono::Duration::days(d)).format("%Y-%m-%d").to_string();

    for s in series {
        for r in &s.records {
            let mut row = vec![
                r.unit_id.clone(),
                r.camera_id.clone(),
                date(r.time),
                r.image_path.clone(),
                if r.annotation.is_some() { "1" } else { "0" }.to_string(),
            ];
            match &r.annotation {
                None => row.extend(std::iter::repeat_n(String::new(), registry.len() + 4)),
                Some(a) => {
                    row.extend(a.cover.values().iter().map(|&v| fraction_to_percent(v)));
                    match a.provenance {
                        Provenance::Reference => {
                            row.extend(["reference".to_string(), String::new(), String::new(), String::new()])
                        }
                        Provenance::Interpolated {
                            left_time,
                            right_time,
                            confidence,
                        } => row.extend([
                            "interpolated".to_string(),
                            confidence.to_string(),
                            date(left_time),
                            date(right_time),
                        ]),
                    }
                }
            }
            writer.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(writer.into_inner().expect("flush to Vec")).expect("csv output is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub start: Day,
    pub end: Day,
    pub length: Day,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    Unusable,
    GapTooLong { start: Day, end: Day, length: Day },
    OutsideEnvelope { time: Day },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unusable => write!(f, "series has no reference annotation"),
            Self::GapTooLong { start, end, length } => {
                write!(f, "{length}-day gap between references on days {start} and {end}")
            }
            Self::OutsideEnvelope { time } => {
                write!(f, "day {time} lies outside the reference envelope")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub unit_id: String,
    pub camera_id: String,
    pub total_records: usize,
    pub annotated_records: usize,
    pub reference_records: usize,
    pub usable: bool,
    /// Consecutive reference pairs more than one day apart.
    pub gaps: Vec<Gap>,
    /// Times of records before the first or after the last reference.
    pub outside_envelope: Vec<Day>,
}

impl ValidationReport {
    /// Problems worth a non-zero exit: unusable series, gaps longer than
    /// `max_gap_days`, and records outside the reference envelope.
    pub fn findings(&self, max_gap_days: u32) -> Vec<Finding> {
        let mut out = Vec::new();
        if !self.usable {
            out.push(Finding::Unusable);
        }
        out.extend(
            self.gaps
                .iter()
                .filter(|g| g.length > i64::from(max_gap_days))
                .map(|g| Finding::GapTooLong {
                    start: g.start,
                    end: g.end,
                    length: g.length,
                }),
        );
        out.extend(
            self.outside_envelope
                .iter()
                .map(|&time| Finding::OutsideEnvelope { time }),
        );
        out
    }
}

pub fn validate_series(series: &PlotSeries) -> ValidationReport {
    let ref_times: Vec<Day> = series
        .records()
        .iter()
        .filter(|r| r.reference().is_some())
        .map(|r| r.time)
        .collect();
    let gaps = ref_times
        .windows(2)
        .filter(|w| w[1] - w[0] > 1)
        .map(|w| Gap {
            start: w[0],
            end: w[1],
            length: w[1] - w[0],
        })
        .collect();
    let outside_envelope = match (ref_times.first(), ref_times.last()) {
        (Some(&lo), Some(&hi)) => series
            .records()
            .iter()
            .map(|r| r.time)
            .filter(|&t| t < lo || t > hi)
            .collect(),
        _ => Vec::new(),
    };
    ValidationReport {
        unit_id: series.unit_id().to_string(),
        camera_id: series.camera_id().to_string(),
        total_records: series.records().len(),
        annotated_records: series.annotated_count(),
        reference_records: ref_times.len(),
        usable: !ref_times.is_empty(),
        gaps,
        outside_envelope,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn registry() -> Arc<SpeciesRegistry> {
        Arc::new(SpeciesRegistry::new(["Trifolium", "Achillea", "Grasses"]).unwrap())
    }

    const FIG1: &str = "\
unit_id,camera_id,date,image_path,annotated,Trifolium,Achillea,Grasses
eu01,cam1,2018-05-17,img/0517.jpg,1,15,5,25
eu01,cam1,2018-05-18,img/0518.jpg,0,,,
eu01,cam1,2018-05-19,img/0519.jpg,0,,,
eu01,cam1,2018-05-20,img/0520.jpg,0,,,
eu01,cam1,2018-05-21,img/0521.jpg,0,,,
eu01,cam1,2018-05-22,img/0522.jpg,0,,,
eu01,cam1,2018-05-23,img/0523.jpg,0,,,
eu01,cam1,2018-05-24,img/0524.jpg,1,25,10,40
";

    #[test]
    fn registry_rejects_duplicates_and_blanks() {
        assert!(matches!(
            SpeciesRegistry::new(["a", "b", "a"]),
            Err(DatasetError::DuplicateSpecies(_))
        ));
        assert!(SpeciesRegistry::parse("a\n\n").is_ok());
        assert_eq!(SpeciesRegistry::parse("\n\n"), Err(DatasetError::EmptyRegistry));
        let r = SpeciesRegistry::parse("Trifolium\nAchillea\n").unwrap();
        assert_eq!(r.index_of("Achillea"), Some(1));
    }

    #[test]
    fn cover_vector_requires_full_keying() {
        let reg = registry();
        assert!(CoverVector::new(reg.clone(), vec![0.1, 0.2]).is_err());
        assert!(CoverVector::new(reg.clone(), vec![0.1, 0.2, 1.2]).is_err());
        let c = CoverVector::new(reg.clone(), vec![0.9, 0.8, 0.7]).unwrap();
        assert!(c.total() > 1.0);
        assert!(CoverVector::from_pairs(reg, [("Trifolium", 0.1), ("Grasses", 0.2)]).is_err());
    }

    #[test]
    fn parses_the_weekly_example() {
        let m = parse_manifest(FIG1, &registry()).unwrap();
        assert_eq!(m.series.len(), 1);
        let s = &m.series[0];
        assert_eq!(s.records().len(), 8);
        assert_eq!(s.reference_count(), 2);
        assert_eq!(s.records()[7].time, 7);
        let last = s.records()[7].reference().unwrap();
        assert_eq!(last.cover.get("Grasses"), Some(0.40));
        assert_eq!(m.epoch, NaiveDate::from_ymd_opt(2018, 5, 17));
    }

    #[test]
    fn empty_body_gives_no_series() {
        let header = FIG1.lines().next().unwrap();
        let m = parse_manifest(header, &registry()).unwrap();
        assert!(m.series.is_empty());
        assert_eq!(m.epoch, None);
    }

    #[test]
    fn rows_are_sorted_by_date() {
        let mut lines: Vec<&str> = FIG1.lines().collect();
        lines[1..].reverse();
        let shuffled = lines.join("\n");
        let a = parse_manifest(FIG1, &registry()).unwrap();
        let b = parse_manifest(&shuffled, &registry()).unwrap();
        assert_eq!(a.series, b.series);
    }

    #[test]
    fn duplicate_rows_name_the_line() {
        let text = format!("{FIG1}eu01,cam1,2018-05-20,img/dup.jpg,0,,,\n");
        let err = parse_manifest(&text, &registry()).unwrap_err();
        assert!(matches!(err, ManifestError::Duplicate { line: 10, first_line: 5, .. }), "{err}");
    }

    #[test]
    fn annotated_rows_need_every_species() {
        let text = FIG1.replace("1,25,10,40", "1,25,,40");
        let err = parse_manifest(&text, &registry()).unwrap_err();
        assert_eq!(
            err,
            ManifestError::BlankSpecies {
                line: 9,
                species: "Achillea".into()
            }
        );
    }

    #[test]
    fn percent_and_date_errors() {
        let text = FIG1.replace("1,25,10,40", "1,25,10,140");
        assert!(matches!(
            parse_manifest(&text, &registry()),
            Err(ManifestError::Percent { line: 9, .. })
        ));
        let text = FIG1.replace("2018-05-24", "2018-05-32");
        assert!(matches!(
            parse_manifest(&text, &registry()),
            Err(ManifestError::Date { line: 9, .. })
        ));
        let text = FIG1.replace("2018-05-24", "2018-05-24T10:00:00");
        assert!(matches!(
            parse_manifest(&text, &registry()),
            Err(ManifestError::SubDay { line: 9, .. })
        ));
    }

    #[test]
    fn missing_and_unknown_columns() {
        let text = FIG1.replace(",Grasses", "");
        assert_eq!(
            parse_manifest(&text, &registry()),
            Err(ManifestError::MissingColumn("Grasses".into()))
        );
        let text = FIG1.replacen("Grasses", "Grasses,Notes", 1);
        assert_eq!(
            parse_manifest(&text, &registry()),
            Err(ManifestError::UnknownColumn("Notes".into()))
        );
    }

    #[test]
    fn percent_conversion_is_exact() {
        assert_eq!(percent_to_fraction("15"), Some(0.15));
        assert_eq!(percent_to_fraction("12.5"), Some(0.125));
        assert_eq!(percent_to_fraction("100"), Some(1.0));
        assert_eq!(percent_to_fraction("0.000001"), Some(1e-8));
        assert_eq!(percent_to_fraction("-1"), None);
        assert_eq!(percent_to_fraction("1e3"), None);
        assert_eq!(fraction_to_percent(0.15), "15.000000");
        assert_eq!(fraction_to_percent(1.0), "100.000000");
        assert_eq!(fraction_to_percent(1e-8), "0.000001");
        assert_eq!(fraction_to_percent(0.0), "0.000000");
    }

    #[test]
    fn round_trip_of_the_weekly_example() {
        let reg = registry();
        let m = parse_manifest(FIG1, &reg).unwrap();
        let again = parse_manifest(&m.to_csv(), &reg).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn validation_of_the_weekly_example() {
        let m = parse_manifest(FIG1, &registry()).unwrap();
        let report = validate_series(&m.series[0]);
        assert_eq!(report.gaps, vec![Gap { start: 0, end: 7, length: 7 }]);
        assert_eq!((report.annotated_records, report.total_records), (2, 8));
        assert!(report.outside_envelope.is_empty());
        assert!(report.findings(14).is_empty());
        assert_eq!(report.findings(6).len(), 1);
    }

    #[test]
    fn validation_flags_records_beyond_a_single_reference() {
        let text = FIG1.replace("1,25,10,40", "0,,,");
        let m = parse_manifest(&text, &registry()).unwrap();
        let report = validate_series(&m.series[0]);
        assert_eq!(report.outside_envelope, (1..=7).collect::<Vec<_>>());
        assert!(report.gaps.is_empty());
    }

    #[test]
    fn fully_annotated_series_has_no_gaps() {
        let reg = registry();
        let cover = CoverVector::new(reg, vec![0.1, 0.2, 0.3]).unwrap();
        let records = (0..5)
            .map(|t| {
                ImageRecord::new("u", "c", t, format!("{t}.png"), Some(Annotation::reference(t, cover.clone())))
            })
            .collect();
        let s = PlotSeries::new("u", "c", records).unwrap();
        let report = validate_series(&s);
        assert!(report.gaps.is_empty());
        assert_eq!(report.annotated_records, 5);
    }

    #[test]
    fn series_constructor_enforces_order() {
        let recs = vec![
            ImageRecord::new("u", "c", 3, "a.png", None),
            ImageRecord::new("u", "c", 3, "b.png", None),
        ];
        assert!(matches!(
            PlotSeries::new("u", "c", recs),
            Err(DatasetError::Unordered { .. })
        ));
    }

    fn arb_series(reg: Arc<SpeciesRegistry>) -> impl Strategy<Value = Vec<PlotSeries>> {
        let n = reg.len();
        let record = (
            1i64..4,
            prop::option::of((
                prop::collection::vec(0.0f64..=1.0, n),
                prop::option::of((0.0f64..=1.0, 1i64..5, 1i64..5)),
            )),
        );
        prop::collection::vec(prop::collection::vec(record, 1..12), 1..4).prop_map(move |all| {
            all.into_iter()
                .enumerate()
                .map(|(si, recs)| {
                    let mut t = 0;
                    let records = recs
                        .into_iter()
                        .enumerate()
                        .map(|(i, (step, ann))| {
                            if i > 0 {
                                t += step;
                            }
                            let annotation = ann.map(|(vals, interp)| {
                                let cover = CoverVector::new(reg.clone(), vals).unwrap();
                                match interp {
                                    None => Annotation::reference(t, cover),
                                    Some((conf, l, r)) => {
                                        Annotation::interpolated(t, cover, t - l, t + r, conf).unwrap()
                                    }
                                }
                            });
                            ImageRecord::new(format!("u{si}"), "cam", t, format!("p/{si}/{t}.jpg"), annotation)
                        })
                        .collect();
                    PlotSeries::new(format!("u{si}"), "cam", records).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(series in arb_series(registry())) {
            let reg = registry();
            // Every series starts at day 0, so the earliest row date is the epoch.
            let epoch = NaiveDate::from_ymd_opt(2018, 4, 1).unwrap();
            let text = write_manifest(&series, &reg, epoch);
            let parsed = parse_manifest(&text, &reg).unwrap();
            prop_assert_eq!(parsed.epoch, Some(epoch));
            prop_assert_eq!(parsed.series, series);
        }

        #[test]
        fn percent_text_round_trips(f in 0.0f64..=1.0) {
            prop_assert_eq!(percent_to_fraction(&fraction_to_percent(f)), Some(f));
        }
    }
}
