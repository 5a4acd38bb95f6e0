//! Cover tables: `image_id,<species...>` CSV files with percent cover cells.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use coverkit::dataset::{fraction_to_percent, percent_to_fraction};
use coverkit::{AbundanceMatrix, CoverVector, SpeciesRegistry};

#[derive(Debug, Clone, PartialEq)]
pub struct CoverTable {
    pub registry: Arc<SpeciesRegistry>,
    pub ids: Vec<String>,
    pub covers: Vec<CoverVector>,
}

impl CoverTable {
    pub fn new(registry: Arc<SpeciesRegistry>, ids: Vec<String>, covers: Vec<CoverVector>) -> Self {
        Self { registry, ids, covers }
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader.headers().context("line 1: unreadable header")?.clone();
        if header.get(0) != Some("image_id") {
            bail!("line 1: first column must be image_id");
        }
        let registry = Arc::new(
            SpeciesRegistry::new(header.iter().skip(1)).map_err(|e| anyhow!("line 1: {e}"))?,
        );
        let mut ids = Vec::new();
        let mut covers = Vec::new();
        let mut seen = HashSet::new();
        for record in reader.records() {
            let record = record.map_err(|e| anyhow!("{e}"))?;
            let line = record.position().map_or(0, |p| p.line());
            let id = record.get(0).unwrap_or_default().to_string();
            if id.is_empty() {
                bail!("line {line}: empty image_id");
            }
            if !seen.insert(id.clone()) {
                bail!("line {line}: duplicate image_id {id:?}");
            }
            let values = record
                .iter()
                .skip(1)
                .zip(registry.names())
                .map(|(cell, species)| {
                    percent_to_fraction(cell).ok_or_else(|| anyhow!("line {line}: bad percent {cell:?} for {species}"))
                })
                .collect::<anyhow::Result<Vec<f64>>>()?;
            let cover = CoverVector::new(Arc::clone(&registry), values).map_err(|e| anyhow!("line {line}: {e}"))?;
            ids.push(id);
            covers.push(cover);
        }
        Ok(Self { registry, ids, covers })
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("image_id")
            .chain(self.registry.names().iter().map(String::as_str))
            .collect();
        writer.write_record(&header).expect("in-memory write");
        for (id, cover) in self.ids.iter().zip(&self.covers) {
            let row: Vec<String> = std::iter::once(id.clone())
                .chain(cover.values().iter().map(|&v| fraction_to_percent(v)))
                .collect();
            writer.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("flush to Vec")).expect("UTF-8")
    }

    /// The same table with columns in `registry` order and rows in `ids`
    /// order. Species and id sets must match exactly.
    pub fn aligned_to(&self, registry: &Arc<SpeciesRegistry>, ids: &[String]) -> anyhow::Result<Self> {
        let mine: HashSet<&String> = self.registry.names().iter().collect();
        let theirs: HashSet<&String> = registry.names().iter().collect();
        if mine != theirs {
            let mut missing: Vec<&String> = theirs.difference(&mine).copied().collect();
            let mut extra: Vec<&String> = mine.difference(&theirs).copied().collect();
            missing.sort();
            extra.sort();
            bail!("species columns differ: missing {missing:?}, unexpected {extra:?}");
        }
        let own_ids: HashSet<&String> = self.ids.iter().collect();
        let wanted: HashSet<&String> = ids.iter().collect();
        if own_ids != wanted {
            let mut missing: Vec<&String> = wanted.difference(&own_ids).copied().collect();
            let mut extra: Vec<&String> = own_ids.difference(&wanted).copied().collect();
            missing.sort();
            extra.sort();
            bail!("image ids differ: missing {missing:?}, unexpected {extra:?}");
        }
        let columns: Vec<usize> = registry
            .names()
            .iter()
            .map(|n| self.registry.index_of(n).expect("same species set"))
            .collect();
        let covers = ids
            .iter()
            .map(|id| {
                let row = self.ids.iter().position(|x| x == id).expect("same id set");
                let values = columns.iter().map(|&c| self.covers[row].values()[c]).collect();
                CoverVector::new(Arc::clone(registry), values).expect("values already validated")
            })
            .collect();
        Ok(Self {
            registry: Arc::clone(registry),
            ids: ids.to_vec(),
            covers,
        })
    }

    pub fn matrix(&self) -> anyhow::Result<AbundanceMatrix> {
        Ok(AbundanceMatrix::from_covers(self.ids.clone(), &self.covers)?)
    }
}
