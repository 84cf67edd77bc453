use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "sample_id,label,split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sample_id: String,
    pub label: usize,
    pub split: Split,
}

/// One row per sample, in the same order as every embedding file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(rows: Vec<ManifestRow>) -> Self {
        Manifest { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row indices assigned to `split`, in manifest order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in &self.rows {
            writer
                .write_record([row.sample_id.as_str(), &row.label.to_string(), row.split.as_str()])
                .map_err(|e| Error::config(format!("manifest row {}: {e}", row.sample_id)))?;
        }
        let body = writer.into_inner().map_err(|e| Error::config(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| Error::config(e.to_string()))?;
        Ok(format!("{MANIFEST_HEADER}\n{body}"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let header = text.lines().next().unwrap_or_default().trim_end_matches('\r');
        if header != MANIFEST_HEADER {
            return Err(Error::format(0, format!("manifest header must be {MANIFEST_HEADER:?}, got {header:?}")));
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::config(format!("manifest: {e}")))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(Error::config(format!("manifest line {line}: expected 3 fields, got {}", record.len())));
            }
            let label = record[1]
                .parse()
                .map_err(|_| Error::config(format!("manifest line {line}: bad label {:?}", &record[1])))?;
            let split = record[2]
                .parse()
                .map_err(|e| Error::config(format!("manifest line {line}: {e}")))?;
            rows.push(ManifestRow {
                sample_id: record[0].to_owned(),
                label,
                split,
            });
        }
        Ok(Manifest { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

/// File references for the five modality files, relative to the descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityFiles {
    pub title_f: String,
    pub title_c: String,
    pub desc_f: String,
    pub desc_c: String,
    pub image_regions: String,
}

impl Default for ModalityFiles {
    fn default() -> Self {
        ModalityFiles {
            title_f: "title_f.mmeb".into(),
            title_c: "title_c.mmeb".into(),
            desc_f: "desc_f.mmeb".into(),
            desc_c: "desc_c.mmeb".into(),
            image_regions: "image_regions.mmeb".into(),
        }
    }
}

impl ModalityFiles {
    /// `(name, path)` pairs for the text files, in a fixed order.
    pub fn text(&self) -> [(&'static str, &str); 4] {
        [
            ("title_f", &self.title_f),
            ("title_c", &self.title_c),
            ("desc_f", &self.desc_f),
            ("desc_c", &self.desc_c),
        ]
    }
}

/// Dataset descriptor: class count, dimensions and file references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDescriptor {
    pub classes: usize,
    pub d_text: usize,
    pub d_image_raw: usize,
    pub n_regions: usize,
    pub manifest: String,
    pub files: ModalityFiles,
    /// Free-form provenance, e.g. which encoder produced the text vectors.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

pub const DESCRIPTOR_FILE: &str = "dataset.toml";

impl DatasetDescriptor {
    pub fn new(classes: usize, d_text: usize, d_image_raw: usize, n_regions: usize) -> Self {
        DatasetDescriptor {
            classes,
            d_text,
            d_image_raw,
            n_regions,
            manifest: "manifest.csv".into(),
            files: ModalityFiles::default(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("dataset descriptor: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("dataset descriptor: {e}")))
    }
}
