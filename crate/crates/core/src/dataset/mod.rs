//! Embedding files, manifests, splits, validation and the synthetic
//! benchmark.

mod format;
mod manifest;
mod split;
mod synth;
mod validate;

pub use format::{read_embeddings, write_embeddings, EmbeddingFile, HEADER_LEN, MAGIC, VERSION};
pub use manifest::{
    DatasetDescriptor, Manifest, ManifestRow, ModalityFiles, Split, DESCRIPTOR_FILE, MANIFEST_HEADER,
};
pub use split::{split_counts, split_dataset, VAL_FRACTION};
pub use synth::{synth_generate, SyntheticSpec};
pub use validate::{validate, ValidationReport, Violation};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::{region_average, FusionInput, ModalitySample, RegionStack};
use crate::numeric::{DenseMatrix, DenseVector};

/// A dataset held in memory: descriptor, manifest and the five modality
/// files. Loading performs format checks only; use [`validate`] for
/// cross-file consistency.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub descriptor: DatasetDescriptor,
    pub manifest: Manifest,
    pub title_f: EmbeddingFile,
    pub title_c: EmbeddingFile,
    pub desc_f: EmbeddingFile,
    pub desc_c: EmbeddingFile,
    pub image_regions: EmbeddingFile,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

impl Dataset {
    /// Loads from a descriptor file, or from a directory containing
    /// `dataset.toml`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let descriptor_path = if path.is_dir() {
            path.join(DESCRIPTOR_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&descriptor_path).map_err(|e| Error::io(&descriptor_path, e))?;
        let descriptor = DatasetDescriptor::from_toml(&text)?;
        let base = descriptor_path.parent().unwrap_or(Path::new("."));
        let files = &descriptor.files;
        Ok(Dataset {
            manifest: Manifest::load(resolve(base, &descriptor.manifest))?,
            title_f: read_embeddings(resolve(base, &files.title_f))?,
            title_c: read_embeddings(resolve(base, &files.title_c))?,
            desc_f: read_embeddings(resolve(base, &files.desc_f))?,
            desc_c: read_embeddings(resolve(base, &files.desc_c))?,
            image_regions: read_embeddings(resolve(base, &files.image_regions))?,
            descriptor,
        })
    }

    /// Writes the descriptor, manifest and embedding files into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = &self.descriptor.files;
        self.manifest.save(dir.join(&self.descriptor.manifest))?;
        for (file, rel) in self.modality_files().into_iter().zip([
            &files.title_f,
            &files.title_c,
            &files.desc_f,
            &files.desc_c,
            &files.image_regions,
        ]) {
            write_embeddings(dir.join(rel), file)?;
        }
        let descriptor_path = dir.join(DESCRIPTOR_FILE);
        fs::write(&descriptor_path, self.descriptor.to_toml()?).map_err(|e| Error::io(&descriptor_path, e))?;
        Ok(descriptor_path)
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    pub fn modality_files(&self) -> [&EmbeddingFile; 5] {
        [
            &self.title_f,
            &self.title_c,
            &self.desc_f,
            &self.desc_c,
            &self.image_regions,
        ]
    }

    pub fn labels(&self) -> Vec<usize> {
        self.manifest.rows.iter().map(|r| r.label).collect()
    }

    fn vector(file: &EmbeddingFile, i: usize) -> DenseVector<f32> {
        DenseVector::new(file.sample(i).to_vec())
    }

    fn regions(&self, i: usize) -> Result<RegionStack<f32>> {
        let f = &self.image_regions;
        RegionStack::new(DenseMatrix::new(f.rows_per_sample(), f.dim(), f.sample(i).to_vec())?)
    }

    pub fn sample(&self, i: usize) -> Result<ModalitySample<f32>> {
        self.check_index(i)?;
        Ok(ModalitySample {
            title_first: Self::vector(&self.title_f, i),
            title_second: Self::vector(&self.title_c, i),
            desc_first: Self::vector(&self.desc_f, i),
            desc_second: Self::vector(&self.desc_c, i),
            regions: self.regions(i)?,
            label: self.manifest.rows[i].label,
        })
    }

    /// Model input for sample `i` with the image regions already averaged.
    pub fn input(&self, i: usize) -> Result<FusionInput<f32>> {
        self.check_index(i)?;
        Ok(FusionInput {
            title_first: Self::vector(&self.title_f, i),
            title_second: Self::vector(&self.title_c, i),
            desc_first: Self::vector(&self.desc_f, i),
            desc_second: Self::vector(&self.desc_c, i),
            image: region_average(&self.regions(i)?),
        })
    }

    pub fn inputs(&self) -> Result<Vec<FusionInput<f32>>> {
        (0..self.len()).map(|i| self.input(i)).collect()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        let available = self.modality_files().iter().map(|f| f.count()).min().unwrap_or(0).min(self.len());
        if i >= available {
            return Err(Error::Index {
                context: "dataset sample".into(),
                index: i,
                len: available,
            });
        }
        Ok(())
    }
}
