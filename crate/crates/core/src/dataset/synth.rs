//! Synthetic benchmark in which text and image each carry half of the label.
//!
//! Classes are indexed `coarse * n_fine + fine`. Every text embedding holds
//! a one-hot of the coarse index and every image region a one-hot of the
//! fine index, each plus Gaussian noise. Text alone therefore cannot beat
//! `1/n_fine` accuracy, image alone cannot beat `1/n_coarse`, and the two
//! together identify the class.

use serde::{Deserialize, Serialize};

use super::format::EmbeddingFile;
use super::manifest::{DatasetDescriptor, Manifest, ManifestRow, Split};
use super::Dataset;
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    pub d_text: usize,
    pub d_image_raw: usize,
    pub n_regions: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_coarse: 9,
            n_fine: 3,
            samples_per_class: 50,
            noise_sigma: 0.1,
            d_text: 16,
            d_image_raw: 32,
            n_regions: 16,
        }
    }
}

impl SyntheticSpec {
    pub fn classes(&self) -> usize {
        self.n_coarse * self.n_fine
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::config(format!("synthetic spec: {msg}")));
        if self.n_coarse == 0 || self.n_fine == 0 {
            return fail("n_coarse and n_fine must be positive".into());
        }
        if self.samples_per_class == 0 {
            return fail("samples_per_class must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if self.d_text < self.n_coarse {
            return fail(format!("d_text {} < n_coarse {}", self.d_text, self.n_coarse));
        }
        if self.d_image_raw < self.n_fine {
            return fail(format!("d_image_raw {} < n_fine {}", self.d_image_raw, self.n_fine));
        }
        if self.n_regions == 0 {
            return fail("n_regions must be positive".into());
        }
        Ok(())
    }

    pub fn coarse_of(&self, label: usize) -> usize {
        label / self.n_fine
    }

    pub fn fine_of(&self, label: usize) -> usize {
        label % self.n_fine
    }
}

fn one_hot_noisy(dim: usize, hot: usize, sigma: f64, rng: &mut SeededRng, out: &mut Vec<f32>) {
    for j in 0..dim {
        let base = if j == hot { 1.0 } else { 0.0 };
        let noise = if sigma > 0.0 { sigma * rng.normal() } else { 0.0 };
        out.push((base + noise) as f32);
    }
}

/// Generates the dataset with every split `unassigned`, samples ordered by
/// class.
pub fn synth_generate(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = SeededRng::new(seed, "synth");
    let (d_text, d_image) = (spec.d_text as u32, spec.d_image_raw as u32);
    let mut text: Vec<EmbeddingFile> = (0..4).map(|_| EmbeddingFile::empty(1, d_text)).collect::<Result<_>>()?;
    let mut regions = EmbeddingFile::empty(spec.n_regions as u32, d_image)?;
    let mut rows = Vec::with_capacity(spec.classes() * spec.samples_per_class);
    let mut buf = Vec::new();

    for label in 0..spec.classes() {
        let (coarse, fine) = (spec.coarse_of(label), spec.fine_of(label));
        for _ in 0..spec.samples_per_class {
            for file in text.iter_mut() {
                buf.clear();
                one_hot_noisy(spec.d_text, coarse, spec.noise_sigma, &mut rng, &mut buf);
                file.push_sample(&buf)?;
            }
            buf.clear();
            for _ in 0..spec.n_regions {
                one_hot_noisy(spec.d_image_raw, fine, spec.noise_sigma, &mut rng, &mut buf);
            }
            regions.push_sample(&buf)?;
            rows.push(ManifestRow {
                sample_id: format!("syn{:06}", rows.len()),
                label,
                split: Split::Unassigned,
            });
        }
    }

    let mut descriptor = DatasetDescriptor::new(spec.classes(), spec.d_text, spec.d_image_raw, spec.n_regions);
    descriptor.metadata.insert("source".into(), "synthetic".into());
    descriptor.metadata.insert(
        "synthetic".into(),
        format!(
            "n_coarse={} n_fine={} samples_per_class={} noise_sigma={} seed={seed}",
            spec.n_coarse, spec.n_fine, spec.samples_per_class, spec.noise_sigma
        ),
    );
    let [title_f, title_c, desc_f, desc_c]: [EmbeddingFile; 4] =
        text.try_into().expect("four text files");
    Ok(Dataset {
        descriptor,
        manifest: Manifest::new(rows),
        title_f,
        title_c,
        desc_f,
        desc_c,
        image_regions: regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_labels() {
        let spec = SyntheticSpec {
            d_text: 9,
            d_image_raw: 4,
            n_regions: 2,
            ..SyntheticSpec::default()
        };
        let d = synth_generate(&spec, 1).unwrap();
        assert_eq!(d.len(), 1350);
        let labels = d.labels();
        assert_eq!(*labels.iter().max().unwrap(), 26);
        for c in 0..27 {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 50);
        }
        assert_eq!(d.image_regions.rows_per_sample(), 2);
    }

    #[test]
    fn noiseless_text_is_one_hot_coarse() {
        let spec = SyntheticSpec {
            noise_sigma: 0.0,
            samples_per_class: 2,
            ..SyntheticSpec::default()
        };
        let d = synth_generate(&spec, 3).unwrap();
        for (i, row) in d.manifest.rows.iter().enumerate() {
            let coarse = spec.coarse_of(row.label);
            for f in [&d.title_f, &d.title_c, &d.desc_f, &d.desc_c] {
                let v = f.sample(i);
                let nonzero: Vec<usize> = (0..v.len()).filter(|&j| v[j] != 0.0).collect();
                assert_eq!(nonzero, vec![coarse]);
            }
            let fine = spec.fine_of(row.label);
            for region in d.image_regions.sample(i).chunks(spec.d_image_raw) {
                assert_eq!(region[fine], 1.0);
                assert_eq!(region.iter().filter(|&&x| x != 0.0).count(), 1);
            }
        }
    }

    #[test]
    fn deterministic_bytes() {
        let spec = SyntheticSpec {
            samples_per_class: 3,
            ..SyntheticSpec::default()
        };
        let a = synth_generate(&spec, 11).unwrap();
        let b = synth_generate(&spec, 11).unwrap();
        let c = synth_generate(&spec, 12).unwrap();
        for (x, y) in a.modality_files().iter().zip(b.modality_files()) {
            assert_eq!(x.to_bytes(), y.to_bytes());
        }
        assert_ne!(a.title_f.to_bytes(), c.title_f.to_bytes());
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SyntheticSpec { d_text: 8, ..SyntheticSpec::default() },
            SyntheticSpec { d_image_raw: 2, ..SyntheticSpec::default() },
            SyntheticSpec { noise_sigma: -0.1, ..SyntheticSpec::default() },
            SyntheticSpec { n_fine: 0, ..SyntheticSpec::default() },
        ];
        for spec in bad {
            assert!(matches!(synth_generate(&spec, 0), Err(Error::Config(_))), "{spec:?}");
        }
    }
}
