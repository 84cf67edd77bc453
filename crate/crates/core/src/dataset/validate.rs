use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending sample, when the problem is per-sample.
    pub sample_id: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sample_id {
            Some(id) => write!(f, "{id}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, sample_id: Option<&str>, field: &str, message: String) {
        self.violations.push(Violation {
            sample_id: sample_id.map(str::to_owned),
            field: field.to_owned(),
            message,
        });
    }
}

/// Cross-checks descriptor, manifest and embedding files.
pub fn validate(dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let d = &dataset.descriptor;
    let n = dataset.manifest.len();

    for (field, value) in [
        ("classes", d.classes),
        ("d_text", d.d_text),
        ("d_image_raw", d.d_image_raw),
        ("n_regions", d.n_regions),
    ] {
        if value == 0 {
            report.push(None, field, "must be positive".into());
        }
    }

    let files = [
        ("title_f", &dataset.title_f, 1, d.d_text, "d_text"),
        ("title_c", &dataset.title_c, 1, d.d_text, "d_text"),
        ("desc_f", &dataset.desc_f, 1, d.d_text, "d_text"),
        ("desc_c", &dataset.desc_c, 1, d.d_text, "d_text"),
        ("image_regions", &dataset.image_regions, d.n_regions, d.d_image_raw, "d_image_raw"),
    ];
    for (name, file, rows, dim, dim_key) in files {
        if file.dim() != dim {
            report.push(None, name, format!("dim {} disagrees with {dim_key} {dim}", file.dim()));
        }
        if file.rows_per_sample() != rows {
            report.push(None, name, format!("rows_per_sample {} (expected {rows})", file.rows_per_sample()));
        }
        if file.count() != n {
            report.push(None, name, format!("count {} disagrees with {n} manifest rows", file.count()));
        }
    }

    let mut seen = HashSet::new();
    for row in &dataset.manifest.rows {
        if row.label >= d.classes {
            report.push(
                Some(&row.sample_id),
                "label",
                format!("label {} outside 0..{}", row.label, d.classes),
            );
        }
        if !seen.insert(row.sample_id.as_str()) {
            report.push(Some(&row.sample_id), "sample_id", "duplicate sample id".into());
        }
    }

    for (name, file, ..) in files {
        for (i, row) in dataset.manifest.rows.iter().enumerate().take(file.count()) {
            if let Some(j) = file.sample(i).iter().position(|v| !v.is_finite()) {
                report.push(Some(&row.sample_id), name, format!("non-finite value at element {j}"));
            }
        }
    }
    report
}
