use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{macro_f1, ClassMetrics, ConfusionMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub samples: u64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    /// Mean training loss per epoch; empty for a plain evaluation.
    #[serde(default)]
    pub loss_curve: Vec<f64>,
}

impl MetricsReport {
    pub fn from_confusion(confusion: ConfusionMatrix, loss_curve: Vec<f64>) -> Result<Self> {
        Ok(MetricsReport {
            accuracy: confusion.accuracy(),
            macro_f1: macro_f1(&confusion)?,
            samples: confusion.total(),
            per_class: (0..confusion.classes()).map(|c| confusion.class_metrics(c)).collect(),
            confusion,
            loss_curve,
        })
    }

    /// Plain-text `key: value` report. Scores are percentages with two
    /// decimals; `per_class` appends a per-class table.
    pub fn render_text(&self, per_class: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "accuracy: {}", format_percent(self.accuracy));
        let _ = writeln!(out, "macro_f1: {}", format_percent(self.macro_f1));
        let _ = writeln!(out, "samples: {}", self.samples);
        if let Some(last) = self.loss_curve.last() {
            let _ = writeln!(out, "epochs: {}", self.loss_curve.len());
            let _ = writeln!(out, "final_train_loss: {last:.6}");
        }
        if per_class {
            let _ = writeln!(out, "\nclass  precision  recall    f1        support");
            for m in self.per_class.iter().filter(|m| m.present) {
                let _ = writeln!(
                    out,
                    "{:<6} {:<10} {:<9} {:<9} {}",
                    m.class,
                    format_percent(m.precision),
                    format_percent(m.recall),
                    format_percent(m.f1),
                    m.support
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `0.932` -> `"93.20%"`.
pub fn format_percent(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}
