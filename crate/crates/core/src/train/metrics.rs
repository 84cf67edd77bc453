use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != n) {
            return Err(Error::shape("confusion matrix row", n, row.len()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_predictions(classes: usize, labels: &[usize], predictions: &[usize]) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::shape("predictions", labels.len(), predictions.len()));
        }
        let mut m = Self::new(classes);
        for (&truth, &pred) in labels.iter().zip(predictions) {
            m.record(truth, pred)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.classes();
        for index in [truth, predicted] {
            if index >= n {
                return Err(Error::Index {
                    context: "confusion matrix class".into(),
                    index,
                    len: n,
                });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => self.trace() as f64 / total as f64,
        }
    }

    pub fn class_metrics(&self, class: usize) -> ClassMetrics {
        let tp = self.counts[class][class];
        let support = self.row_sum(class);
        let predicted = self.col_sum(class);
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            class,
            precision,
            recall,
            f1,
            support,
            present: support > 0 || predicted > 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of samples whose true class is `class`.
    pub support: u64,
    /// Whether the class occurs in the ground truth or the predictions.
    pub present: bool,
}

/// Unweighted mean F1 over classes present in the ground truth or the
/// predictions.
pub fn macro_f1(matrix: &ConfusionMatrix) -> Result<f64> {
    if matrix.classes() == 0 {
        return Err(Error::config("macro-F1 of an empty confusion matrix"));
    }
    let present: Vec<ClassMetrics> = (0..matrix.classes())
        .map(|c| matrix.class_metrics(c))
        .filter(|m| m.present)
        .collect();
    if present.is_empty() {
        return Err(Error::config("macro-F1 of a confusion matrix with no samples"));
    }
    let mut sum = 0.0;
    for m in &present {
        sum += m.f1;
    }
    Ok(sum / present.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = ConfusionMatrix::from_predictions(3, &[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(macro_f1(&m).unwrap(), 1.0);
        let single = ConfusionMatrix::from_predictions(1, &[0, 0], &[0, 0]).unwrap();
        assert_eq!(macro_f1(&single).unwrap(), 1.0);
    }

    #[test]
    fn hand_oracle() {
        // Class 0: tp 1, fn 1 -> P 1, R 1/2. Class 1: tp 1, fp 1 -> P 1/2, R 1.
        let m = ConfusionMatrix::from_predictions(2, &[0, 0, 1], &[0, 1, 1]).unwrap();
        let c0 = m.class_metrics(0);
        let c1 = m.class_metrics(1);
        assert!((c0.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((c1.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((macro_f1(&m).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_prediction() {
        let labels = [0, 0, 1, 1, 2, 2];
        let m = ConfusionMatrix::from_predictions(3, &labels, &[0; 6]).unwrap();
        assert!((m.accuracy() - 1.0 / 3.0).abs() < 1e-12);
        // F1: class 0 = 2*(1/3*1)/(4/3) = 1/2, others 0.
        assert!((macro_f1(&m).unwrap() - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_classes_excluded() {
        let m = ConfusionMatrix::from_predictions(5, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(macro_f1(&m).unwrap(), 1.0);
        assert!(!m.class_metrics(4).present);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(macro_f1(&ConfusionMatrix::new(0)).is_err());
        assert!(macro_f1(&ConfusionMatrix::new(3)).is_err());
        assert!(ConfusionMatrix::from_counts(vec![vec![1, 2], vec![3]]).is_err());
        assert!(ConfusionMatrix::from_predictions(2, &[0, 2], &[0, 1]).is_err());
    }
}
