use std::collections::BTreeMap;

use super::manifest::{Manifest, Split};
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

/// Share of the post-test remainder of each class carved out for validation.
pub const VAL_FRACTION: f64 = 0.1;

/// `(test, val, train)` counts for a class of `n` samples:
/// `test = round(n * f)`, `val = round((n - test) * 0.1)`, the rest train.
pub fn split_counts(n: usize, test_fraction: f64) -> (usize, usize, usize) {
    let test = ((n as f64) * test_fraction).round() as usize;
    let rest = n - test.min(n);
    let val = ((rest as f64) * VAL_FRACTION).round() as usize;
    (test.min(n), val, rest - val)
}

/// Stratified, seeded assignment of every row to train, val or test.
///
/// Within each class (in ascending label order) the rows are shuffled by the
/// `"split"` stream of `seed` and then dealt out per [`split_counts`].
pub fn split_dataset(manifest: &Manifest, test_fraction: f64, seed: u64) -> Result<Manifest> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Split(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, row) in manifest.rows.iter().enumerate() {
        by_class.entry(row.label).or_default().push(i);
    }
    if let Some((label, rows)) = by_class.iter().find(|(_, rows)| rows.len() < 3) {
        return Err(Error::Split(format!(
            "class {label} has {} samples; at least 3 are required",
            rows.len()
        )));
    }

    let mut out = manifest.clone();
    let mut rng = SeededRng::new(seed, "split");
    for rows in by_class.values_mut() {
        rng.shuffle(rows);
        let (test, val, _) = split_counts(rows.len(), test_fraction);
        for (k, &i) in rows.iter().enumerate() {
            out.rows[i].split = if k < test {
                Split::Test
            } else if k < test + val {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ManifestRow;

    fn manifest(classes: usize, per_class: usize) -> Manifest {
        Manifest::new(
            (0..classes * per_class)
                .map(|i| ManifestRow {
                    sample_id: format!("s{i}"),
                    label: i / per_class,
                    split: Split::Unassigned,
                })
                .collect(),
        )
    }

    fn counts(m: &Manifest, label: usize) -> (usize, usize, usize) {
        let of = |s| m.rows.iter().filter(|r| r.label == label && r.split == s).count();
        (of(Split::Test), of(Split::Val), of(Split::Train))
    }

    #[test]
    fn one_class_ninety_ten() {
        let m = split_dataset(&manifest(1, 100), 0.1, 1).unwrap();
        assert_eq!(counts(&m, 0), (10, 9, 81));
    }

    #[test]
    fn per_class_eighty_twenty() {
        let m = split_dataset(&manifest(27, 100), 0.2, 5).unwrap();
        for c in 0..27 {
            assert_eq!(counts(&m, c), (20, 8, 72));
        }
        assert!(m.rows.iter().all(|r| r.split != Split::Unassigned));
    }

    #[test]
    fn seeded_and_shuffled() {
        let a = split_dataset(&manifest(2, 50), 0.1, 9).unwrap();
        let b = split_dataset(&manifest(2, 50), 0.1, 9).unwrap();
        let c = split_dataset(&manifest(2, 50), 0.1, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Not simply the first rows of each class.
        assert!(a.rows[..5].iter().any(|r| r.split != Split::Test));
    }

    #[test]
    fn tiny_class_rejected() {
        let mut m = manifest(2, 10);
        m.rows.push(ManifestRow {
            sample_id: "odd".into(),
            label: 7,
            split: Split::Unassigned,
        });
        let err = split_dataset(&m, 0.1, 1).unwrap_err();
        assert!(err.to_string().contains("class 7"), "{err}");
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(split_counts(3, 0.1), (0, 0, 3));
        assert_eq!(split_counts(15, 0.1), (2, 1, 12));
        assert_eq!(split_counts(50, 0.1), (5, 5, 40));
        assert_eq!(split_counts(5, 0.1), (1, 0, 4));
    }
}
