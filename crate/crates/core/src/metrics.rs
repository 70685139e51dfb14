//! Pixel-level segmentation scores with foreground as the positive class.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::patching::BinaryImage;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl SegMetrics {
    /// Derives precision, recall and F1 from counts; empty denominators give 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }

    /// Pools counts across images (micro average).
    pub fn merge(&self, other: &SegMetrics) -> SegMetrics {
        Self::from_counts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn_ + other.fn_,
            self.tn + other.tn,
        )
    }

    /// `precision,recall,f1` with four decimals.
    pub fn csv_line(&self) -> String {
        format!("{:.4},{:.4},{:.4}", self.precision, self.recall, self.f1)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Counts over two masks of equal shape.
pub fn confusion(pred: &BinaryImage, gt: &BinaryImage) -> Result<SegMetrics> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(Error::InvalidInput(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    confusion_flat(pred.data(), gt.data())
}

/// [`confusion`] over flat masks.
pub fn confusion_flat(pred: &[bool], gt: &[bool]) -> Result<SegMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in pred.iter().zip(gt) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(SegMetrics::from_counts(tp, fp, fn_, tn))
}

/// Harmonic mean `2pr/(p + r)`, or 0 when both are 0.
pub fn f1_of(precision: f64, recall: f64) -> Result<f64> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(harmonic(precision, recall))
}

/// One row of an accuracy table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub algorithm: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Published averages (fractions) for screen-content segmentation:
/// `(algorithm, precision, recall, printed F1)`.
pub const REFERENCE_TABLE: [(&str, f64, f64, f64); 5] = [
    ("SPEC", 0.50, 0.64, 0.561),
    ("Hierarchical Clustering", 0.64, 0.69, 0.664),
    ("Low-rank Decomposition", 0.78, 0.865, 0.821),
    ("Least Absolute Deviation", 0.914, 0.87, 0.891),
    ("Structured Subspace Learning", 0.93, 0.86, 0.893),
];

/// CSV with header `algorithm,precision,recall,f1`.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("algorithm,precision,recall,f1\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4}",
            r.algorithm, r.precision, r.recall, r.f1
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(bits: &[u8]) -> BinaryImage {
        BinaryImage::new(1, bits.len(), bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = mask(&[1, 0, 1, 1, 0]);
        let m = confusion(&gt, &gt).unwrap();
        assert_eq!((m.fp, m.fn_), (0, 0));
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn inverted_prediction() {
        let gt = mask(&[1, 0, 1, 1, 0]);
        let inv = mask(&[0, 1, 0, 0, 1]);
        let m = confusion(&inv, &gt).unwrap();
        assert_eq!(m.tp, 0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn hand_counts() {
        // tp = 9, fp = 1, fn = 3, tn = 2
        let mut pred = vec![1u8; 10];
        pred.extend([0, 0, 0, 0, 0]);
        let mut gt = vec![1u8; 9];
        gt.extend([0, 1, 1, 1, 0, 0]);
        let m = confusion(&mask(&pred), &mask(&gt)).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (9, 1, 3, 2));
        assert!((m.precision - 0.9).abs() < 1e-15);
        assert!((m.recall - 0.75).abs() < 1e-15);
        assert_eq!(m.csv_line(), "0.9000,0.7500,0.8182");
    }

    #[test]
    fn empty_denominators_are_zero() {
        let m = confusion(&mask(&[0, 0]), &mask(&[0, 0])).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(f1_of(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(confusion(&mask(&[0, 1]), &mask(&[0, 1, 1])).is_err());
        let tall = BinaryImage::zeros(2, 1);
        assert!(confusion(&tall, &mask(&[0, 1])).is_err());
    }

    #[test]
    fn f1_of_reference_rows() {
        assert!((f1_of(0.914, 0.87).unwrap() - 0.891).abs() <= 0.001);
        assert!((f1_of(0.64, 0.69).unwrap() - 0.664).abs() <= 0.001);
        assert!(f1_of(1.2, 0.5).is_err());
        assert!(f1_of(0.5, -0.1).is_err());
        assert!(f1_of(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn merge_pools_counts() {
        let a = SegMetrics::from_counts(1, 2, 3, 4);
        let b = SegMetrics::from_counts(5, 0, 1, 0);
        assert_eq!(a.merge(&b), SegMetrics::from_counts(6, 2, 4, 4));
    }

    #[test]
    fn csv_report_format() {
        let rows = [ReportRow {
            algorithm: "x".into(),
            precision: 0.5,
            recall: 0.25,
            f1: 1.0 / 3.0,
        }];
        assert_eq!(report_csv(&rows), "algorithm,precision,recall,f1\nx,0.5000,0.2500,0.3333\n");
    }

    proptest! {
        #[test]
        fn harmonic_mean_bounds(p in 0.0f64..=1.0, r in 0.0f64..=1.0) {
            let f = f1_of(p, r).unwrap();
            prop_assert!((f - f1_of(r, p).unwrap()).abs() < 1e-15);
            prop_assert!(f <= (p + r) / 2.0 + 1e-15);
            prop_assert!(f <= 2.0 * p.max(r) + 1e-15);
            prop_assert!(f >= p.min(r) - 1e-12);
            prop_assert!(f <= p.max(r) + 1e-12);
        }

        #[test]
        fn equal_inputs_fixed(v in 0.0f64..=1.0) {
            prop_assert!((f1_of(v, v).unwrap() - v).abs() < 1e-15);
        }
    }
}
