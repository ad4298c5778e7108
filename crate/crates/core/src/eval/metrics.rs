use serde::{Deserialize, Serialize};

use crate::corpus::PrivacyLabel;
use crate::error::{Error, Result};

/// Binary confusion counts with private as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, predicted: PrivacyLabel, actual: PrivacyLabel) {
        match (predicted, actual) {
            (PrivacyLabel::Private, PrivacyLabel::Private) => self.tp += 1,
            (PrivacyLabel::Private, PrivacyLabel::Public) => self.fp += 1,
            (PrivacyLabel::Public, PrivacyLabel::Public) => self.tn += 1,
            (PrivacyLabel::Public, PrivacyLabel::Private) => self.fn_ += 1,
        }
    }
}

pub fn confusion(predictions: &[PrivacyLabel], labels: &[PrivacyLabel]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::arg("cannot evaluate an empty prediction set"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        cm.add(p, l);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of items truly in the class (fractional after averaging).
    pub support: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Support-weighted average of the two classes.
    pub overall: ClassMetrics,
    pub private: ClassMetrics,
    pub public: ClassMetrics,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

fn ratio(num: usize, den: usize, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize, flag: &mut bool) -> ClassMetrics {
    let precision = ratio(tp, tp + fp, flag);
    let recall = ratio(tp, tp + fn_, flag);
    ClassMetrics {
        precision,
        recall,
        f1: harmonic(precision, recall),
        support: (tp + fn_) as f64,
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let mut zero_division = false;
    let private = class_metrics(cm.tp, cm.fp, cm.fn_, &mut zero_division);
    // public is the positive class of the mirrored matrix
    let public = class_metrics(cm.tn, cm.fn_, cm.fp, &mut zero_division);
    let n = cm.total() as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if n == 0.0 {
            0.0
        } else {
            (private.support * f(&private) + public.support * f(&public)) / n
        }
    };
    MetricsReport {
        accuracy: if n == 0.0 { 0.0 } else { (cm.tp + cm.tn) as f64 / n },
        overall: ClassMetrics {
            precision: weighted(|c| c.precision),
            recall: weighted(|c| c.recall),
            f1: weighted(|c| c.f1),
            support: n,
        },
        private,
        public,
        zero_division,
    }
}

/// Hard predictions from private-class scores: private iff `score >= threshold`.
pub fn threshold_predictions(scores: &[f64], threshold: f64) -> Vec<PrivacyLabel> {
    scores
        .iter()
        .map(|&s| {
            if s >= threshold {
                PrivacyLabel::Private
            } else {
                PrivacyLabel::Public
            }
        })
        .collect()
}

pub fn weighted_f1(predictions: &[PrivacyLabel], labels: &[PrivacyLabel]) -> Result<f64> {
    Ok(metrics(&confusion(predictions, labels)?).overall.f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use PrivacyLabel::{Private as P, Public as U};

    #[test]
    fn hand_counted_confusion() {
        let cm = confusion(&[P, U, U, U], &[P, P, U, U]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 0,
                tn: 2,
                fn_: 1
            }
        );
        let inv = confusion(&[U, P, P, P], &[P, P, U, U]).unwrap();
        assert_eq!((inv.tp, inv.fn_, inv.tn, inv.fp), (cm.fn_, cm.tp, cm.fp, cm.tn));
        assert!(confusion(&[P], &[P, U]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn hand_computed_metrics() {
        let m = metrics(&ConfusionMatrix {
            tp: 1,
            fp: 0,
            tn: 2,
            fn_: 1,
        });
        assert_eq!(m.private.precision, 1.0);
        assert_eq!(m.private.recall, 0.5);
        assert!((m.private.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.public.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.public.recall, 1.0);
        assert!((m.public.f1 - 0.8).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.75);
        assert!(!m.zero_division);
    }

    #[test]
    fn perfect_and_naive() {
        let m = metrics(&ConfusionMatrix {
            tp: 5,
            fp: 0,
            tn: 7,
            fn_: 0,
        });
        for v in [m.accuracy, m.overall.f1, m.private.f1, m.public.f1, m.overall.precision] {
            assert_eq!(v, 1.0);
        }
        let naive = metrics(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 750,
            fn_: 250,
        });
        assert_eq!(naive.accuracy, 0.75);
        assert_eq!(naive.private.recall, 0.0);
        assert!(naive.zero_division);
    }
}
