use serde::{Deserialize, Serialize};

use super::metrics::{metrics, ConfusionMatrix};
use crate::corpus::PrivacyLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    /// Private-class precision, recall and F1.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    /// Ordered by strictly increasing threshold.
    pub points: Vec<CurvePoint>,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn point(threshold: f64, cm: ConfusionMatrix) -> CurvePoint {
    let m = metrics(&cm);
    CurvePoint {
        threshold,
        precision: m.private.precision,
        recall: m.private.recall,
        f1: m.private.f1,
        fpr: rate(cm.fp, cm.fp + cm.tn),
        fnr: rate(cm.fn_, cm.fn_ + cm.tp),
        confusion: cm,
    }
}

/// Sweeps private-probability thresholds over every distinct score plus 0, 0.5 and 1.
///
/// An item is predicted private when its score is at least the threshold, so the 0.5 row
/// is the default operating point.
pub fn score_curves(scores: &[f64], labels: &[PrivacyLabel]) -> Result<Curve> {
    if scores.len() != labels.len() {
        return Err(Error::arg(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::arg(format!("score {s} outside [0, 1]")));
    }
    let mut pairs: Vec<(f64, bool)> = scores.iter().zip(labels).map(|(&s, l)| (s, l.is_private())).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut thresholds: Vec<f64> = pairs.iter().map(|p| p.0).chain([0.0, 0.5, 1.0]).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    let (mut pos_below, mut neg_below, mut cursor) = (0, 0, 0);
    let points = thresholds
        .into_iter()
        .map(|t| {
            while cursor < pairs.len() && pairs[cursor].0 < t {
                if pairs[cursor].1 {
                    pos_below += 1;
                } else {
                    neg_below += 1;
                }
                cursor += 1;
            }
            let cm = ConfusionMatrix {
                tp: pos - pos_below,
                fn_: pos_below,
                fp: neg - neg_below,
                tn: neg_below,
            };
            point(t, cm)
        })
        .collect();
    Ok(Curve { points })
}

impl Curve {
    pub fn at(&self, threshold: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.threshold == threshold)
    }
}

/// Point where private precision and recall are closest; ties go to the lower threshold.
/// Returns (threshold, mean of precision and recall there).
pub fn breakeven(curve: &Curve) -> Result<(f64, f64)> {
    let mut best: Option<&CurvePoint> = None;
    for p in &curve.points {
        let gap = (p.precision - p.recall).abs();
        if best.is_none_or(|b| gap < (b.precision - b.recall).abs()) {
            best = Some(p);
        }
    }
    let best = best.ok_or_else(|| Error::arg("empty curve"))?;
    Ok((best.threshold, (best.precision + best.recall) / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use PrivacyLabel::{Private as P, Public as U};

    #[test]
    fn separated_scores_reach_perfect_point() {
        let curve = score_curves(&[0.9, 0.8, 0.2, 0.1], &[P, P, U, U]).unwrap();
        assert!(curve.points.iter().any(|p| p.precision == 1.0 && p.recall == 1.0));
        assert_eq!(breakeven(&curve).unwrap().1, 1.0);
    }

    #[test]
    fn binary_scores() {
        let curve = score_curves(&[1.0, 0.0, 1.0, 0.0], &[P, U, P, U]).unwrap();
        let ts: Vec<f64> = curve.points.iter().map(|p| p.threshold).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0]);
        assert_eq!(curve.points[0].recall, 1.0);
        assert_eq!(curve.points[0].precision, 0.5);
        assert_eq!((curve.points[1].precision, curve.points[1].recall), (1.0, 1.0));
    }

    #[test]
    fn crafted_crossing() {
        // thresholds 0.5 and 0.6 both give tp=3, fp=1, fn=1 -> P = R = 0.75
        let scores = [0.9, 0.8, 0.7, 0.6, 0.3, 0.2, 0.1, 0.05];
        let labels = [P, P, U, P, P, U, U, U];
        let curve = score_curves(&scores, &labels).unwrap();
        assert_eq!(breakeven(&curve).unwrap(), (0.5, 0.75));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(score_curves(&[1.5], &[P]).is_err());
        assert!(breakeven(&Curve { points: vec![] }).is_err());
    }
}
