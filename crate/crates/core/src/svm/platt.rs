use serde::{Deserialize, Serialize};

use crate::corpus::PrivacyLabel;
use crate::error::{Error, Result};

/// Sigmoid map `P(private | f) = 1 / (1 + exp(a f + b))` over decision values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaler {
    pub a: f64,
    pub b: f64,
}

impl PlattScaler {
    pub fn probability(&self, decision_value: f64) -> f64 {
        let z = self.a * decision_value + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Fits the sigmoid by Newton's method with backtracking on the log-loss against
/// Platt's smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn platt_fit(decision_values: &[f64], labels: &[PrivacyLabel]) -> Result<PlattScaler> {
    if decision_values.len() != labels.len() {
        return Err(Error::arg(format!(
            "{} decision values for {} labels",
            decision_values.len(),
            labels.len()
        )));
    }
    let prior1 = labels.iter().filter(|l| l.is_private()).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    if prior1 == 0.0 || prior0 == 0.0 {
        return Err(Error::SingleClass);
    }

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|l| if l.is_private() { hi } else { lo }).collect();
    let f = decision_values;

    let loss = |a: f64, b: f64| -> f64 {
        f.iter()
            .zip(&t)
            .map(|(&fi, &ti)| {
                let z = fi * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = loss(a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&fi, &ti) in f.iter().zip(&t) {
            let z = fi * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += fi * fi * d2;
            h22 += d2;
            h21 += fi * d2;
            let d1 = ti - p;
            g1 += fi * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nval = loss(na, nb);
            if nval < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nval;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    Ok(PlattScaler { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PrivacyLabel::{Private as P, Public as U};

    #[test]
    fn antisymmetric_values_center_at_half() {
        let values = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let labels = [U, U, P, U, P, P];
        let s = platt_fit(&values, &labels).unwrap();
        assert!((s.probability(0.0) - 0.5).abs() < 1e-6, "{s:?}");
        assert!(s.a < 0.0);
    }

    #[test]
    fn constant_values_give_prior() {
        let values = [0.3; 8];
        let labels = [P, U, U, U, P, U, U, U];
        let s = platt_fit(&values, &labels).unwrap();
        // the log-loss minimizer is the mean smoothed target
        let mean_target = (2.0 * (3.0 / 4.0) + 6.0 * (1.0 / 8.0)) / 8.0;
        assert!((s.probability(0.3) - mean_target).abs() < 1e-4, "{}", s.probability(0.3));
    }

    #[test]
    fn monotone_and_bounded() {
        let values: Vec<f64> = (0..20).map(|i| i as f64 / 4.0 - 2.5).collect();
        let labels: Vec<_> = (0..20).map(|i| if i % 3 == 0 || i > 14 { P } else { U }).collect();
        let s = platt_fit(&values, &labels).unwrap();
        let probs: Vec<f64> = values.iter().map(|&v| s.probability(v)).collect();
        assert!(probs.windows(2).all(|w| w[0] < w[1]));
        assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(platt_fit(&[1.0, 2.0], &[P, P]), Err(Error::SingleClass)));
    }
}
