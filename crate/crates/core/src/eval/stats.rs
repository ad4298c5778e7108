use serde::{Deserialize, Serialize};

use super::metrics::{ClassMetrics, MetricsReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage {
    pub mean: MetricsReport,
    pub per_seed: Vec<MetricsReport>,
}

/// Mean anchored at the first value, so identical inputs reproduce it exactly.
fn mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let first = values.clone().next().unwrap_or(0.0);
    let n = values.clone().count() as f64;
    first + values.map(|v| v - first).sum::<f64>() / n
}

fn mean_class(items: &[ClassMetrics]) -> ClassMetrics {
    ClassMetrics {
        precision: mean(items.iter().map(|c| c.precision)),
        recall: mean(items.iter().map(|c| c.recall)),
        f1: mean(items.iter().map(|c| c.f1)),
        support: mean(items.iter().map(|c| c.support)),
    }
}

/// Field-wise arithmetic mean; the individual reports are kept alongside.
pub fn average_over_seeds(reports: &[MetricsReport]) -> Result<SeedAverage> {
    if reports.is_empty() {
        return Err(Error::arg("no reports to average"));
    }
    let pick = |f: fn(&MetricsReport) -> ClassMetrics| reports.iter().map(f).collect::<Vec<_>>();
    let mean = MetricsReport {
        accuracy: mean(reports.iter().map(|r| r.accuracy)),
        overall: mean_class(&pick(|r| r.overall)),
        private: mean_class(&pick(|r| r.private)),
        public: mean_class(&pick(|r| r.public)),
        zero_division: reports.iter().any(|r| r.zero_division),
    };
    Ok(SeedAverage {
        mean,
        per_seed: reports.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub significant_at_05: bool,
    /// The differences have zero spread, so `t` is undefined.
    pub degenerate: bool,
}

/// Two-sided 0.05 critical values of Student's t for df = 1..=30.
const T_CRIT_05: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110,
    2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

/// Critical value for `df`; beyond the table the next lower tabulated df is used.
pub fn t_critical_05(df: usize) -> f64 {
    match df {
        0 => f64::INFINITY,
        1..=30 => T_CRIT_05[df - 1],
        31..=39 => 2.042,
        40..=59 => 2.021,
        60..=119 => 2.000,
        _ => 1.980,
    }
}

pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::arg("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;
    // rounding noise from a constant shift leaves sd at ulp scale
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        return Ok(TTestResult {
            t_statistic: 0.0,
            degrees_of_freedom: df,
            significant_at_05: false,
            degenerate: true,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        significant_at_05: t.abs() > t_critical_05(df),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_t() {
        let r = paired_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((r.t_statistic - 4.2426).abs() < 1e-3);
        assert_eq!(r.degrees_of_freedom, 4);
        assert!(r.significant_at_05);
        let swapped = paired_ttest(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(swapped.t_statistic, -r.t_statistic);
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let a = [0.81, 0.79, 0.85, 0.9, 0.77];
        let b: Vec<f64> = a.iter().map(|v| v + 0.01).collect();
        let r = paired_ttest(&a, &b).unwrap();
        assert!(r.degenerate && !r.significant_at_05);
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn averaging() {
        let mut a = MetricsReport::default();
        a.overall.f1 = 0.8;
        let mut b = a;
        b.overall.f1 = 0.9;
        let avg = average_over_seeds(&[a, b]).unwrap();
        assert!((avg.mean.overall.f1 - 0.85).abs() < 1e-12);
        assert_eq!(avg.per_seed.len(), 2);
        assert_eq!(average_over_seeds(&[a, a, a]).unwrap().mean, a);
        assert!(average_over_seeds(&[]).is_err());
    }
}
