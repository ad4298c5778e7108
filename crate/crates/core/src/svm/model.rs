use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::platt::PlattScaler;
use crate::corpus::PrivacyLabel;
use crate::error::{Error, Result};

const MODEL_MAGIC: &str = "picpriv-svm v1";

/// Per-dimension standardization applied before the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits means and standard deviations; constant dimensions get unit scale.
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let first = x.first().ok_or_else(|| Error::arg("cannot standardize an empty set"))?;
        let dim = first.len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; dim];
        for xi in x {
            for (m, v) in mean.iter_mut().zip(xi) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for xi in x {
            for ((s, v), m) in var.iter_mut().zip(xi).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `a_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub calibrator: Option<PlattScaler>,
    pub scaler: Option<Standardizer>,
}

impl SvmModel {
    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// `sum_i coef_i K(sv_i, x) + bias`; positive means private.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::arg(format!("input has dimension {}, model expects {d}", x.len())));
            }
        }
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.apply(x);
                scaled.as_slice()
            }
            None => x,
        };
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<PrivacyLabel> {
        Ok(if self.decision_value(x)? > 0.0 {
            PrivacyLabel::Private
        } else {
            PrivacyLabel::Public
        })
    }

    /// Calibrated probability of the private class. Without a calibrator the raw
    /// decision value is passed through the logistic function.
    pub fn private_probability(&self, x: &[f64]) -> Result<f64> {
        let f = self.decision_value(x)?;
        Ok(match &self.calibrator {
            Some(p) => p.probability(f),
            None => PlattScaler { a: -1.0, b: 0.0 }.probability(f),
        })
    }

    /// Dual objective `sum |coef_i| - 1/2 sum coef_i coef_j K_ij` over the support vectors.
    pub fn dual_objective(&self) -> f64 {
        let linear: f64 = self.dual_coefs.iter().map(|a| a.abs()).sum();
        let mut quad = 0.0;
        for (si, ai) in self.support_vectors.iter().zip(&self.dual_coefs) {
            for (sj, aj) in self.support_vectors.iter().zip(&self.dual_coefs) {
                quad += ai * aj * self.kernel.eval(si, sj);
            }
        }
        linear - 0.5 * quad
    }

    /// Text dump with every real at 17 significant digits, so reading it back is exact.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "{MODEL_MAGIC}").unwrap();
        match self.kernel {
            KernelSpec::Rbf { gamma } => writeln!(s, "kernel rbf {gamma:.16e}").unwrap(),
            KernelSpec::Poly { degree } => writeln!(s, "kernel poly {degree}").unwrap(),
        }
        writeln!(s, "c {:.16e}", self.c).unwrap();
        writeln!(s, "bias {:.16e}", self.bias).unwrap();
        match &self.calibrator {
            Some(p) => writeln!(s, "calibrator {:.16e} {:.16e}", p.a, p.b).unwrap(),
            None => writeln!(s, "calibrator none").unwrap(),
        }
        match &self.scaler {
            Some(sc) => {
                writeln!(s, "scaler {}", sc.mean.len()).unwrap();
                writeln!(s, "{}", join(&sc.mean)).unwrap();
                writeln!(s, "{}", join(&sc.scale)).unwrap();
            }
            None => writeln!(s, "scaler none").unwrap(),
        }
        writeln!(s, "sv {} {}", self.support_vectors.len(), self.dim().unwrap_or(0)).unwrap();
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coefs) {
            writeln!(s, "{coef:.16e} {}", join(sv)).unwrap();
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Format(format!("missing {what} line")))
        };
        if next("header")?.trim() != MODEL_MAGIC {
            return Err(Error::Format("unrecognized header".into()));
        }
        let kernel_line = next("kernel")?;
        let kernel = match fields(&kernel_line, "kernel")?.as_slice() {
            ["rbf", g] => KernelSpec::Rbf { gamma: num(g)? },
            ["poly", d] => KernelSpec::Poly {
                degree: d.parse().map_err(|_| Error::Format(format!("bad degree {d:?}")))?,
            },
            other => return Err(Error::Format(format!("bad kernel line {other:?}"))),
        };
        let c = single(&next("c")?, "c")?;
        let bias = single(&next("bias")?, "bias")?;
        let cal_line = next("calibrator")?;
        let calibrator = match fields(&cal_line, "calibrator")?.as_slice() {
            ["none"] => None,
            [a, b] => Some(PlattScaler { a: num(a)?, b: num(b)? }),
            other => return Err(Error::Format(format!("bad calibrator line {other:?}"))),
        };
        let sc_line = next("scaler")?;
        let scaler = match fields(&sc_line, "scaler")?.as_slice() {
            ["none"] => None,
            [_] => {
                let mean = nums(&next("scaler mean")?)?;
                let scale = nums(&next("scaler scale")?)?;
                Some(Standardizer { mean, scale })
            }
            other => return Err(Error::Format(format!("bad scaler line {other:?}"))),
        };
        let sv_line = next("sv")?;
        let (count, dim) = match fields(&sv_line, "sv")?.as_slice() {
            [n, d] => (
                n.parse::<usize>().map_err(|_| Error::Format("bad sv count".into()))?,
                d.parse::<usize>().map_err(|_| Error::Format("bad sv dim".into()))?,
            ),
            other => return Err(Error::Format(format!("bad sv line {other:?}"))),
        };
        let mut support_vectors = Vec::with_capacity(count);
        let mut dual_coefs = Vec::with_capacity(count);
        for i in 0..count {
            let row = nums(&next("support vector")?)?;
            if row.len() != dim + 1 {
                return Err(Error::Format(format!(
                    "support vector {i} has {} values, expected {}",
                    row.len(),
                    dim + 1
                )));
            }
            dual_coefs.push(row[0]);
            support_vectors.push(row[1..].to_vec());
        }
        Ok(SvmModel {
            support_vectors,
            dual_coefs,
            bias,
            kernel,
            c,
            calibrator,
            scaler,
        })
    }
}

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:.16e}").unwrap();
    }
    s
}

fn fields<'a>(line: &'a str, key: &str) -> Result<Vec<&'a str>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(Error::Format(format!("expected {key:?} line, got {line:?}")));
    }
    Ok(it.collect())
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("bad number {s:?}")))
}

fn nums(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace().map(num).collect()
}

fn single(line: &str, key: &str) -> Result<f64> {
    match fields(line, key)?.as_slice() {
        [v] => num(v),
        other => Err(Error::Format(format!("bad {key} line {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SvmModel {
        SvmModel {
            support_vectors: vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-7, 7.0]],
            dual_coefs: vec![0.3, -0.3],
            bias: std::f64::consts::PI,
            kernel: KernelSpec::Rbf { gamma: 0.1 },
            c: 1.0,
            calibrator: Some(PlattScaler { a: -1.7, b: 0.01 }),
            scaler: Some(Standardizer {
                mean: vec![0.5, 0.25],
                scale: vec![2.0, 1.0 / 7.0],
            }),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        for m in [
            sample(),
            SvmModel {
                calibrator: None,
                scaler: None,
                kernel: KernelSpec::Poly { degree: 3 },
                ..sample()
            },
        ] {
            let mut buf = Vec::new();
            m.write_text(&mut buf).unwrap();
            assert_eq!(SvmModel::read_text(buf.as_slice()).unwrap(), m);
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut buf = Vec::new();
        sample().write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(SvmModel::read_text(cut.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(sample().decision_value(&[1.0]).is_err());
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 3.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(s.apply(&[3.0, 3.0]), vec![1.0, 0.0]);
    }
}
