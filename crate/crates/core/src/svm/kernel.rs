use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RBF `exp(-gamma * |x - y|^2)` or inhomogeneous polynomial `(x . y + 1)^degree`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Rbf { gamma: f64 },
    Poly { degree: u32 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let k = KernelSpec::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn poly(degree: u32) -> Result<Self> {
        let k = KernelSpec::Poly { degree };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::arg(format!("RBF gamma must be positive, got {gamma}")))
            }
            KernelSpec::Poly { degree: 0 } => Err(Error::arg("polynomial degree must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Poly { degree } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + 1.0).powi(degree as i32)
            }
        }
    }

    pub(crate) fn rank(&self) -> (u8, f64) {
        match *self {
            KernelSpec::Rbf { gamma } => (0, gamma),
            KernelSpec::Poly { degree } => (1, degree as f64),
        }
    }
}

/// `R,gamma` or `P,degree`, the hyper-parameter notation used in result tables.
impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Rbf { gamma } => write!(f, "R,{gamma}"),
            KernelSpec::Poly { degree } => write!(f, "P,{degree}"),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "kernel inputs differ in dimension: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.eval(x, y))
}
