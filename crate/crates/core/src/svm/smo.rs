//! C-SVC dual solved by sequential minimal optimization.
//!
//! The solver minimizes `f(a) = 1/2 a'Qa - e'a` with `Q_ij = y_i y_j K(x_i, x_j)` subject
//! to `0 <= a_i <= C` and `y'a = 0`. Each iteration picks the maximal violating pair
//! `(i, j)` from the up/low index sets and solves the two-variable subproblem exactly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::model::SvmModel;
use crate::corpus::PrivacyLabel;
use crate::error::{Error, Result};

/// Kernel rows kept in memory, bounded to roughly this many bytes.
const CACHE_BYTES: usize = 256 << 20;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub kernel: KernelSpec,
    /// Stop once the maximal KKT violation `m(a) - M(a)` falls below this.
    pub tol: f64,
    /// Stop after this many consecutive `n`-iteration sweeps without progress.
    pub max_passes: usize,
}

impl SmoParams {
    pub fn new(c: f64, kernel: KernelSpec) -> Self {
        SmoParams {
            c,
            kernel,
            tol: 1e-3,
            max_passes: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::arg(format!("C must be positive, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::arg(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_passes == 0 {
            return Err(Error::arg("max_passes must be at least 1"));
        }
        self.kernel.validate()
    }
}

/// Diagnostics of one solver run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Dual objective `sum(a) - 1/2 a'Qa` (to be maximized).
    pub objective: f64,
    /// Final maximal KKT violation.
    pub gap: f64,
    pub converged: bool,
}

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    kernel: KernelSpec,
    rows: Vec<Option<Box<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], kernel: KernelSpec) -> Self {
        let n = x.len().max(1);
        let capacity = (CACHE_BYTES / (8 * n)).clamp(2, n.max(2));
        KernelRows {
            x,
            kernel,
            rows: vec![None; x.len()],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn ensure(&mut self, i: usize) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let xi = &self.x[i];
        let row: Box<[f64]> = self.x.iter().map(|xt| self.kernel.eval(xi, xt)).collect();
        self.rows[i] = Some(row);
        self.order.push_back(i);
    }

    /// Rows `i` and `j`, both resident.
    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i);
        self.ensure(j);
        if self.rows[i].is_none() {
            self.ensure(i);
        }
        (self.rows[i].as_deref().unwrap(), self.rows[j].as_deref().unwrap())
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[PrivacyLabel]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::arg(format!("{} points but {} labels", x.len(), y.len())));
    }
    if !(y.iter().any(|l| l.is_private()) && y.iter().any(|l| !l.is_private())) {
        return Err(Error::SingleClass);
    }
    let dim = x[0].len();
    for (i, xi) in x.iter().enumerate() {
        if xi.len() != dim {
            return Err(Error::arg(format!("point {i} has dimension {}, expected {dim}", xi.len())));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("point {i} has a non-finite feature")));
        }
    }
    Ok(dim)
}

/// Solves the dual and returns the multipliers `a`, the bias and diagnostics.
pub fn solve_dual(x: &[Vec<f64>], y: &[PrivacyLabel], params: &SmoParams) -> Result<(Vec<f64>, f64, SolveInfo)> {
    params.validate()?;
    check_inputs(x, y)?;
    let n = x.len();
    let c = params.c;
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let diag: Vec<f64> = x.iter().map(|xi| params.kernel.eval(xi, xi)).collect();
    let mut rows = KernelRows::new(x, params.kernel);

    let mut alpha = vec![0.0; n];
    // gradient of f: Q a - e
    let mut grad = vec![-1.0; n];
    let mut objective = 0.0; // f(a), minimized

    let max_iter = (100 * n).max(10_000_000);
    let sweep = n.max(1);
    let mut stalled = 0usize;
    let mut sweep_start_obj = objective;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;

    let up = |t: usize, a: &[f64]| (ys[t] > 0.0 && a[t] < c) || (ys[t] < 0.0 && a[t] > 0.0);
    let low = |t: usize, a: &[f64]| (ys[t] < 0.0 && a[t] < c) || (ys[t] > 0.0 && a[t] > 0.0);

    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut big_m = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut small_m = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if up(t, &alpha) && v > big_m {
                big_m = v;
                i = t;
            }
            if low(t, &alpha) && v < small_m {
                small_m = v;
                j = t;
            }
        }
        gap = big_m - small_m;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            break;
        }

        let (ki, kj) = rows.pair(i, j);
        let eta = (diag[i] + diag[j] - 2.0 * ki[j]).max(TAU);
        // move a_i by +y_i*lambda and a_j by -y_j*lambda
        let mut lambda = gap / eta;
        let room_i = if ys[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let room_j = if ys[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        lambda = lambda.min(room_i).min(room_j);

        alpha[i] += ys[i] * lambda;
        alpha[j] -= ys[j] * lambda;
        // snap to the box so bound membership is exact
        for t in [i, j] {
            if alpha[t] < 1e-15 * c {
                alpha[t] = 0.0;
            } else if alpha[t] > c * (1.0 - 1e-15) {
                alpha[t] = c;
            }
        }
        for t in 0..n {
            grad[t] += ys[t] * lambda * (ki[t] - kj[t]);
        }
        objective += -lambda * gap + 0.5 * lambda * lambda * eta;
        iterations += 1;

        if iterations % sweep == 0 {
            if sweep_start_obj - objective <= 1e-12 * (1.0 + objective.abs()) {
                stalled += 1;
                if stalled >= params.max_passes {
                    break;
                }
            } else {
                stalled = 0;
            }
            sweep_start_obj = objective;
        }
    }

    let bias = -rho(&alpha, &grad, &ys, c);
    // recompute the objective exactly: f = 1/2 sum a_i (G_i - 1)
    let f: f64 = alpha.iter().zip(&grad).map(|(a, g)| 0.5 * a * (g - 1.0)).sum();
    Ok((
        alpha,
        bias,
        SolveInfo {
            iterations,
            objective: -f,
            gap,
            converged: gap < params.tol,
        },
    ))
}

/// Offset of the decision function, averaged over free multipliers.
fn rho(alpha: &[f64], grad: &[f64], ys: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Trains a two-class SVM; private is the positive class.
pub fn smo_train(x: &[Vec<f64>], y: &[PrivacyLabel], params: &SmoParams) -> Result<SvmModel> {
    Ok(smo_train_with_info(x, y, params)?.0)
}

pub fn smo_train_with_info(x: &[Vec<f64>], y: &[PrivacyLabel], params: &SmoParams) -> Result<(SvmModel, SolveInfo)> {
    let (alpha, bias, info) = solve_dual(x, y, params)?;
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (t, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coefs.push(a * y[t].sign());
        }
    }
    let model = SvmModel {
        support_vectors,
        dual_coefs,
        bias,
        kernel: params.kernel,
        c: params.c,
        calibrator: None,
        scaler: None,
    };
    Ok((model, info))
}
