//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use picpriv::eval::ConfusionMatrix;
use picpriv::svm::KernelSpec;
use picpriv::PrivacyLabel;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn kernel(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
            (-gamma * d2).exp()
        }
        KernelSpec::Poly { degree } => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (1.0 + dot).powi(degree as i32)
        }
    }
}

pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// sum(alpha) - 1/2 alpha' Q alpha
    pub objective: f64,
}

impl DualSolution {
    pub fn decision(&self, x: &[Vec<f64>], y: &[f64], spec: &KernelSpec, p: &[f64]) -> f64 {
        self.alpha
            .iter()
            .zip(x)
            .zip(y)
            .map(|((a, xi), yi)| a * yi * kernel(spec, xi, p))
            .sum::<f64>()
            + self.bias
    }
}

fn dual_value(q: &[Vec<f64>], a: &[f64]) -> f64 {
    let quad: f64 = (0..a.len())
        .map(|i| a[i] * (0..a.len()).map(|j| q[i][j] * a[j]).sum::<f64>())
        .sum();
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto {0 <= a <= c, y'a = 0}, by bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * bound {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

/// Solves the soft-margin dual with accelerated projected gradient (FISTA with restarts).
pub fn dual_oracle(x: &[Vec<f64>], y: &[f64], c: f64, spec: &KernelSpec) -> DualSolution {
    let n = x.len();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * kernel(spec, &x[i], &x[j])).collect())
        .collect();
    // Largest eigenvalue by power iteration, padded to stay an upper bound.
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm / v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v = w.iter().map(|t| t / norm).collect();
    }
    let step = 1.0 / (lambda * 1.05 + 1e-12);
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).collect() };

    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut f = dual_value(&q, &a);
    let mut stale = 0;
    for _ in 0..400_000 {
        let g = grad(&z);
        let next = project(&z.iter().zip(&g).map(|(zi, gi)| zi + step * gi).collect::<Vec<_>>(), y, c);
        let fn_ = dual_value(&q, &next);
        if fn_ < f {
            // restart momentum from the best point
            z = a.clone();
            t = 1.0;
            stale += 1;
            if stale > 50 {
                break;
            }
            continue;
        }
        let improvement = fn_ - f;
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(n1, a0)| n1 + (t - 1.0) / tn * (n1 - a0)).collect();
        a = next;
        t = tn;
        f = fn_;
        if improvement <= 1e-15 * f.abs().max(1.0) {
            stale += 1;
            if stale > 50 {
                break;
            }
        } else {
            stale = 0;
        }
    }

    // bias from the KKT conditions
    let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).collect();
    let eps = 1e-6 * c;
    let mut free = Vec::new();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        // y_i f(x_i) = g_i + y_i b ; on free vectors this is 1
        let b_i = y[i] * (1.0 - g[i]);
        if a[i] > eps && a[i] < c - eps {
            free.push(b_i);
        } else if (a[i] <= eps) == (y[i] > 0.0) {
            lo = lo.max(b_i);
        } else {
            hi = hi.min(b_i);
        }
    }
    let bias = if !free.is_empty() {
        free.iter().sum::<f64>() / free.len() as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    };
    DualSolution {
        alpha: a,
        bias,
        objective: f,
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<PrivacyLabel>, f64, KernelSpec) {
    let n = rng.gen_range(4..=40);
    let d = rng.gen_range(2..=8);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut y: Vec<PrivacyLabel> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.4) {
                PrivacyLabel::Private
            } else {
                PrivacyLabel::Public
            }
        })
        .collect();
    y[0] = PrivacyLabel::Private;
    y[1] = PrivacyLabel::Public;
    let c = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
    let spec = if rng.gen_bool(0.5) {
        KernelSpec::Rbf {
            gamma: rng.gen_range(0.1..2.0),
        }
    } else {
        KernelSpec::Poly {
            degree: rng.gen_range(1..=3),
        }
    };
    (x, y, c, spec)
}

pub fn signs(y: &[PrivacyLabel]) -> Vec<f64> {
    y.iter().map(|l| if l.is_private() { 1.0 } else { -1.0 }).collect()
}

pub fn entropy2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Information gain as the mutual information between tag presence and label.
pub fn ig_oracle(n11: u64, n10: u64, n01: u64, n00: u64) -> f64 {
    let n = (n11 + n10 + n01 + n00) as f64;
    let cells = [
        (n11, n11 + n10, n11 + n01),
        (n10, n11 + n10, n10 + n00),
        (n01, n01 + n00, n11 + n01),
        (n00, n01 + n00, n10 + n00),
    ];
    cells
        .iter()
        .filter(|(joint, _, _)| *joint > 0)
        .map(|&(joint, tag, label)| {
            let pj = joint as f64 / n;
            pj * (pj / ((tag as f64 / n) * (label as f64 / n))).log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteMetrics {
    pub accuracy: f64,
    pub p_prec: f64,
    pub p_rec: f64,
    pub p_f1: f64,
    pub u_prec: f64,
    pub u_rec: f64,
    pub u_f1: f64,
    pub w_prec: f64,
    pub w_rec: f64,
    pub w_f1: f64,
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Per-class metrics straight from the prediction/label pairs.
pub fn brute_metrics(pred: &[bool], truth: &[bool]) -> BruteMetrics {
    let n = truth.len() as f64;
    let count = |p: bool, t: bool| pred.iter().zip(truth).filter(|(a, b)| **a == p && **b == t).count() as f64;
    let class = |c: bool| {
        let tp = count(c, c);
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let actual = truth.iter().filter(|&&t| t == c).count() as f64;
        let prec = safe_div(tp, predicted);
        let rec = safe_div(tp, actual);
        let f1 = safe_div(2.0 * prec * rec, prec + rec);
        (prec, rec, f1, actual)
    };
    let (pp, pr, pf, ps) = class(true);
    let (up, ur, uf, us) = class(false);
    BruteMetrics {
        accuracy: (count(true, true) + count(false, false)) / n,
        p_prec: pp,
        p_rec: pr,
        p_f1: pf,
        u_prec: up,
        u_rec: ur,
        u_f1: uf,
        w_prec: (ps * pp + us * up) / n,
        w_rec: (ps * pr + us * ur) / n,
        w_f1: (ps * pf + us * uf) / n,
    }
}

pub fn brute_confusion(scores: &[f64], truth: &[bool], t: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for (&s, &y) in scores.iter().zip(truth) {
        match (s >= t, y) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    cm
}

/// Every threshold a sweep must visit: the scores themselves and 0, 0.5, 1.
pub fn brute_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = scores.iter().copied().chain([0.0, 0.5, 1.0]).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

use picpriv::tag_cnn::{loss_and_grads, Example, TagCnnModel};

/// Pooled features by direct convolution over the end-padded sequence, skipping windows
/// that start in the padding.
pub fn naive_pooled(m: &TagCnnModel, tokens: &[usize]) -> Vec<f64> {
    let d = m.embeddings.dim;
    let mut seq: Vec<usize> = tokens.iter().copied().take(m.max_len).collect();
    let len = seq.len();
    seq.resize(m.max_len, 0);
    let mut out = Vec::new();
    for bank in &m.banks {
        let w = bank.width;
        for f in 0..bank.biases.len() {
            let mut best = f64::NEG_INFINITY;
            for start in 0..=(m.max_len - w) {
                if start >= len {
                    continue;
                }
                let mut v = bank.biases[f];
                for o in 0..w {
                    for k in 0..d {
                        v += bank.weights[f * w * d + o * d + k] * m.embeddings.vectors[seq[start + o] * d + k];
                    }
                }
                best = best.max(v);
            }
            out.push(if best > 0.0 { best } else { 0.0 });
        }
    }
    out
}

/// Largest relative error between analytic and central-difference gradients, with the
/// relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check(model: &mut TagCnnModel, batch: &[Example], h: f64, floor: f64) -> f64 {
    let (_, grads) = loss_and_grads(model, batch, None).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for (g, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let orig = model.parameters_mut()[g][i];
            model.parameters_mut()[g][i] = orig + h;
            let up = loss_and_grads(model, batch, None).unwrap().0;
            model.parameters_mut()[g][i] = orig - h;
            let down = loss_and_grads(model, batch, None).unwrap().0;
            model.parameters_mut()[g][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(a, numeric, floor));
        }
    }
    worst
}
