use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const SHIFT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualVocab {
    pub centroids: Vec<Vec<f64>>,
}

impl VisualVocab {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the closest centroid; ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(x, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    pub vocab: VisualVocab,
    /// Sum of squared distances after each assignment step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        let c = points[pick.expect("a point away from all centroids exists")].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations. An emptied cluster is moved onto the
/// point currently farthest from its centroid.
pub fn kmeans_fit(descriptors: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::arg("k must be positive"));
    }
    let dim = descriptors.first().map_or(0, Vec::len);
    if descriptors.iter().any(|d| d.len() != dim || d.iter().any(|v| !v.is_finite())) {
        return Err(Error::arg("descriptors must be finite and share one dimension"));
    }
    let distinct: HashSet<Vec<u64>> = descriptors
        .iter()
        .map(|d| d.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(Error::arg(format!(
            "{} distinct descriptors, need at least k = {k}",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(descriptors, k, &mut rng);
    let mut inertia = Vec::new();
    let mut iterations = 0;
    loop {
        let vocab = VisualVocab { centroids };
        let assign: Vec<(usize, f64)> = descriptors
            .par_iter()
            .map(|p| {
                let c = vocab.nearest(p);
                (c, sq_dist(p, &vocab.centroids[c]))
            })
            .collect();
        centroids = vocab.centroids;
        inertia.push(assign.iter().map(|a| a.1).sum());
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in descriptors.iter().zip(&assign) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut taken = vec![false; descriptors.len()];
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                let far = (0..descriptors.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| assign[a].1.total_cmp(&assign[b].1).then(b.cmp(&a)))
                    .expect("k <= number of points");
                taken[far] = true;
                descriptors[far].clone()
            };
            shift = shift.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        if shift < SHIFT_TOLERANCE {
            let vocab = VisualVocab {
                centroids: centroids.clone(),
            };
            let last: f64 = descriptors
                .iter()
                .map(|p| sq_dist(p, &vocab.centroids[vocab.nearest(p)]))
                .sum();
            inertia.push(last);
            break;
        }
    }
    Ok(KMeansFit {
        vocab: VisualVocab { centroids },
        inertia,
        iterations,
    })
}

/// L1-normalized nearest-centroid histogram; all zeros for an image without descriptors.
pub fn bovw_encode(descriptors: &[Vec<f64>], vocab: &VisualVocab) -> Result<Vec<f64>> {
    let mut hist = vec![0.0; vocab.centroids.len()];
    for d in descriptors {
        if d.len() != vocab.dim() {
            return Err(Error::arg(format!(
                "descriptor has {} dims, vocabulary has {}",
                d.len(),
                vocab.dim()
            )));
        }
        hist[vocab.nearest(d)] += 1.0;
    }
    if !descriptors.is_empty() {
        let n = descriptors.len() as f64;
        hist.iter_mut().for_each(|h| *h /= n);
    }
    Ok(hist)
}
