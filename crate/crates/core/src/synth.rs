//! Seeded synthetic corpora with a known labeling rule, for tests and demos.
//!
//! An image is private iff its first two `fc-R` features both exceed 0.5; samples keep a
//! gap of `margin` from that boundary and the remaining dimensions are uniform noise.
//! The user tag `secret` marks private images, except for a `tag_noise` fraction of
//! images whose marker is flipped. Every image also carries distractor tags and a
//! softmax-like `prob` block.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ImageRecord, PrivacyLabel, ProbBlock};
use crate::error::{Error, Result};

pub const FEATURE_BLOCK: &str = "fc-R";
pub const MARKER_TAG: &str = "secret";

const DISTRACTORS: &[&str] = &[
    "sky",
    "tree",
    "beach",
    "sunset",
    "city",
    "street",
    "night",
    "flower",
    "water",
    "mountain",
    "snow",
    "lake",
    "bridge",
    "car",
    "dog",
    "cat",
    "bird",
    "garden",
    "park",
    "river",
    "cloud",
    "architecture",
    "travel",
    "summer",
    "winter",
    "autumn",
    "spring",
    "light",
    "color",
    "blue",
    "green",
    "red",
    "art",
    "music",
    "food",
    "party",
    "friends",
    "family",
    "portrait",
    "museum",
    "rain",
    "forest",
    "desert",
    "island",
    "harbor",
    "boat",
    "train",
    "airport",
    "road",
    "tower",
    "castle",
    "church",
    "market",
    "cafe",
    "concert",
    "festival",
    "stadium",
    "horse",
    "sheep",
    "cow",
    "butterfly",
    "insect",
    "leaf",
    "rock",
    "sand",
    "wave",
    "moon",
    "star",
    "fog",
    "ice",
];

const CATEGORIES: &[&str] = &[
    "seashore",
    "alp",
    "lakeside",
    "valley",
    "church",
    "library",
    "restaurant",
    "stage",
    "maillot",
    "bikini",
    "suit",
    "jersey",
    "tabby",
    "golden retriever",
    "sports car",
    "neck brace",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_private: usize,
    pub n_public: usize,
    pub dim: usize,
    pub margin: f64,
    pub tag_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_private: 1000,
            n_public: 3000,
            dim: 8,
            margin: 0.02,
            tag_noise: 0.02,
            seed: 7,
        }
    }
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// The labeling rule the generator plants.
pub fn planted_label(features: &[f64]) -> PrivacyLabel {
    if features[0] > 0.5 && features[1] > 0.5 {
        PrivacyLabel::Private
    } else {
        PrivacyLabel::Public
    }
}

fn sample_features(rng: &mut ChaCha8Rng, label: PrivacyLabel, cfg: &SynthConfig) -> Vec<f64> {
    let lo = 0.5 - cfg.margin;
    let hi = 0.5 + cfg.margin;
    loop {
        let x: Vec<f64> = (0..cfg.dim).map(|_| round_to(rng.gen::<f64>(), 4)).collect();
        let ok = match label {
            PrivacyLabel::Private => x[0] >= hi && x[1] >= hi,
            PrivacyLabel::Public => x[0] <= lo || x[1] <= lo,
        };
        if ok {
            return x;
        }
    }
}

fn sample_prob(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = CATEGORIES.iter().map(|_| rng.gen::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| round_to(v / total, 6)).collect();
    // push the rounding residue onto the largest entry
    let residue = 1.0 - p.iter().sum::<f64>();
    let top = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    p[top] = round_to(p[top] + residue, 6);
    p
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<ImageRecord>> {
    if cfg.dim < 2 || !(0.0..0.5).contains(&cfg.margin) || !(0.0..=1.0).contains(&cfg.tag_noise) {
        return Err(Error::arg(
            "synthetic corpus needs dim >= 2, margin in [0, 0.5) and tag noise in [0, 1]",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut labels = vec![PrivacyLabel::Private; cfg.n_private];
    labels.extend(std::iter::repeat_n(PrivacyLabel::Public, cfg.n_public));
    labels.shuffle(&mut rng);
    let mut records = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        let x = sample_features(&mut rng, label, cfg);
        let n_tags = rng.gen_range(2..=6);
        let mut tags: Vec<String> = DISTRACTORS.choose_multiple(&mut rng, n_tags).map(|s| s.to_string()).collect();
        let flip = rng.gen::<f64>() < cfg.tag_noise;
        if label.is_private() != flip {
            let at = rng.gen_range(0..=tags.len());
            tags.insert(at, MARKER_TAG.to_string());
        }
        let prob = ProbBlock {
            names: CATEGORIES.iter().map(|s| s.to_string()).collect(),
            values: sample_prob(&mut rng),
        };
        records.push(ImageRecord {
            id: format!("syn-{i:05}"),
            label,
            user_tags: tags,
            features: [(FEATURE_BLOCK.to_string(), x)].into_iter().collect(),
            prob: Some(prob),
        });
    }
    Ok(records)
}
