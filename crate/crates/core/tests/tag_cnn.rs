mod common;

use common::{gradient_check, naive_pooled};
use picpriv::corpus::TaggedImage;
use picpriv::tag_cnn::{loss_and_grads, softmax, train, CnnConfig, EmbeddingMatrix, Example, TagCnnModel, TrainConfig};
use picpriv::tag_vectorize::TagVocabulary;
use picpriv::PrivacyLabel::{self, Private as P, Public as U};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vocab(n: usize) -> TagVocabulary {
    TagVocabulary::new((0..n).map(|i| format!("tag{i}")).collect()).unwrap()
}

fn model(seed: u64, dim: usize, filters: usize, widths: Vec<usize>, max_len: usize) -> TagCnnModel {
    let v = vocab(12);
    let config = CnnConfig {
        embed_dim: dim,
        widths,
        filters,
        max_len,
        dropout: 0.5,
        trainable_embeddings: true,
    };
    let mut m = TagCnnModel::new(v.clone(), EmbeddingMatrix::random(v.len(), dim, seed), &config, seed).unwrap();
    // non-zero biases so both ReLU branches occur
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for bank in &mut m.banks {
        bank.biases.iter_mut().for_each(|b| *b = rng.gen_range(-0.2..0.2));
    }
    m.dense_bias = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    m
}

fn random_batch(rng: &mut ChaCha8Rng, size: usize, max_len: usize) -> Vec<Example> {
    (0..size)
        .map(|_| {
            let mut tokens: Vec<usize> = (1..=12).collect();
            tokens.shuffle(rng);
            tokens.truncate(rng.gen_range(0..=max_len));
            Example {
                tokens,
                label: if rng.gen_bool(0.3) { P } else { U },
            }
        })
        .collect()
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for seed in 0..20u64 {
        let mut m = model(seed, 4, 3, vec![3, 4, 5], 8);
        let batch = random_batch(&mut rng, 5, 8);
        let err = gradient_check(&mut m, &batch, 1e-5, 1e-5);
        assert!(err < 1e-4, "model {seed}: relative error {err}");
        let (_, g) = loss_and_grads(&m, &batch, None).unwrap();
        assert!(g.embeddings[..4].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn forward_matches_naive_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let m = model(seed, 5, 4, vec![3, 4, 5], 10);
        for ex in random_batch(&mut rng, 6, 10) {
            let fast = m.pooled_features(&ex.tokens);
            let slow = naive_pooled(&m, &ex.tokens);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(fast.len(), 12);
        }
    }
}

#[test]
fn dominant_window_moves_only_its_features() {
    let mut m = model(9, 4, 6, vec![3], 8);
    let seq = vec![1, 2, 3, 4, 5];
    let before = m.pooled_features(&seq);
    // token 12 becomes a scaled copy of filter 0's first tap
    let tap: Vec<f64> = m.banks[0].weights[..4].to_vec();
    m.embeddings.vectors[12 * 4..13 * 4]
        .iter_mut()
        .zip(&tap)
        .for_each(|(e, w)| *e = 50.0 * w);
    let mut longer = seq.clone();
    longer.push(12);
    let after = m.pooled_features(&longer);
    assert!(after[0] > before[0]);
    assert_eq!(after, naive_pooled(&m, &longer));
    // features whose maximum still sits inside the original full windows are untouched
    let full_windows_max = |f: usize| {
        let w = &m.banks[0];
        (0..=seq.len() - 3)
            .map(|s| {
                w.biases[f]
                    + (0..3)
                        .flat_map(|o| (0..4).map(move |k| (o, k)))
                        .map(|(o, k)| w.weights[f * 12 + o * 4 + k] * m.embeddings.vectors[seq[s + o] * 4 + k])
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    };
    for f in 1..6 {
        if after[f] == full_windows_max(f) {
            assert!(after[f] >= before[f] - 1e-12 || before[f] > full_windows_max(f));
        }
    }
}

fn toy_corpus(n: usize, seed: u64) -> Vec<TaggedImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 4 == 0 { P } else { U };
            let mut tags: Vec<String> = (0..rng.gen_range(1..4))
                .map(|_| format!("tag{}", rng.gen_range(1..10)))
                .collect();
            if label.is_private() {
                tags.insert(rng.gen_range(0..=tags.len()), "tag0".into());
            }
            TaggedImage::new(tags, label)
        })
        .collect()
}

fn small_cnn(seed: u64) -> TagCnnModel {
    let v = vocab(10);
    let config = CnnConfig {
        embed_dim: 8,
        ..CnnConfig::default()
    };
    TagCnnModel::new(v.clone(), EmbeddingMatrix::random(v.len(), 8, seed), &config, seed).unwrap()
}

#[test]
fn one_decisive_tag_is_learned() {
    let data = toy_corpus(200, 1);
    let config = TrainConfig {
        epochs: 30,
        early_stop_patience: 30,
        ..TrainConfig::default()
    };
    let (m, history) = train(small_cnn(1), &data, &data, &config).unwrap();
    let correct = data
        .iter()
        .filter(|img| (m.predict_proba(&img.tags) >= 0.5) == img.label.is_private())
        .count();
    assert!(
        correct as f64 / data.len() as f64 >= 0.99,
        "{correct}/200 after {:?}",
        history
    );
    let p = m.predict_proba(&["tag0"]);
    assert!(p > 0.9, "P(private | tag0) = {p}");
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = toy_corpus(40, 2);
    let start = small_cnn(2);
    let config = TrainConfig {
        epochs: 2,
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    let (m, _) = train(start.clone(), &data, &data, &config).unwrap();
    assert_eq!(m, start);
}

#[test]
fn training_is_reproducible() {
    let data = toy_corpus(60, 3);
    let config = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let (m1, h1) = train(small_cnn(4), &data, &data, &config).unwrap();
    let (m2, h2) = train(small_cnn(4), &data, &data, &config).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(m1.to_bytes(), m2.to_bytes());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cnn.bin");
    m1.save(&path).unwrap();
    assert_eq!(TagCnnModel::load(&path).unwrap(), m1);
}

#[test]
fn empty_training_set_rejected() {
    let data = toy_corpus(10, 3);
    let empty: Vec<TaggedImage> = vec![];
    assert!(train(small_cnn(1), &empty, &data, &TrainConfig::default()).is_err());
    let _ = PrivacyLabel::Public;
}

proptest! {
    #[test]
    fn outputs_are_distributions(seed in any::<u64>(), len in 0usize..12) {
        let m = model(seed, 3, 2, vec![3, 4, 5], 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=12)).collect();
        let (_, p) = m.forward(&tokens);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn logit_shift_leaves_probabilities(z0 in -30.0..30.0f64, z1 in -30.0..30.0f64, c in -100.0..100.0f64) {
        let a = softmax([z0, z1]);
        let b = softmax([z0 + c, z1 + c]);
        prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }
}
