//! Fixtures for the criterion benches.

use picpriv::baselines::GrayImage;
use picpriv::tag_cnn::{CnnConfig, EmbeddingMatrix, TagCnnModel};
use picpriv::tag_vectorize::TagVocabulary;
use picpriv::PrivacyLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two Gaussian-ish blobs in `dim` dimensions, one private point in four.
pub fn svm_problem(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<PrivacyLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let private = i % 4 == 0;
            let shift = if private { 0.6 } else { -0.2 };
            let x = (0..dim).map(|_| shift + rng.gen_range(-1.0..1.0)).collect();
            (
                x,
                if private {
                    PrivacyLabel::Private
                } else {
                    PrivacyLabel::Public
                },
            )
        })
        .unzip()
}

/// Default-shaped tag CNN over a `vocab`-word vocabulary, with a batch of token sequences.
pub fn cnn_fixture(vocab: usize, batch: usize, seed: u64) -> (TagCnnModel, Vec<Vec<usize>>) {
    let v = TagVocabulary::new((0..vocab).map(|i| format!("t{i}")).collect()).unwrap();
    let config = CnnConfig::default();
    let emb = EmbeddingMatrix::random(v.len(), config.embed_dim, seed);
    let model = TagCnnModel::new(v, emb, &config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = (0..batch)
        .map(|_| (0..rng.gen_range(5..=20)).map(|_| rng.gen_range(1..=vocab)).collect())
        .collect();
    (model, tokens)
}

pub fn noise_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::new(width, height, (0..width * height).map(|_| rng.gen()).collect()).unwrap()
}
