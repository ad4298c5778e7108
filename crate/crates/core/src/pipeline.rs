//! Train-on-split, score-the-test-side runs shared by the command line and the tests.

use serde::{Deserialize, Serialize};

use crate::baselines::{rule_tag_classify, RulePolicy};
use crate::corpus::{make_split, stratified_folds, tagged_images, ImageRecord, PrivacyLabel, TagPool, TaggedImage};
use crate::error::{Error, Result};
use crate::eval::{average_over_seeds, confusion, metrics, threshold_predictions, MetricsReport, SeedAverage};
use crate::svm::{grid_search_cv, train_calibrated, GridResult, GridSpec, SmoParams, Standardizer, SvmModel};
use crate::tag_cnn::{self, load_pretrained_embeddings, CnnConfig, EmbeddingMatrix, History, TagCnnModel, TrainConfig};
use crate::tag_vectorize::{bot_encode, build_vocab, fuse_features, select_top_tags, InformationGain, TagVocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    pub block: String,
    pub grid: GridSpec,
    pub standardize: bool,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagOptions {
    pub pool: TagPool,
    pub k_deep: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOptions {
    pub svm: SvmOptions,
    pub tags: TagOptions,
    /// Upper bound on the selected tags; vocabularies smaller than this are used whole.
    pub top_tags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnOptions {
    pub tags: TagOptions,
    pub cnn: CnnConfig,
    pub train: TrainConfig,
    /// One training fold in `dev_folds` is held out for early stopping.
    pub dev_folds: usize,
    pub embeddings: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelSpec {
    Svm(SvmOptions),
    Tagcnn(CnnOptions),
    Fusion(FusionOptions),
    Rule { person_tags: RulePolicy, tags: TagOptions },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Svm(_) => "svm",
            ModelSpec::Tagcnn(_) => "tagcnn",
            ModelSpec::Fusion(_) => "fusion",
            ModelSpec::Rule { .. } => "rule",
        }
    }
}

pub enum Trained {
    Svm {
        model: SvmModel,
        grid: GridResult,
    },
    Fusion {
        model: SvmModel,
        grid: GridResult,
        vocab: TagVocabulary,
    },
    TagCnn {
        model: Box<TagCnnModel>,
        history: History,
    },
    Rule(RulePolicy),
}

/// Private-class scores of the test side, in test order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScores {
    pub ids: Vec<String>,
    pub labels: Vec<PrivacyLabel>,
    pub scores: Vec<f64>,
}

impl TestScores {
    pub fn report(&self, threshold: f64) -> Result<MetricsReport> {
        let preds = threshold_predictions(&self.scores, threshold);
        Ok(metrics(&confusion(&preds, &self.labels)?))
    }

    /// `id<TAB>label<TAB>score` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for ((id, l), s) in self.ids.iter().zip(&self.labels).zip(&self.scores) {
            out.push_str(&format!("{id}\t{l}\t{s:.17e}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut t = TestScores {
            ids: Vec::new(),
            labels: Vec::new(),
            scores: Vec::new(),
        };
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Parse { line: n + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected id, label and score, got {} fields", fields.len())));
            }
            let label: PrivacyLabel = fields[1].parse().map_err(|e: Error| bad(e.to_string()))?;
            let score = fields[2].trim().parse::<f64>().map_err(|e| bad(e.to_string()))?;
            t.ids.push(fields[0].to_string());
            t.labels.push(label);
            t.scores.push(score);
        }
        Ok(t)
    }
}

fn feature_matrix(records: &[&ImageRecord], block: &str) -> Result<Vec<Vec<f64>>> {
    records.iter().map(|r| r.block(block).map(<[f64]>::to_vec)).collect()
}

fn labels(records: &[&ImageRecord]) -> Vec<PrivacyLabel> {
    records.iter().map(|r| r.label).collect()
}

fn fit_svm(x: Vec<Vec<f64>>, y: &[PrivacyLabel], opts: &SvmOptions, seed: u64) -> Result<(SvmModel, GridResult)> {
    let (x, scaler) = if opts.standardize {
        let s = Standardizer::fit(&x)?;
        (x.iter().map(|r| s.apply(r)).collect(), Some(s))
    } else {
        (x, None)
    };
    let grid = grid_search_cv(&x, y, &opts.grid, seed, opts.parallel)?;
    let mut model = train_calibrated(&x, y, &SmoParams::new(grid.best_c, grid.best_kernel), seed)?;
    model.scaler = scaler;
    Ok((model, grid))
}

fn fused_matrix(records: &[&ImageRecord], block: &str, tags: &TagOptions, vocab: &TagVocabulary) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .map(|r| {
            let bits = bot_encode(&r.tags(tags.pool, tags.k_deep), vocab);
            Ok(fuse_features(r.block(block)?, &bits))
        })
        .collect()
}

/// Information-gain selection of at most `top_tags` tags from the training side.
pub fn fusion_vocab(train: &[&ImageRecord], tags: &TagOptions, top_tags: usize) -> Result<TagVocabulary> {
    let images = tagged_images(train.iter().copied(), tags.pool, tags.k_deep);
    let sets: Vec<Vec<String>> = images.iter().map(|i| i.tags.clone()).collect();
    let full = build_vocab(&sets, 1);
    select_top_tags(&images, &full, top_tags.min(full.len()), &InformationGain)
}

/// Splits off one stratified fold of the training side as the early-stopping dev set.
fn dev_split(images: Vec<TaggedImage>, folds: usize, seed: u64) -> Result<(Vec<TaggedImage>, Vec<TaggedImage>)> {
    let lab: Vec<PrivacyLabel> = images.iter().map(|i| i.label).collect();
    let fold = stratified_folds(&lab, folds, seed)?;
    let (mut fit, mut dev) = (Vec::new(), Vec::new());
    for (img, f) in images.into_iter().zip(fold) {
        if f == 0 {
            dev.push(img);
        } else {
            fit.push(img);
        }
    }
    Ok((fit, dev))
}

pub fn train_model(spec: &ModelSpec, train: &[&ImageRecord], seed: u64) -> Result<Trained> {
    if train.is_empty() {
        return Err(Error::arg("empty training set"));
    }
    let y = labels(train);
    match spec {
        ModelSpec::Svm(opts) => {
            let (model, grid) = fit_svm(feature_matrix(train, &opts.block)?, &y, opts, seed)?;
            Ok(Trained::Svm { model, grid })
        }
        ModelSpec::Fusion(opts) => {
            let vocab = fusion_vocab(train, &opts.tags, opts.top_tags)?;
            let x = fused_matrix(train, &opts.svm.block, &opts.tags, &vocab)?;
            let (model, grid) = fit_svm(x, &y, &opts.svm, seed)?;
            Ok(Trained::Fusion { model, grid, vocab })
        }
        ModelSpec::Tagcnn(opts) => {
            let images = tagged_images(train.iter().copied(), opts.tags.pool, opts.tags.k_deep);
            let (fit, dev) = dev_split(images, opts.dev_folds, seed)?;
            let sets: Vec<Vec<String>> = fit.iter().map(|i| i.tags.clone()).collect();
            let vocab = build_vocab(&sets, 1);
            let dim = opts.cnn.embed_dim;
            let embeddings = match &opts.embeddings {
                Some(path) => load_pretrained_embeddings(path, &vocab, dim, seed)?,
                None => EmbeddingMatrix::random(vocab.len(), dim, seed),
            };
            let model = TagCnnModel::new(vocab, embeddings, &opts.cnn, seed)?;
            let config = TrainConfig {
                seed,
                ..opts.train.clone()
            };
            let (model, history) = tag_cnn::train(model, &fit, &dev, &config)?;
            Ok(Trained::TagCnn {
                model: Box::new(model),
                history,
            })
        }
        ModelSpec::Rule { person_tags, .. } => Ok(Trained::Rule(person_tags.clone())),
    }
}

pub fn score_model(spec: &ModelSpec, trained: &Trained, test: &[&ImageRecord]) -> Result<TestScores> {
    let scores = match (spec, trained) {
        (ModelSpec::Svm(opts), Trained::Svm { model, .. }) => feature_matrix(test, &opts.block)?
            .iter()
            .map(|x| model.private_probability(x))
            .collect::<Result<Vec<_>>>()?,
        (ModelSpec::Fusion(opts), Trained::Fusion { model, vocab, .. }) => {
            fused_matrix(test, &opts.svm.block, &opts.tags, vocab)?
                .iter()
                .map(|x| model.private_probability(x))
                .collect::<Result<Vec<_>>>()?
        }
        (ModelSpec::Tagcnn(opts), Trained::TagCnn { model, .. }) => test
            .iter()
            .map(|r| model.predict_proba(&r.tags(opts.tags.pool, opts.tags.k_deep)))
            .collect(),
        (ModelSpec::Rule { tags, .. }, Trained::Rule(policy)) => test
            .iter()
            .map(|r| match rule_tag_classify(policy, &r.tags(tags.pool, tags.k_deep)) {
                PrivacyLabel::Private => 1.0,
                PrivacyLabel::Public => 0.0,
            })
            .collect(),
        _ => return Err(Error::arg("trained model does not match its specification")),
    };
    Ok(TestScores {
        ids: test.iter().map(|r| r.id.clone()).collect(),
        labels: labels(test),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
    pub ratio: f64,
}

/// One seeded split, fit and test evaluation per seed.
pub struct SeedRuns {
    pub average: SeedAverage,
    pub scores: Vec<TestScores>,
}

pub fn evaluate_over_seeds(
    records: &[ImageRecord],
    spec: &ModelSpec,
    sizes: &SplitSizes,
    seeds: &[u64],
    threshold: f64,
) -> Result<SeedRuns> {
    let mut reports = Vec::with_capacity(seeds.len());
    let mut scores = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let plan = make_split(records, seed, sizes.train, sizes.test, sizes.ratio)?;
        let (train, test) = plan.partition(records)?;
        let trained = train_model(spec, &train, seed)?;
        let s = score_model(spec, &trained, &test)?;
        reports.push(s.report(threshold)?);
        scores.push(s);
    }
    Ok(SeedRuns {
        average: average_over_seeds(&reports)?,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_file_round_trip() {
        let t = TestScores {
            ids: vec!["a".into(), "b".into()],
            labels: vec![PrivacyLabel::Private, PrivacyLabel::Public],
            scores: vec![0.1 + 0.2, 1.0 / 3.0],
        };
        assert_eq!(TestScores::from_tsv(&t.to_tsv()).unwrap(), t);
        assert!(TestScores::from_tsv("a\tprivate\n").is_err());
        assert!(TestScores::from_tsv("a\tmaybe\t0.5\n").is_err());
    }
}
