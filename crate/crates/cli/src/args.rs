use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use picpriv::svm::{GridSpec, KernelSpec};
use picpriv::tag_cnn::{CnnConfig, TrainConfig};
use picpriv::{PrivacyLabel, TagPool};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "picpriv", version, about = "Image privacy prediction from visual features and tags")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a labeled synthetic corpus with a planted decision rule.
    Synth(SynthArgs),
    /// Write seeded, ratio-enforcing train/test splits.
    Split(SplitArgs),
    /// Grid-search, fit and calibrate an SVM on one feature block.
    TrainSvm(TrainSvmArgs),
    /// Train the tag CNN.
    TrainTagcnn(TrainTagCnnArgs),
    /// Seeded train/test evaluation, or scoring of precomputed score files.
    Eval(EvalArgs),
    /// Paired t-test between two evaluation runs.
    Ttest(TtestArgs),
    /// Threshold sweep over a score file.
    Curves(CurvesArgs),
    /// Tag analytics.
    Tagstats(TagstatsArgs),
    /// Append bag-of-tags bits to a feature block.
    Fuse(FuseArgs),
    /// Hand-engineered and rule baselines.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub private: usize,
    #[arg(long, default_value_t = 3000)]
    pub public: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.02)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.02)]
    pub tag_noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitSizeArgs {
    /// Training-side size; defaults to 27/32 of the corpus.
    #[arg(long)]
    pub train: Option<usize>,
    /// Test-side size; defaults to the rest of the corpus.
    #[arg(long)]
    pub test: Option<usize>,
    /// Public items per private item on both sides.
    #[arg(long, default_value_t = 3.0)]
    pub ratio: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds 0..N are used.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[command(flatten)]
    pub sizes: SplitSizeArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Rbf,
    Poly,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Starting grid; the flags below replace its axes.
    #[arg(long, value_enum, default_value_t = GridPreset::Default)]
    pub grid: GridPreset,
    #[arg(long, value_enum, default_value_t = KernelChoice::Both)]
    pub kernel: KernelChoice,
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub degree: Option<Vec<u32>>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
}

impl GridArgs {
    pub fn spec(&self) -> GridSpec {
        let base = match self.grid {
            GridPreset::Default => GridSpec::default(),
        };
        let gammas = self.gamma.clone().unwrap_or_else(|| {
            base.kernels
                .iter()
                .filter_map(|k| match k {
                    KernelSpec::Rbf { gamma } => Some(*gamma),
                    KernelSpec::Poly { .. } => None,
                })
                .collect()
        });
        let degrees = self.degree.clone().unwrap_or_else(|| {
            base.kernels
                .iter()
                .filter_map(|k| match k {
                    KernelSpec::Poly { degree } => Some(*degree),
                    KernelSpec::Rbf { .. } => None,
                })
                .collect()
        });
        let mut kernels = Vec::new();
        if self.kernel != KernelChoice::Poly {
            kernels.extend(gammas.into_iter().map(|gamma| KernelSpec::Rbf { gamma }));
        }
        if self.kernel != KernelChoice::Rbf {
            kernels.extend(degrees.into_iter().map(|degree| KernelSpec::Poly { degree }));
        }
        GridSpec {
            c_values: self.c.clone().unwrap_or(base.c_values),
            kernels,
            folds: self.folds,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SvmArgs {
    /// Feature block fed to the SVM.
    #[arg(long, default_value = "fc-R")]
    pub block: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Per-dimension standardization fitted on the training side.
    #[arg(long)]
    pub standardize: bool,
    /// Evaluate grid cells on all cores.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TagArgs {
    #[arg(long, default_value = "user")]
    pub pool: TagPool,
    /// Deep tags taken from the top of the probability block.
    #[arg(long, default_value_t = 10)]
    pub k_deep_tags: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CnnArgs {
    #[arg(long, default_value_t = 300)]
    pub embed_dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5])]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    pub filters: usize,
    #[arg(long, default_value_t = 32)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    /// Keep the embedding table fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    /// Word-vector text file (`word v1 .. vD` per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// One of this many stratified training folds is held out for early stopping.
    #[arg(long, default_value_t = 10)]
    pub dev_folds: usize,
    /// Data-parallel gradients; results then depend on the thread count.
    #[arg(long)]
    pub parallel_cnn: bool,
}

impl CnnArgs {
    pub fn cnn(&self) -> CnnConfig {
        CnnConfig {
            embed_dim: self.embed_dim,
            widths: self.widths.clone(),
            filters: self.filters,
            max_len: self.max_len,
            dropout: self.dropout,
            trainable_embeddings: !self.freeze_embeddings,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: 0,
            early_stop_patience: self.patience,
            parallel: self.parallel_cnn,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainSvmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Split file; only its training ids are used.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Seeds the CV folds and the calibration folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub svm: SvmArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainTagCnnArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tags: TagArgs,
    #[command(flatten)]
    pub cnn: CnnArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Svm,
    Tagcnn,
    Fusion,
    Rule,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "scores")]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelChoice::Svm)]
    pub model: ModelChoice,
    /// Labeled score files (`id<TAB>label<TAB>score`), one per seed, instead of training.
    #[arg(long, num_args = 1.., conflicts_with = "corpus")]
    pub scores: Vec<PathBuf>,
    /// Seeds 0..N are run.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub sizes: SplitSizeArgs,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[command(flatten)]
    pub tags: TagArgs,
    /// Tags kept for fusion, ranked by information gain on the training side.
    #[arg(long, default_value_t = 350)]
    pub top_tags: usize,
    #[command(flatten)]
    pub cnn: CnnArgs,
    /// Comma-separated person tags for the rule baseline.
    #[arg(long, value_delimiter = ',', default_values_t = ["people".to_string(), "men".to_string(), "women".to_string()])]
    pub person_tags: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct TtestArgs {
    /// Evaluation output directory.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CurvesArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassChoice {
    Private,
    Public,
}

impl From<ClassChoice> for PrivacyLabel {
    fn from(c: ClassChoice) -> Self {
        match c {
            ClassChoice::Private => PrivacyLabel::Private,
            ClassChoice::Public => PrivacyLabel::Public,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TagstatsArgs {
    #[command(subcommand)]
    pub stat: Stat,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "user")]
    pub pool: TagPool,
    #[arg(long, global = true, default_value_t = 10)]
    pub k_deep_tags: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    /// Tags ranked by information gain.
    Rank {
        #[arg(long, default_value_t = 50)]
        top: usize,
        /// Also write the ranking as a grid with this many rows per column.
        #[arg(long)]
        grid_rows: Option<usize>,
    },
    /// Per-class tag frequencies.
    Freq {
        #[arg(long, value_enum, default_value_t = ClassChoice::Private)]
        class: ClassChoice,
        #[arg(long, default_value_t = 50)]
        top: usize,
    },
    /// Tag co-occurrence graph within one class.
    Cooc {
        #[arg(long, value_enum, default_value_t = ClassChoice::Private)]
        class: ClassChoice,
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
    },
    /// Weighted private share of images carrying each tag.
    Ratio {
        #[arg(long, value_delimiter = ',', required = true)]
        tag: Vec<String>,
    },
    /// Word-cloud data for one class.
    Cloud {
        #[arg(long, value_enum, default_value_t = ClassChoice::Private)]
        class: ClassChoice,
        #[arg(long, default_value_t = 50)]
        top: usize,
    },
}

impl Stat {
    pub fn name(&self) -> &'static str {
        match self {
            Stat::Rank { .. } => "rank",
            Stat::Freq { .. } => "freq",
            Stat::Cooc { .. } => "cooc",
            Stat::Ratio { .. } => "ratio",
            Stat::Cloud { .. } => "cloud",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FuseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "fc-R")]
    pub block: String,
    /// Tags are selected on this split's training side when given, else on the whole corpus.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 350)]
    pub top_tags: usize,
    #[command(flatten)]
    pub tags: TagArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[command(subcommand)]
    pub kind: Baseline,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// GIST descriptors of grayscale PGM images.
    Gist {
        #[arg(long, required = true, num_args = 1..)]
        images: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Visual vocabulary from local descriptor files, then one histogram per file.
    Bovw {
        #[arg(long, required = true, num_args = 1..)]
        descriptors: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Expected descriptor length.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Person-tag rule scored on a corpus.
    Rule {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = ["people".to_string(), "men".to_string(), "women".to_string()])]
        person_tags: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}
