//! Image records, feature-file ingestion and the train/test/fold protocol.
//!
//! A feature file holds one JSON object per line:
//!
//! ```text
//! {"id":"img1","label":"private","user_tags":["people"],"features":{"fc-R":[0.1,0.2]},
//!  "prob":{"names":["wig","suit"],"values":[0.7,0.3]}}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Maximum allowed deviation of a probability block from unit mass.
pub const PROB_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrivacyLabel {
    Private,
    Public,
}

impl PrivacyLabel {
    pub fn is_private(self) -> bool {
        self == PrivacyLabel::Private
    }

    /// `+1` for private, `-1` for public.
    pub fn sign(self) -> f64 {
        match self {
            PrivacyLabel::Private => 1.0,
            PrivacyLabel::Public => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PrivacyLabel::Private => PrivacyLabel::Public,
            PrivacyLabel::Public => PrivacyLabel::Private,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyLabel::Private => "private",
            PrivacyLabel::Public => "public",
        }
    }
}

impl fmt::Display for PrivacyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrivacyLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "private" => Ok(PrivacyLabel::Private),
            "public" => Ok(PrivacyLabel::Public),
            other => Err(Error::arg(format!("unknown label {other:?}"))),
        }
    }
}

/// Softmax output of an object-recognition network together with its category names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbBlock {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub label: PrivacyLabel,
    #[serde(default)]
    pub user_tags: Vec<String>,
    #[serde(default, deserialize_with = "unique_blocks")]
    pub features: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<ProbBlock>,
}

fn unique_blocks<'de, D>(deserializer: D) -> std::result::Result<BTreeMap<String, Vec<f64>>, D::Error>
where
    D: Deserializer<'de>,
{
    struct BlockVisitor;

    impl<'de> Visitor<'de> for BlockVisitor {
        type Value = BTreeMap<String, Vec<f64>>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an object mapping block names to number arrays")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((name, values)) = map.next_entry::<String, Vec<f64>>()? {
                if out.contains_key(&name) {
                    return Err(serde::de::Error::custom(format!("duplicate feature block {name:?}")));
                }
                out.insert(name, values);
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(BlockVisitor)
}

/// Which tags of a record participate in tag-based models and statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagPool {
    User,
    Deep,
    Both,
}

impl FromStr for TagPool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(TagPool::User),
            "deep" => Ok(TagPool::Deep),
            "both" => Ok(TagPool::Both),
            other => Err(Error::arg(format!("unknown tag pool {other:?} (user, deep, both)"))),
        }
    }
}

impl ImageRecord {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::Validation {
            id: self.id.clone(),
            message,
        };
        for (name, values) in &self.features {
            if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("block {name:?} has a non-finite value at index {pos}")));
            }
        }
        if let Some(prob) = &self.prob {
            if prob.names.len() != prob.values.len() {
                return Err(invalid(format!(
                    "prob has {} names but {} values",
                    prob.names.len(),
                    prob.values.len()
                )));
            }
            if prob.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid("prob contains a negative or non-finite entry".into()));
            }
            let sum: f64 = prob.values.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(invalid(format!("prob sums to {sum}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn block(&self, name: &str) -> Result<&[f64]> {
        self.features.get(name).map(Vec::as_slice).ok_or_else(|| Error::MissingBlock {
            name: name.to_string(),
            available: self.features.keys().cloned().collect(),
        })
    }

    /// Top-`k` category names of the probability block; empty when the record has none.
    pub fn deep_tags(&self, k: usize) -> Vec<String> {
        match &self.prob {
            Some(p) => deep_tags_topk(&p.values, &p.names, k.min(p.values.len())).unwrap_or_default(),
            None => Vec::new(),
        }
    }

    /// Tags drawn from `pool`, user tags first, de-duplicated in order of first appearance.
    pub fn tags(&self, pool: TagPool, k_deep: usize) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        if matches!(pool, TagPool::User | TagPool::Both) {
            out.extend(self.user_tags.iter().cloned());
        }
        if matches!(pool, TagPool::Deep | TagPool::Both) {
            out.extend(self.deep_tags(k_deep));
        }
        let mut seen = HashSet::new();
        out.retain(|t| seen.insert(t.clone()));
        out
    }
}

/// A record reduced to its tag set and label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedImage {
    pub tags: Vec<String>,
    pub label: PrivacyLabel,
}

impl TaggedImage {
    pub fn new<S: Into<String>>(tags: impl IntoIterator<Item = S>, label: PrivacyLabel) -> Self {
        let mut seen = HashSet::new();
        let tags = tags
            .into_iter()
            .map(Into::into)
            .filter(|t: &String| seen.insert(t.clone()))
            .collect();
        TaggedImage { tags, label }
    }

    pub fn has(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

pub fn tagged_images<'a, I>(records: I, pool: TagPool, k_deep: usize) -> Vec<TaggedImage>
where
    I: IntoIterator<Item = &'a ImageRecord>,
{
    records
        .into_iter()
        .map(|r| TaggedImage {
            tags: r.tags(pool, k_deep),
            label: r.label,
        })
        .collect()
}

/// Reads line-delimited records, validating each. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<ImageRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ImageRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, records: &[ImageRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(|e| Error::Format(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, records: &[ImageRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(BufWriter::new(file), records)
}

/// Lowercases, keeps alphabetic characters only, drops empties and repeats.
pub fn normalize_user_tags<S: AsRef<str>>(raw: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    raw.iter()
        .map(|t| {
            t.as_ref()
                .chars()
                .filter(|c| c.is_alphabetic())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty() && seen.insert(t.clone()))
        .collect()
}

/// The `k` most probable category names, descending; equal probabilities keep index order.
pub fn deep_tags_topk<S: AsRef<str>>(prob: &[f64], names: &[S], k: usize) -> Result<Vec<String>> {
    if names.len() != prob.len() {
        return Err(Error::arg(format!(
            "{} category names for {} probabilities",
            names.len(),
            prob.len()
        )));
    }
    if k > prob.len() {
        return Err(Error::arg(format!("k = {k} exceeds {} categories", prob.len())));
    }
    let mut order: Vec<usize> = (0..prob.len()).collect();
    // sort_by is stable, so ties stay in index order
    order.sort_by(|&a, &b| prob[b].total_cmp(&prob[a]));
    Ok(order.into_iter().take(k).map(|i| names[i].as_ref().to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// public : private
    pub class_ratio: f64,
}

/// Number of private items in a side of `n` items at `ratio` public per private.
fn private_share(n: usize, ratio: f64) -> usize {
    (n as f64 / (ratio + 1.0)).round() as usize
}

/// Seeded stratified train/test split enforcing `ratio` public items per private item.
///
/// Each class is shuffled independently and the larger class is downsampled; ids keep
/// corpus order within each side.
pub fn make_split(records: &[ImageRecord], seed: u64, train_n: usize, test_n: usize, ratio: f64) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::arg(format!("class ratio must be positive, got {ratio}")));
    }
    if train_n + test_n > records.len() {
        return Err(Error::arg(format!(
            "train_n + test_n = {} exceeds corpus size {}",
            train_n + test_n,
            records.len()
        )));
    }
    let train_priv = private_share(train_n, ratio);
    let test_priv = private_share(test_n, ratio);
    let train_pub = train_n - train_priv;
    let test_pub = test_n - test_priv;

    let mut private: Vec<usize> = Vec::new();
    let mut public: Vec<usize> = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match r.label {
            PrivacyLabel::Private => private.push(i),
            PrivacyLabel::Public => public.push(i),
        }
    }
    if private.len() < train_priv + test_priv {
        return Err(Error::Shortfall {
            class: "private",
            needed: train_priv + test_priv,
            available: private.len(),
        });
    }
    if public.len() < train_pub + test_pub {
        return Err(Error::Shortfall {
            class: "public",
            needed: train_pub + test_pub,
            available: public.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    private.shuffle(&mut rng);
    public.shuffle(&mut rng);

    let mut train: Vec<usize> = private[..train_priv].iter().chain(&public[..train_pub]).copied().collect();
    let mut test: Vec<usize> = private[train_priv..train_priv + test_priv]
        .iter()
        .chain(&public[train_pub..train_pub + test_pub])
        .copied()
        .collect();
    train.sort_unstable();
    test.sort_unstable();

    let ids = |idx: Vec<usize>| idx.into_iter().map(|i| records[i].id.clone()).collect();
    Ok(SplitPlan {
        seed,
        train_ids: ids(train),
        test_ids: ids(test),
        class_ratio: ratio,
    })
}

impl SplitPlan {
    /// Resolves the plan's ids against `records`, returning (train, test).
    pub fn partition<'a>(&self, records: &'a [ImageRecord]) -> Result<(Vec<&'a ImageRecord>, Vec<&'a ImageRecord>)> {
        let by_id: BTreeMap<&str, &ImageRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
        let lookup = |ids: &[String]| -> Result<Vec<&'a ImageRecord>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::arg(format!("split references unknown id {id:?}")))
                })
                .collect()
        };
        Ok((lookup(&self.train_ids)?, lookup(&self.test_ids)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: BTreeMap<String, usize>,
}

/// Stratified fold index per position of `labels`.
///
/// Each class is shuffled and dealt round-robin; the second class starts where the first
/// one stopped so total fold sizes differ by at most one.
pub fn stratified_folds(labels: &[PrivacyLabel], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::arg(format!("need at least 2 folds, got {k}")));
    }
    let mut private: Vec<usize> = Vec::new();
    let mut public: Vec<usize> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            PrivacyLabel::Private => private.push(i),
            PrivacyLabel::Public => public.push(i),
        }
    }
    let minority = private.len().min(public.len());
    if k > minority {
        return Err(Error::arg(format!("{k} folds exceed the minority class count {minority}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    private.shuffle(&mut rng);
    public.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (pos, &i) in private.iter().chain(&public).enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

pub fn make_folds(ids: &[String], labels: &[PrivacyLabel], k: usize, seed: u64) -> Result<FoldAssignment> {
    if ids.len() != labels.len() {
        return Err(Error::arg(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    let folds = stratified_folds(labels, k, seed)?;
    Ok(FoldAssignment {
        k,
        fold_of: ids.iter().cloned().zip(folds).collect(),
    })
}

/// Default split sizes: the 27,000/5,000 train/test proportion applied to `n` items.
pub fn default_split_sizes(n: usize) -> (usize, usize) {
    let train = (n as f64 * 27.0 / 32.0).round() as usize;
    (train, n - train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, label: PrivacyLabel) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            label,
            user_tags: vec![],
            features: BTreeMap::new(),
            prob: None,
        }
    }

    fn mixed(n_priv: usize, n_pub: usize) -> Vec<ImageRecord> {
        (0..n_priv)
            .map(|i| rec(&format!("p{i}"), PrivacyLabel::Private))
            .chain((0..n_pub).map(|i| rec(&format!("u{i}"), PrivacyLabel::Public)))
            .collect()
    }

    #[test]
    fn two_lines_round_trip() {
        let text = concat!(
            r#"{"id":"a","label":"private","user_tags":["people"],"features":{"fc-R":[0.5,1.25]},"prob":{"names":["x","y"],"values":[0.25,0.75]}}"#,
            "\n",
            r#"{"id":"b","label":"public","user_tags":[],"features":{}}"#,
            "\n"
        );
        let records = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].block("fc-R").unwrap(), &[0.5, 1.25]);
        let mut out = Vec::new();
        write_corpus(&mut out, &records).unwrap();
        assert_eq!(read_corpus(out.as_slice()).unwrap(), records);
    }

    #[test]
    fn bad_prob_sum_is_rejected() {
        let line = r#"{"id":"a","label":"public","features":{},"prob":{"names":["x","y"],"values":[0.5,0.3]}}"#;
        match read_corpus(line.as_bytes()) {
            Err(Error::Validation { id, .. }) => assert_eq!(id, "a"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = "{\"id\":\"a\",\"label\":\"public\"}\n\n{not json\n";
        match read_corpus(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_block_is_rejected() {
        let line = r#"{"id":"a","label":"public","features":{"f":[1],"f":[2]}}"#;
        assert!(matches!(read_corpus(line.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_block_lists_available() {
        let mut r = rec("a", PrivacyLabel::Public);
        r.features.insert("fc7".into(), vec![1.0]);
        let err = r.block("fc-R").unwrap_err().to_string();
        assert!(err.contains("fc7"), "{err}");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_user_tags(&["Birthday2010!", "people"]), vec!["birthday", "people"]);
        assert!(normalize_user_tags::<&str>(&[]).is_empty());
        assert!(normalize_user_tags(&["123", "!!"]).is_empty());
        assert_eq!(
            normalize_user_tags(&["People", "people", "Night Life"]),
            vec!["people", "nightlife"]
        );
    }

    #[test]
    fn topk_examples() {
        let names = ["n0", "n1", "n2"];
        assert_eq!(deep_tags_topk(&[0.5, 0.3, 0.2], &names, 2).unwrap(), vec!["n0", "n1"]);
        assert_eq!(deep_tags_topk(&[0.2, 0.3, 0.5], &names, 3).unwrap(), vec!["n2", "n1", "n0"]);
        assert_eq!(deep_tags_topk(&[0.4, 0.2, 0.4], &names, 2).unwrap(), vec!["n0", "n2"]);
        assert!(deep_tags_topk(&[0.5, 0.5], &["a", "b"], 3).is_err());
    }

    #[test]
    fn split_counts_and_determinism() {
        let records = mixed(100, 300);
        let plan = make_split(&records, 3, 300, 80, 3.0).unwrap();
        let count_priv = |ids: &[String]| ids.iter().filter(|id| id.starts_with('p')).count();
        assert_eq!(plan.train_ids.len(), 300);
        assert_eq!(count_priv(&plan.train_ids), 75);
        assert_eq!(count_priv(&plan.test_ids), 20);
        let train: HashSet<_> = plan.train_ids.iter().collect();
        assert!(plan.test_ids.iter().all(|id| !train.contains(id)));
        assert_eq!(plan, make_split(&records, 3, 300, 80, 3.0).unwrap());
        assert_ne!(plan, make_split(&records, 4, 300, 80, 3.0).unwrap());
    }

    #[test]
    fn split_shortfall() {
        let records = mixed(10, 200);
        // 120 items at 3:1 need 30 private
        match make_split(&records, 0, 120, 0, 3.0) {
            Err(Error::Shortfall {
                class,
                needed,
                available,
            }) => {
                assert_eq!((class, needed, available), ("private", 30, 10));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn folds_exact_stratification() {
        let labels: Vec<_> = (0..10)
            .map(|i| if i < 5 { PrivacyLabel::Private } else { PrivacyLabel::Public })
            .collect();
        let folds = stratified_folds(&labels, 5, 11).unwrap();
        for f in 0..5 {
            let members: Vec<_> = (0..10).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(members.iter().filter(|&&i| labels[i].is_private()).count(), 1);
        }
        assert!(stratified_folds(&labels[3..], 3, 0).is_err());
        assert!(stratified_folds(&labels, 1, 0).is_err());
    }

    #[test]
    fn folds_at_full_corpus_scale() {
        let labels: Vec<_> = (0..27_000)
            .map(|i| {
                if i % 4 == 0 {
                    PrivacyLabel::Private
                } else {
                    PrivacyLabel::Public
                }
            })
            .collect();
        let folds = stratified_folds(&labels, 10, 5).unwrap();
        let mut sizes = [0usize; 10];
        for f in folds {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 2_700), "{sizes:?}");
    }

    #[test]
    fn make_folds_keys_by_id() {
        let ids: Vec<String> = (0..6).map(|i| format!("i{i}")).collect();
        let labels = [
            PrivacyLabel::Private,
            PrivacyLabel::Public,
            PrivacyLabel::Private,
            PrivacyLabel::Public,
            PrivacyLabel::Private,
            PrivacyLabel::Public,
        ];
        let fa = make_folds(&ids, &labels, 3, 1).unwrap();
        assert_eq!(fa.fold_of.len(), 6);
        assert!(fa.fold_of.values().all(|&f| f < 3));
    }
}
