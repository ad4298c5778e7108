//! Bag-of-Tags encoding, selection of the most informative tags and visual+tag fusion.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::TaggedImage;
use crate::error::{Error, Result};
use crate::tag_stats::{class_counts, information_gain, TagClassCounts};

/// Ordered tag list; a tag's position is its Bag-of-Tags bit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagVocabulary {
    tags: Vec<String>,
    index_of: HashMap<String, usize>,
    /// Header line written as a `#` comment, e.g. `scorer=information_gain n=350`.
    pub header: Option<String>,
}

impl TagVocabulary {
    pub fn new(tags: Vec<String>) -> Result<Self> {
        let mut index_of = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if index_of.insert(t.clone(), i).is_some() {
                return Err(Error::arg(format!("duplicate vocabulary tag {t:?}")));
            }
        }
        Ok(TagVocabulary {
            tags,
            index_of,
            header: None,
        })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index_of.get(tag).copied()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        if let Some(h) = &self.header {
            writeln!(out, "# {h}")?;
        }
        for t in &self.tags {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut tags = Vec::new();
        let mut header = None;
        for line in input.lines() {
            let line = line?;
            if let Some(comment) = line.strip_prefix('#') {
                header.get_or_insert_with(|| comment.trim().to_string());
            } else if !line.is_empty() {
                tags.push(line);
            }
        }
        let mut v = TagVocabulary::new(tags)?;
        v.header = header;
        Ok(v)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

/// Tags seen in at least `min_count` images, by descending frequency then lexicographically.
pub fn build_vocab<S: AsRef<str>>(tag_sets: &[Vec<S>], min_count: usize) -> TagVocabulary {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for set in tag_sets {
        let mut seen: Vec<&str> = set.iter().map(AsRef::as_ref).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    let mut items: Vec<(&str, usize)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    TagVocabulary::new(items.into_iter().map(|(t, _)| t.to_string()).collect()).expect("frequency keys are unique")
}

/// Binary presence vector over a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoTVector {
    pub bits: Vec<u8>,
}

impl BoTVector {
    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

/// Sets bit `i` iff vocabulary tag `i` is among `tags`; unknown tags are ignored.
pub fn bot_encode<S: AsRef<str>>(tags: &[S], vocab: &TagVocabulary) -> BoTVector {
    let mut bits = vec![0u8; vocab.len()];
    for t in tags {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            bits[i] = 1;
        }
    }
    BoTVector { bits }
}

/// Scores a tag from its class counts; higher is more useful.
pub trait TagScorer {
    fn name(&self) -> &str;
    fn score(&self, counts: &TagClassCounts) -> f64;
}

pub struct InformationGain;

impl TagScorer for InformationGain {
    fn name(&self) -> &str {
        "information_gain"
    }

    fn score(&self, counts: &TagClassCounts) -> f64 {
        information_gain(counts)
    }
}

/// The `n` best-scoring vocabulary tags, in descending score; equal scores keep vocabulary order.
pub fn select_top_tags(train: &[TaggedImage], vocab: &TagVocabulary, n: usize, scorer: &dyn TagScorer) -> Result<TagVocabulary> {
    if n > vocab.len() {
        return Err(Error::arg(format!(
            "cannot select {n} tags from a vocabulary of {}",
            vocab.len()
        )));
    }
    let counts = class_counts(train);
    let n_priv = train.iter().filter(|i| i.label.is_private()).count() as u64;
    let absent = TagClassCounts {
        n01: n_priv,
        n00: train.len() as u64 - n_priv,
        ..Default::default()
    };
    let mut scored: Vec<(usize, f64)> = vocab
        .tags()
        .iter()
        .enumerate()
        .map(|(i, t)| (i, scorer.score(counts.get(t).unwrap_or(&absent))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let tags = scored.into_iter().take(n).map(|(i, _)| vocab.tags()[i].clone()).collect();
    let mut out = TagVocabulary::new(tags)?;
    out.header = Some(format!("scorer={} n={n}", scorer.name()));
    Ok(out)
}

/// Visual features followed by the tag bits.
pub fn fuse_features(visual: &[f64], tag_bits: &BoTVector) -> Vec<f64> {
    let mut out = Vec::with_capacity(visual.len() + tag_bits.bits.len());
    out.extend_from_slice(visual);
    out.extend(tag_bits.bits.iter().map(|&b| b as f64));
    out
}
