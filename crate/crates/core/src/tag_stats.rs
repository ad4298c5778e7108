//! Tag analytics: information gain, per-class frequencies, co-occurrence graphs and
//! the weighted private/public ratio.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{PrivacyLabel, TaggedImage};
use crate::error::{Error, Result};
use crate::tag_vectorize::TagVocabulary;

/// Weight given to each private image when comparing against public images.
pub const PRIVATE_WEIGHT: f64 = 3.0;

/// Presence/absence counts of one tag against the two classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagClassCounts {
    /// present, private
    pub n11: u64,
    /// present, public
    pub n10: u64,
    /// absent, private
    pub n01: u64,
    /// absent, public
    pub n00: u64,
}

impl TagClassCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn present(&self) -> u64 {
        self.n11 + self.n10
    }
}

/// Counts for every tag that occurs in `images`.
pub fn class_counts(images: &[TaggedImage]) -> BTreeMap<String, TagClassCounts> {
    let n_priv = images.iter().filter(|i| i.label.is_private()).count() as u64;
    let n_pub = images.len() as u64 - n_priv;
    let mut present: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for img in images {
        let unique: BTreeSet<&String> = img.tags.iter().collect();
        for tag in unique {
            let e = present.entry(tag.clone()).or_default();
            if img.label.is_private() {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    present
        .into_iter()
        .map(|(tag, (n11, n10))| {
            (
                tag,
                TagClassCounts {
                    n11,
                    n10,
                    n01: n_priv - n11,
                    n00: n_pub - n10,
                },
            )
        })
        .collect()
}

fn entropy2(a: u64, b: u64) -> f64 {
    let n = (a + b) as f64;
    if n == 0.0 {
        return 0.0;
    }
    [a, b]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// `H(Y) - p(t=1) H(Y|t=1) - p(t=0) H(Y|t=0)` in bits.
pub fn information_gain(c: &TagClassCounts) -> f64 {
    let n = c.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let h_y = entropy2(c.n11 + c.n01, c.n10 + c.n00);
    let p_present = c.present() as f64 / n;
    let ig = h_y - p_present * entropy2(c.n11, c.n10) - (1.0 - p_present) * entropy2(c.n01, c.n00);
    // rounding can push an independent tag a hair below zero
    ig.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTag {
    pub tag: String,
    pub score: f64,
    pub frequency: u64,
}

/// Tags by descending information gain; ties by frequency, then lexicographically.
///
/// Restricted to `vocab` when given. Callers pass training images only.
pub fn rank_by_ig(images: &[TaggedImage], vocab: Option<&TagVocabulary>) -> Vec<RankedTag> {
    let counts = class_counts(images);
    let mut ranked: Vec<RankedTag> = match vocab {
        Some(v) => v
            .tags()
            .iter()
            .map(|t| {
                let c = counts.get(t).copied().unwrap_or_else(|| absent_everywhere(images));
                (t.clone(), c)
            })
            .map(|(tag, c)| RankedTag {
                tag,
                score: information_gain(&c),
                frequency: c.present(),
            })
            .collect(),
        None => counts
            .into_iter()
            .map(|(tag, c)| RankedTag {
                tag,
                score: information_gain(&c),
                frequency: c.present(),
            })
            .collect(),
    };
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.frequency.cmp(&a.frequency))
            .then_with(|| a.tag.cmp(&b.tag))
    });
    ranked
}

fn absent_everywhere(images: &[TaggedImage]) -> TagClassCounts {
    let n_priv = images.iter().filter(|i| i.label.is_private()).count() as u64;
    TagClassCounts {
        n11: 0,
        n10: 0,
        n01: n_priv,
        n00: images.len() as u64 - n_priv,
    }
}

/// Column-major grid of the leading tags: column `c` holds ranks `c*rows+1 ..= (c+1)*rows`.
pub fn ranked_grid_tsv(ranked: &[RankedTag], rows: usize, cols: usize) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..cols)
        .map(|c| format!("Rank {}-{}", c * rows + 1, (c + 1) * rows))
        .collect();
    writeln!(out, "{}", header.join("\t")).unwrap();
    for r in 0..rows {
        let cells: Vec<&str> = (0..cols)
            .map(|c| ranked.get(c * rows + r).map_or("", |t| t.tag.as_str()))
            .collect();
        writeln!(out, "{}", cells.join("\t")).unwrap();
    }
    out
}

pub fn ranked_tsv(ranked: &[RankedTag]) -> String {
    let mut out = String::from("rank\ttag\tinformation_gain\tfrequency\n");
    for (i, t) in ranked.iter().enumerate() {
        writeln!(out, "{}\t{}\t{:.6}\t{}", i + 1, t.tag, t.score, t.frequency).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub class: PrivacyLabel,
    pub counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    /// The `n` most frequent tags, ties lexicographic.
    pub fn top(&self, n: usize) -> Vec<(String, u64)> {
        let mut items: Vec<(String, u64)> = self.counts.iter().map(|(t, c)| (t.clone(), *c)).collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(n);
        items
    }
}

/// Number of images of `class` carrying each tag.
pub fn frequency_table(images: &[TaggedImage], class: PrivacyLabel) -> FrequencyTable {
    let mut counts = BTreeMap::new();
    for img in images.iter().filter(|i| i.label == class) {
        let unique: BTreeSet<&String> = img.tags.iter().collect();
        for tag in unique {
            *counts.entry(tag.clone()).or_insert(0) += 1;
        }
    }
    FrequencyTable { class, counts }
}

/// `3 n11 / (3 n11 + n10)`: private share among images carrying `tag`.
pub fn private_public_ratio(images: &[TaggedImage], tag: &str) -> Result<f64> {
    let (mut private, mut public) = (0u64, 0u64);
    for img in images.iter().filter(|i| i.has(tag)) {
        if img.label.is_private() {
            private += 1;
        } else {
            public += 1;
        }
    }
    if private + public == 0 {
        return Err(Error::arg(format!("tag {tag:?} does not occur")));
    }
    let weighted = PRIVATE_WEIGHT * private as f64;
    Ok(weighted / (weighted + public as f64))
}

/// Word-cloud data for one class: (tag, count in class, class share of the weighted ratio).
pub fn cloud_tsv(images: &[TaggedImage], class: PrivacyLabel, n: usize) -> Result<String> {
    let mut out = String::from("tag\tcount\tclass_share\n");
    for (tag, count) in frequency_table(images, class).top(n) {
        let ratio = private_public_ratio(images, &tag)?;
        let share = if class.is_private() { ratio } else { 1.0 - ratio };
        writeln!(out, "{tag}\t{count}\t{share:.6}").unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocEdge {
    /// Always `a < b`.
    pub a: String,
    pub b: String,
    /// Jaccard overlap of the two tags' image sets within the class.
    pub weight: f64,
    /// Images carrying both tags.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocGraph {
    pub class: PrivacyLabel,
    /// Tags incident to at least one edge, with their in-class counts.
    pub nodes: Vec<(String, u64)>,
    pub edges: Vec<CoocEdge>,
}

/// Co-occurrence graph of tags within images of `class`, keeping edges whose weight is at
/// least `threshold`. With `anchor`, only edges touching it survive.
pub fn cooc_graph(images: &[TaggedImage], class: PrivacyLabel, anchor: Option<&str>, threshold: f64) -> Result<CoocGraph> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::arg(format!("threshold must be non-negative, got {threshold}")));
    }
    let mut single: BTreeMap<&str, u64> = BTreeMap::new();
    let mut pairs: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for img in images.iter().filter(|i| i.label == class) {
        let tags: Vec<&str> = img
            .tags
            .iter()
            .map(String::as_str)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for (i, &a) in tags.iter().enumerate() {
            *single.entry(a).or_insert(0) += 1;
            for &b in &tags[i + 1..] {
                *pairs.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let mut edges = Vec::new();
    for ((a, b), count) in pairs {
        if let Some(anchor) = anchor {
            if a != anchor && b != anchor {
                continue;
            }
        }
        let union = single[a] + single[b] - count;
        let weight = count as f64 / union as f64;
        if weight >= threshold {
            edges.push(CoocEdge {
                a: a.to_string(),
                b: b.to_string(),
                weight,
                count,
            });
        }
    }
    let names: BTreeSet<&str> = edges.iter().flat_map(|e| [e.a.as_str(), e.b.as_str()]).collect();
    let nodes = names.into_iter().map(|t| (t.to_string(), single[t])).collect();
    Ok(CoocGraph { class, nodes, edges })
}

impl CoocGraph {
    /// Tab-separated node and edge lists.
    pub fn to_text(&self) -> String {
        let mut out = format!("# cooc class={}\n", self.class);
        for (tag, count) in &self.nodes {
            writeln!(out, "node\t{tag}\t{count}").unwrap();
        }
        for e in &self.edges {
            writeln!(out, "edge\t{}\t{}\t{:.6}\t{}", e.a, e.b, e.weight, e.count).unwrap();
        }
        out
    }
}
