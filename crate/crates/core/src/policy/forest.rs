//! Depth-limited decision-tree ensemble trained with gini splits.
//!
//! Model file (format v1, JSON):
//! - `format`: always `"searchsim-forest"`; `version`: `1`
//! - `feature_names`: the 13 vector slot names the model was trained on
//! - `labels`: component ids, sorted; leaves refer to them by index
//! - `trees`: each node is `{"leaf": i}` or
//!   `{"feature": f, "threshold": t, "left": node, "right": node}`,
//!   where `x[f] <= t` goes left
//! - `metadata`: `dataset_hash` (FNV-1a of the canonical dataset lines),
//!   `examples`, `training_accuracy`, `trees`, `max_depth`, `seed`
//!
//! Prediction is a majority vote over trees; ties go to the lower label index.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{FeatureVector, FEATURE_DIM, FEATURE_NAMES};
use crate::text::{fnv1a64, hex64};

pub const MODEL_FORMAT: &str = "searchsim-forest";
pub const MODEL_VERSION: u32 = 1;
pub const MIN_EXAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDecision {
    pub features: FeatureVector,
    pub label: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrainError {
    #[error("need at least {MIN_EXAMPLES} examples, got {0}")]
    TooFewExamples(usize),
    #[error("degenerate training data: every example is labeled \"{0}\"")]
    SingleLabel(String),
    #[error("invalid training config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    /// Features tried per split; 0 means round(sqrt(13)).
    pub max_features: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { trees: 25, max_depth: 8, seed: 0, max_features: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Leaf { leaf: usize },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf } => return *leaf,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub dataset_hash: String,
    pub examples: usize,
    pub training_accuracy: f64,
    pub trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub labels: Vec<String>,
    pub trees: Vec<TreeNode>,
    pub metadata: ModelMetadata,
}

/// Anything that maps a feature vector to one of a fixed label set.
pub trait Classifier: Send + Sync + std::fmt::Debug {
    fn labels(&self) -> &[String];
    fn predict(&self, x: &FeatureVector) -> &str;
}

impl Classifier for Forest {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict(&self, x: &FeatureVector) -> &str {
        &self.labels[self.predict_index(x.as_slice())]
    }
}

impl Forest {
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.labels.len()];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1;
        }
        argmax(&votes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelIoError> {
        let forest: Forest = serde_json::from_str(text).map_err(|e| ModelIoError::Format(e.to_string()))?;
        if forest.format != MODEL_FORMAT || forest.version != MODEL_VERSION {
            return Err(ModelIoError::Format(format!("expected {MODEL_FORMAT} v{MODEL_VERSION}")));
        }
        if forest.feature_names != FEATURE_NAMES {
            return Err(ModelIoError::Format("feature layout differs from this build".into()));
        }
        let ok = forest.trees.iter().all(|t| valid_node(t, forest.labels.len()));
        if forest.labels.is_empty() || !ok {
            return Err(ModelIoError::Format("tree references an unknown label or feature".into()));
        }
        Ok(forest)
    }
}

fn valid_node(node: &TreeNode, labels: usize) -> bool {
    match node {
        TreeNode::Leaf { leaf } => *leaf < labels,
        TreeNode::Split { feature, left, right, .. } => {
            *feature < FEATURE_DIM && valid_node(left, labels) && valid_node(right, labels)
        }
    }
}

/// Lowest index among the maxima.
fn argmax(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Grower<'a> {
    xs: &'a [[f64; FEATURE_DIM]],
    ys: &'a [usize],
    classes: usize,
    max_depth: usize,
    max_features: usize,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.ys[i]] += 1;
        }
        c
    }

    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let counts = self.counts(idx);
        let majority = argmax(&counts);
        if depth >= self.max_depth || idx.len() < 2 || counts[majority] == idx.len() {
            return TreeNode::Leaf { leaf: majority };
        }
        let parent = gini(&counts, idx.len());
        let mut best: Option<(f64, usize, f64)> = None;
        let mut features: Vec<usize> = sample(rng, FEATURE_DIM, self.max_features).into_vec();
        features.sort_unstable();
        for f in features {
            idx.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]).then(a.cmp(&b)));
            let mut left = vec![0; self.classes];
            let mut right = counts.clone();
            for k in 1..idx.len() {
                let moved = self.ys[idx[k - 1]];
                left[moved] += 1;
                right[moved] -= 1;
                let (lo, hi) = (self.xs[idx[k - 1]][f], self.xs[idx[k]][f]);
                if lo == hi {
                    continue;
                }
                let n = idx.len() as f64;
                let score = (k as f64 / n) * gini(&left, k) + ((n - k as f64) / n) * gini(&right, idx.len() - k);
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        match best {
            Some((score, feature, threshold)) if score < parent - 1e-12 => {
                let (mut l, mut r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.grow(&mut l, depth + 1, rng)),
                    right: Box::new(self.grow(&mut r, depth + 1, rng)),
                }
            }
            _ => TreeNode::Leaf { leaf: majority },
        }
    }
}

pub fn dataset_lines(data: &[LabeledDecision]) -> String {
    data.iter().map(|d| serde_json::to_string(d).expect("decisions serialize") + "\n").collect()
}

pub fn read_dataset<R: Read>(source: R) -> Result<Vec<LabeledDecision>, ModelIoError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: LabeledDecision = serde_json::from_str(&line)
            .map_err(|e| ModelIoError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(d);
    }
    Ok(out)
}

pub fn train_policy(data: &[LabeledDecision], config: &TrainConfig) -> Result<Forest, TrainError> {
    if config.trees == 0 || config.max_depth == 0 {
        return Err(TrainError::Config("trees and max_depth must be at least 1".into()));
    }
    if config.max_features > FEATURE_DIM {
        return Err(TrainError::Config(format!("max_features must be at most {FEATURE_DIM}")));
    }
    if data.len() < MIN_EXAMPLES {
        return Err(TrainError::TooFewExamples(data.len()));
    }
    let labels: Vec<String> = data.iter().map(|d| d.label.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if labels.len() < 2 {
        return Err(TrainError::SingleLabel(labels[0].clone()));
    }
    let xs: Vec<[f64; FEATURE_DIM]> = data.iter().map(|d| d.features.0).collect();
    let ys: Vec<usize> = data.iter().map(|d| labels.binary_search(&d.label).expect("label listed")).collect();
    let max_features = match config.max_features {
        0 => (FEATURE_DIM as f64).sqrt().round() as usize,
        m => m,
    };
    let grower = Grower { xs: &xs, ys: &ys, classes: labels.len(), max_depth: config.max_depth, max_features };
    let n = data.len();
    let trees = (0..config.trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            grower.grow(&mut idx, 0, &mut rng)
        })
        .collect();
    let mut forest = Forest {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        labels,
        trees,
        metadata: ModelMetadata {
            dataset_hash: hex64(fnv1a64(dataset_lines(data).as_bytes())),
            examples: n,
            training_accuracy: 0.0,
            trees: config.trees,
            max_depth: config.max_depth,
            seed: config.seed,
        },
    };
    let correct = xs.iter().zip(&ys).filter(|(x, y)| forest.predict_index(&x[..]) == **y).count();
    forest.metadata.training_accuracy = correct as f64 / n as f64;
    Ok(forest)
}
