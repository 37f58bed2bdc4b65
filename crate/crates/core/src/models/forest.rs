use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassPrediction, Prediction, PredictiveModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    class: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_class(&self, x: &[f64]) -> usize {
        let mut node = &self.nodes[0];
        while node.feature != LEAF {
            node = if x[node.feature as usize] <= node.threshold {
                &self.nodes[node.left as usize]
            } else {
                &self.nodes[node.right as usize]
            };
        }
        node.class as usize
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

fn impurity(criterion: Criterion, counts: &[f64], total: f64) -> f64 {
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c / total).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Split {
    /// Higher gain wins; ties go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Option<Split>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain
                    || (self.gain == o.gain
                        && (self.feature < o.feature || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

/// Training points ordered by each feature, shared by all trees of a forest.
struct Presorted {
    by_feature: Vec<Vec<u32>>,
}

impl Presorted {
    fn new(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let by_feature = (0..d)
            .map(|f| {
                let mut order: Vec<u32> = (0..x.len() as u32).collect();
                order.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
                order
            })
            .collect();
        Presorted { by_feature }
    }
}

/// One bootstrap point as seen from a single feature's ordering.
#[derive(Clone, Copy)]
struct Entry {
    value: f64,
    index: u32,
    label: u32,
    weight: u32,
}

/// Grows one tree on a bootstrap sample, represented as per-point
/// multiplicities. Each node owns the same index range in every feature's
/// ordering, so splits never re-sort.
struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    weight: Vec<u32>,
    n_classes: usize,
    criterion: Criterion,
    n_try: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// `order[f][start..end]` lists the node's points sorted by feature `f`.
    order: Vec<Vec<Entry>>,
    goes_left: Vec<bool>,
    scratch: Vec<Entry>,
    features: Vec<usize>,
    left: Vec<f64>,
    right: Vec<f64>,
    spare_counts: Vec<Vec<f64>>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, counts: &[f64]) -> u32 {
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            class: best as u32,
        });
        (self.nodes.len() - 1) as u32
    }

    fn best_split_on(
        &mut self,
        start: usize,
        end: usize,
        feature: usize,
        parent: &[f64],
        total: f64,
        parent_imp: f64,
    ) -> Option<Split> {
        let entries = &self.order[feature][start..end];
        if entries[0].value == entries[entries.len() - 1].value {
            return None;
        }
        self.left.iter_mut().for_each(|c| *c = 0.0);
        self.right.copy_from_slice(parent);
        let mut best: Option<Split> = None;
        let mut n_left = 0.0;
        for pair in entries.windows(2) {
            let (e, next) = (pair[0], pair[1].value);
            let w = e.weight as f64;
            self.left[e.label as usize] += w;
            self.right[e.label as usize] -= w;
            n_left += w;
            if e.value == next {
                continue;
            }
            let n_right = total - n_left;
            let gain = match self.criterion {
                // 1 - sum p^2 per side, weighted, rearranged to two divisions.
                Criterion::Gini => {
                    let sl: f64 = self.left.iter().map(|c| c * c).sum();
                    let sr: f64 = self.right.iter().map(|c| c * c).sum();
                    parent_imp - 1.0 + (sl / n_left + sr / n_right) / total
                }
                Criterion::Entropy => {
                    parent_imp
                        - (n_left / total) * impurity(self.criterion, &self.left, n_left)
                        - (n_right / total) * impurity(self.criterion, &self.right, n_right)
                }
            };
            let mut threshold = 0.5 * (e.value + next);
            if threshold >= next {
                threshold = e.value;
            }
            let cand = Split {
                gain,
                feature,
                threshold,
            };
            if cand.beats(&best) {
                best = Some(cand);
            }
        }
        best
    }

    /// Grow a tree on bootstrap multiplicities drawn from `rng`.
    fn grow(&mut self, presorted: &Presorted, mut rng: ChaCha8Rng) -> DecisionTree {
        let n = self.weight.len();
        self.weight.iter_mut().for_each(|w| *w = 0);
        let draw = Uniform::new(0, n).expect("non-empty training set");
        for _ in 0..n {
            self.weight[draw.sample(&mut rng)] += 1;
        }
        for (f, (dst, src)) in self.order.iter_mut().zip(&presorted.by_feature).enumerate() {
            dst.clear();
            dst.extend(src.iter().filter(|&&i| self.weight[i as usize] > 0).map(|&i| Entry {
                value: self.x[i as usize][f],
                index: i,
                label: self.y[i as usize] as u32,
                weight: self.weight[i as usize],
            }));
        }
        self.rng = rng;
        let len = self.order[0].len();
        self.nodes = Vec::with_capacity(2 * len);
        let mut counts = self.take_counts();
        for e in &self.order[0] {
            counts[e.label as usize] += e.weight as f64;
        }
        self.build(0, len, counts);
        DecisionTree {
            nodes: std::mem::take(&mut self.nodes),
        }
    }

    fn take_counts(&mut self) -> Vec<f64> {
        let mut c = self.spare_counts.pop().unwrap_or_else(|| vec![0.0; self.n_classes]);
        c.iter_mut().for_each(|v| *v = 0.0);
        c
    }

    /// Build the subtree over `start..end`, whose weighted class counts are `counts`.
    fn build(&mut self, start: usize, end: usize, counts: Vec<f64>) -> u32 {
        let id = self.split_or_leaf(start, end, &counts);
        self.spare_counts.push(counts);
        id
    }

    fn split_or_leaf(&mut self, start: usize, end: usize, counts: &[f64]) -> u32 {
        if counts.iter().filter(|&&c| c > 0.0).count() <= 1 {
            return self.leaf(counts);
        }
        let total: f64 = counts.iter().sum();
        let parent_imp = impurity(self.criterion, counts, total);

        // Visit features in random order until `n_try` non-constant ones were evaluated.
        let d = self.features.len();
        let mut best: Option<Split> = None;
        let mut evaluated = 0;
        for j in 0..d {
            if evaluated == self.n_try {
                break;
            }
            let pick = self.rng.random_range(j..d);
            self.features.swap(j, pick);
            let f = self.features[j];
            if let Some(s) = self.best_split_on(start, end, f, counts, total, parent_imp) {
                evaluated += 1;
                if s.beats(&best) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return self.leaf(counts);
        };

        let mut left_counts = self.take_counts();
        let mut n_left = 0;
        for e in &self.order[split.feature][start..end] {
            let l = e.value <= split.threshold;
            self.goes_left[e.index as usize] = l;
            if l {
                left_counts[e.label as usize] += e.weight as f64;
                n_left += 1;
            }
        }
        // The split feature's own ordering is already partitioned.
        for f in (0..d).filter(|&f| f != split.feature) {
            let range = &mut self.order[f][start..end];
            self.scratch.clear();
            let mut lo = 0;
            for k in 0..range.len() {
                let e = range[k];
                if self.goes_left[e.index as usize] {
                    range[lo] = e;
                    lo += 1;
                } else {
                    self.scratch.push(e);
                }
            }
            range[lo..].copy_from_slice(&self.scratch);
        }
        let mut right_counts = self.take_counts();
        for (r, (p, l)) in right_counts.iter_mut().zip(counts.iter().zip(&left_counts)) {
            *r = p - l;
        }
        let me = self.nodes.len();
        self.nodes.push(Node {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: LEAF,
            right: LEAF,
            class: 0,
        });
        let mid = start + n_left;
        let left = self.build(start, mid, left_counts);
        let right = self.build(mid, end, right_counts);
        self.nodes[me].left = left;
        self.nodes[me].right = right;
        me as u32
    }
}

/// Bootstrap-aggregated, fully grown axis-aligned classification trees.
/// Class probabilities are vote fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

fn validate_training(inputs: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if inputs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: inputs.len(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::IndexOutOfRange(format!("class {bad} >= n_classes {n_classes}")));
    }
    Ok(())
}

impl RandomForest {
    pub fn fit(
        inputs: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        validate_training(inputs, labels, n_classes)?;
        if params.n_trees == 0 {
            return Err(Error::config("n_trees", "must be >= 1"));
        }
        let d = inputs[0].len();
        let n_try = match params.max_features {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
        };
        let n = inputs.len();
        let presorted = Presorted::new(inputs);
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut builder = TreeBuilder {
            x: inputs,
            y: labels,
            weight: vec![0; n],
            n_classes,
            criterion: params.criterion,
            n_try,
            rng: ChaCha8Rng::seed_from_u64(0),
            nodes: Vec::new(),
            order: vec![Vec::with_capacity(n); d],
            goes_left: vec![false; n],
            scratch: Vec::with_capacity(n),
            features: (0..d).collect(),
            left: vec![0.0; n_classes],
            right: vec![0.0; n_classes],
            spare_counts: Vec::new(),
        };
        let trees = (0..params.n_trees)
            .map(|_| {
                builder.features.iter_mut().enumerate().for_each(|(j, f)| *f = j);
                builder.grow(&presorted, ChaCha8Rng::seed_from_u64(master.next_u64()))
            })
            .collect();
        Ok(RandomForest { trees, n_classes })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn vote_counts(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict_class(x)] += 1;
        }
        votes
    }

    pub fn predict_proba(&self, x: &[f64]) -> ClassPrediction {
        let n = self.trees.len() as f64;
        ClassPrediction {
            probs: self.vote_counts(x).into_iter().map(|v| v as f64 / n).collect(),
        }
    }
}

impl PredictiveModel for RandomForest {
    fn predict(&self, x: &[f64]) -> Prediction {
        Prediction::Class(self.predict_proba(x))
    }
}
