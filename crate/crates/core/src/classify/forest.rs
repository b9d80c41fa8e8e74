use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: Some(16),
            min_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: Command,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> Command {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Node>,
}

pub fn fit_forest(x: &[Vec<f64>], y: &[Command], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if x.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::invalid("n_trees must be >= 1"));
    }
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be >= 1"));
    }
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let n = x.len();
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder { x, y, params, rng };
            b.grow(idx, 0)
        })
        .collect();
    Ok(ForestModel { trees })
}

impl ForestModel {
    /// Majority vote, ties by command order; score is the vote share.
    pub fn predict(&self, x: &[f64]) -> (Command, f64) {
        let mut votes = [0usize; Command::COUNT];
        for t in &self.trees {
            votes[t.predict(x).index()] += 1;
        }
        let (best, &n) = votes
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, &v)| v)
            .expect("five classes");
        (
            Command::from_index(best).expect("valid index"),
            n as f64 / self.trees.len() as f64,
        )
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Command],
    params: &'a ForestParams,
    rng: ChaCha8Rng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn counts_of(y: &[Command], idx: &[usize]) -> [usize; Command::COUNT] {
    let mut c = [0; Command::COUNT];
    for &i in idx {
        c[y[i].index()] += 1;
    }
    c
}

fn majority(counts: &[usize; Command::COUNT]) -> Command {
    let (best, _) = counts
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|(_, &v)| v)
        .expect("five classes");
    Command::from_index(best).expect("valid index")
}

fn gini(counts: &[usize; Command::COUNT], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> Node {
        let counts = counts_of(self.y, &idx);
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_cap = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_cap || idx.len() < 2 * self.params.min_leaf {
            return Node::Leaf { label };
        }
        let Some(split) = self.best_split(&idx) else {
            return Node::Leaf { label };
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Tries ⌊√d⌋ random features first; if none of them separates the
    /// node, keeps drawing from the remaining ones.
    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);
        let m = ((d as f64).sqrt().floor() as usize).max(1);
        let mut best: Option<BestSplit> = None;
        for (k, &f) in features.iter().enumerate() {
            if k >= m && best.is_some() {
                break;
            }
            if let Some(s) = self.best_on_feature(idx, f) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_on_feature(&self, idx: &[usize], f: usize) -> Option<BestSplit> {
        let mut order: Vec<(f64, Command)> = idx.iter().map(|&i| (self.x[i][f], self.y[i])).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let min_leaf = self.params.min_leaf;
        let mut left = [0usize; Command::COUNT];
        let mut right = [0usize; Command::COUNT];
        for &(_, c) in &order {
            right[c.index()] += 1;
        }
        let mut best: Option<BestSplit> = None;
        for k in 0..n - 1 {
            let c = order[k].1.index();
            left[c] += 1;
            right[c] -= 1;
            let n_left = k + 1;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let (lo, hi) = (order[k].0, order[k + 1].0);
            if lo == hi {
                continue;
            }
            let imp = (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left)) / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.impurity) {
                let mut thr = lo + (hi - lo) / 2.0;
                if thr >= hi {
                    thr = lo;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold: thr,
                    impurity: imp,
                });
            }
        }
        best
    }
}
