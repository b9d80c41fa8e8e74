use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Stored training set; prediction is a brute-force scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Command>,
}

pub fn fit_knn(x: &[Vec<f64>], y: &[Command], params: &KnnParams) -> Result<KnnModel> {
    if x.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if params.k == 0 || params.k > x.len() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}, got {}",
            x.len(),
            params.k
        )));
    }
    Ok(KnnModel {
        k: params.k,
        x: x.to_vec(),
        y: y.to_vec(),
    })
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

impl KnnModel {
    /// Indices of the k nearest training points, nearest first; equal
    /// distances keep the lower index first.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, row) in self.x.iter().enumerate() {
            let d = squared_distance(row, q);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority label among the neighbors, ties by command order; score is
    /// the winner's vote share.
    pub fn predict(&self, q: &[f64]) -> (Command, f64) {
        let mut votes = [0usize; Command::COUNT];
        for i in self.neighbors(q) {
            votes[self.y[i].index()] += 1;
        }
        let (best, &n) = votes
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, &v)| v)
            .expect("five classes");
        (
            Command::from_index(best).expect("valid index"),
            n as f64 / self.k as f64,
        )
    }
}
