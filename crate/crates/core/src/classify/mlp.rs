use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 16,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Dense layer; `w[o][i]` maps input i to output o.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// ReLU hidden layers and a softmax output over five commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Mlp {
    /// Layer sizes `sizes[0] → … → sizes[last]`, uniform He (hidden) or
    /// Glorot (output) initialization, zero biases.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut layers = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let last = l + 2 == sizes.len();
            let limit = if last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let w = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-limit..limit)).collect())
                .collect();
            layers.push(Layer {
                w,
                b: vec![0.0; fan_out],
            });
        }
        Self { layers }
    }

    /// Pre-activations of every layer.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z: Vec<f64> = layer
                .w
                .iter()
                .zip(&layer.b)
                .map(|(row, b)| row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            a = if l + 1 < self.layers.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            zs.push(z);
        }
        zs
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(self.forward_all(x).last().expect("at least one layer"))
    }

    /// Cross-entropy of one sample against class `target`.
    pub fn loss(&self, x: &[f64], target: usize) -> f64 {
        -self.probabilities(x)[target].ln()
    }

    /// Gradient of [`loss`](Self::loss), shaped like `layers`.
    pub fn gradient(&self, x: &[f64], target: usize) -> Vec<Layer> {
        let zs = self.forward_all(x);
        let n = self.layers.len();
        let mut delta = softmax(&zs[n - 1]);
        delta[target] -= 1.0;
        let mut grads: Vec<Layer> = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let input: Vec<f64> = if l == 0 {
                x.to_vec()
            } else {
                zs[l - 1].iter().map(|v| v.max(0.0)).collect()
            };
            let gw = delta.iter().map(|d| input.iter().map(|a| d * a).collect()).collect();
            grads.push(Layer {
                w: gw,
                b: delta.clone(),
            });
            if l > 0 {
                let layer = &self.layers[l];
                let prev: Vec<f64> = (0..input.len())
                    .map(|i| {
                        if zs[l - 1][i] > 0.0 {
                            (0..delta.len()).map(|o| layer.w[o][i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                delta = prev;
            }
        }
        grads.reverse();
        grads
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.b.len() * (l.w[0].len() + 1)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub net: Mlp,
}

pub fn fit_mlp(x: &[Vec<f64>], y: &[Command], params: &MlpParams, seed: u64) -> Result<MlpModel> {
    params.validate()?;
    if x.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let d = x[0].len();
    let mut sizes = vec![d];
    sizes.extend_from_slice(&params.hidden);
    sizes.push(Command::COUNT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut order: Vec<usize> = (0..x.len()).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(params.batch_size) {
            let mut acc: Vec<Layer> = net
                .layers
                .iter()
                .map(|l| Layer {
                    w: vec![vec![0.0; l.w[0].len()]; l.w.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect();
            for &i in batch {
                let t = y[i].index();
                total += net.loss(&x[i], t);
                for (a, g) in acc.iter_mut().zip(net.gradient(&x[i], t)) {
                    for (ar, gr) in a.w.iter_mut().zip(&g.w) {
                        for (av, gv) in ar.iter_mut().zip(gr) {
                            *av += gv;
                        }
                    }
                    for (av, gv) in a.b.iter_mut().zip(&g.b) {
                        *av += gv;
                    }
                }
            }
            let step = params.learning_rate / batch.len() as f64;
            for (layer, g) in net.layers.iter_mut().zip(&acc) {
                for (wr, gr) in layer.w.iter_mut().zip(&g.w) {
                    for (w, gv) in wr.iter_mut().zip(gr) {
                        *w -= step * gv;
                    }
                }
                for (b, gv) in layer.b.iter_mut().zip(&g.b) {
                    *b -= step * gv;
                }
            }
        }
        if !total.is_finite() {
            return Err(Error::TrainingDiverged(format!("loss became {total} at epoch {epoch}")));
        }
    }
    Ok(MlpModel { net })
}

impl MlpModel {
    /// Arg-max class (ties by command order) and its probability.
    pub fn predict(&self, x: &[f64]) -> (Command, f64) {
        let p = self.net.probabilities(x);
        let mut best = 0;
        for i in 1..p.len() {
            if p[i] > p[best] {
                best = i;
            }
        }
        (Command::from_index(best).expect("valid index"), p[best])
    }
}
