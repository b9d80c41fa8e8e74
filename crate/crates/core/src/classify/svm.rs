//! Soft-margin SVM trained by sequential minimal optimization.
//!
//! The binary solver works on the dual
//!
//! ```text
//! min ½ αᵀQα − Σα   s.t. 0 ≤ α ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! picking the maximal-violating pair with second-order working set
//! selection and stopping once the KKT gap `m(α) − M(α)` is below `tol`.
//! Multiclass prediction is one-vs-one majority voting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Command;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// RBF width: a fixed value or `"auto"` = 1 / (d · mean feature variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Gamma {
    pub const AUTO: Gamma = Gamma::Auto(AutoTag::Auto);

    pub fn resolve(&self, x: &[Vec<f64>]) -> f64 {
        match *self {
            Gamma::Value(g) => g,
            Gamma::Auto(_) => auto_gamma(x),
        }
    }
}

impl std::str::FromStr for Gamma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Gamma::AUTO);
        }
        s.trim()
            .parse::<f64>()
            .map(Gamma::Value)
            .map_err(|_| Error::invalid(format!("gamma must be a number or `auto`, got `{s}`")))
    }
}

fn auto_gamma(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(1, Vec::len).max(1);
    let n = x.len().max(1) as f64;
    let mut var_sum = 0.0;
    for j in 0..d {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
        var_sum += x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
    }
    let mean_var = var_sum / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: KernelKind,
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    /// Iteration cap, in multiples of the training-set size.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            c: 1.0,
            gamma: Gamma::AUTO,
            tol: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::invalid("SVM C must be > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("SVM tol must be > 0"));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0) {
                return Err(Error::invalid("SVM gamma must be > 0"));
            }
        }
        if self.max_passes == 0 {
            return Err(Error::invalid("SVM max_passes must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn gram(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval(&x[i], &x[j]);
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        k
    }
}

/// Dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    /// Decision function is Σ αᵢ yᵢ K(xᵢ, x) + bias.
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final KKT gap m(α) − M(α).
    pub gap: f64,
}

/// SMO on a precomputed Gram matrix. `y` holds ±1.
pub fn solve_binary(gram: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> BinarySolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let qd: Vec<f64> = (0..n).map(|i| gram[i][i]).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i][j];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal −y_t ∇_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 {
                !is_upper(alpha[t])
            } else {
                !is_lower(alpha[t])
            };
            if in_up {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice over I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] > 0.0 {
                    !is_lower(alpha[t])
                } else {
                    !is_upper(alpha[t])
                };
                if !in_low {
                    continue;
                }
                let v = y[t] * grad[t];
                gmax2 = gmax2.max(v);
                let grad_diff = gmax + v;
                if grad_diff > 0.0 {
                    let quad = qd[i] + qd[t] - 2.0 * y[i] * y[t] * gram[i][t];
                    let obj = -(grad_diff * grad_diff) / quad.max(TAU);
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        if gap < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };

    BinarySolution {
        alpha,
        bias: -rho,
        iterations,
        converged,
        gap,
    }
}

/// Σα − ½ ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ (the quantity SMO maximizes).
pub fn dual_objective(alpha: &[f64], y: &[f64], gram: &[Vec<f64>]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i][j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Largest KKT violation over all points for a solution with decision
/// values `f(xᵢ) = Σ αⱼ yⱼ Kᵢⱼ + bias`.
pub fn max_kkt_violation(sol: &BinarySolution, y: &[f64], gram: &[Vec<f64>], c: f64) -> f64 {
    let n = y.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * gram[i][j]).sum::<f64>() + sol.bias;
        let m = y[i] * f;
        let a = sol.alpha[i];
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Fitted binary machine: `positive` wins when the decision value is > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub positive: Command,
    pub negative: Command,
    pub support: Vec<Vec<f64>>,
    /// αᵢ yᵢ per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
}

impl BinaryMachine {
    pub fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub classes: Vec<Command>,
    pub machines: Vec<BinaryMachine>,
}

/// Train one-vs-one machines over every pair of present classes, in
/// command order. Inputs are assumed already standardized.
pub fn fit_svm(x: &[Vec<f64>], y: &[Command], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    if x.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let classes = present_classes(y);
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let kernel = match params.kernel {
        KernelKind::Linear => Kernel::Linear,
        KernelKind::Rbf => Kernel::Rbf {
            gamma: params.gamma.resolve(x),
        },
    };
    let mut pairs = Vec::new();
    for (a_i, &a) in classes.iter().enumerate() {
        for &b in &classes[a_i + 1..] {
            pairs.push((a, b));
        }
    }
    let machines = pairs
        .par_iter()
        .map(|&(pos, neg)| {
            let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == pos || y[i] == neg).collect();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| if y[i] == pos { 1.0 } else { -1.0 }).collect();
            let gram = kernel.gram(&sub);
            let max_iter = params.max_passes.saturating_mul(sub.len().max(1));
            let sol = solve_binary(&gram, &ys, params.c, params.tol, max_iter);
            let mut support = Vec::new();
            let mut coef = Vec::new();
            for (k, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    support.push(sub[k].clone());
                    coef.push(a * ys[k]);
                }
            }
            BinaryMachine {
                positive: pos,
                negative: neg,
                support,
                coef,
                bias: sol.bias,
                converged: sol.converged,
            }
        })
        .collect();
    Ok(SvmModel {
        kernel,
        c: params.c,
        classes,
        machines,
    })
}

impl SvmModel {
    /// Majority vote over pairwise machines; ties go to the larger summed
    /// decision value, then to command order. Score = winner's votes /
    /// (classes − 1).
    pub fn predict(&self, x: &[f64]) -> (Command, f64) {
        let mut votes = [0usize; Command::COUNT];
        let mut sums = [0.0f64; Command::COUNT];
        for m in &self.machines {
            let f = m.decision(&self.kernel, x);
            if f > 0.0 {
                votes[m.positive.index()] += 1;
            } else {
                votes[m.negative.index()] += 1;
            }
            sums[m.positive.index()] += f;
            sums[m.negative.index()] -= f;
        }
        let mut best = self.classes[0];
        for &c in &self.classes[1..] {
            let (vc, vb) = (votes[c.index()], votes[best.index()]);
            if vc > vb || (vc == vb && sums[c.index()] > sums[best.index()]) {
                best = c;
            }
        }
        let denom = (self.classes.len() - 1).max(1) as f64;
        (best, votes[best.index()] as f64 / denom)
    }

    pub fn n_support(&self) -> usize {
        self.machines.iter().map(|m| m.support.len()).sum()
    }
}

pub(crate) fn present_classes(y: &[Command]) -> Vec<Command> {
    Command::ALL.iter().copied().filter(|c| y.contains(c)).collect()
}
