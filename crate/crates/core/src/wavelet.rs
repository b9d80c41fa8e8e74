//! Periodized db4 discrete wavelet transform and subband features.
//!
//! The db4 filter is built from Daubechies' spectral factorization rather
//! than a table: the roots of the degree-3 Bezout polynomial are found
//! numerically, mapped to their minimum-phase z-plane zeros and combined
//! with four zeros at z = −1. The resulting taps are checked against the
//! orthonormality and vanishing-moment identities on first use.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::{ChannelId, EegEpoch};

pub const DB4_TAPS: usize = 8;
pub const DEFAULT_LEVELS: usize = 5;

/// Orthonormal two-channel filter bank: lowpass `h`, highpass `g[n] =
/// (−1)ⁿ h[7−n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterPair {
    pub lowpass: [f64; DB4_TAPS],
    pub highpass: [f64; DB4_TAPS],
}

/// The db4 filter pair, constructed once per process.
pub fn db4() -> &'static WaveletFilterPair {
    static DB4: OnceLock<WaveletFilterPair> = OnceLock::new();
    DB4.get_or_init(|| {
        let pair = construct_daubechies4();
        if let Err(msg) = pair.check_identities() {
            panic!("db4 construction failed its identities: {msg}");
        }
        pair
    })
}

impl WaveletFilterPair {
    /// Checks Σh = √2, Σh² = 1, double-shift orthogonality, the QMF
    /// relation and four vanishing moments of the highpass.
    pub fn check_identities(&self) -> std::result::Result<(), String> {
        let h = &self.lowpass;
        let g = &self.highpass;
        let sum: f64 = h.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-12 {
            return Err(format!("sum of taps {sum}"));
        }
        let energy: f64 = h.iter().map(|v| v * v).sum();
        if (energy - 1.0).abs() > 1e-12 {
            return Err(format!("tap energy {energy}"));
        }
        for m in 1..DB4_TAPS / 2 {
            let dot: f64 = (0..DB4_TAPS - 2 * m).map(|n| h[n] * h[n + 2 * m]).sum();
            if dot.abs() > 1e-12 {
                return Err(format!("shift-{m} correlation {dot}"));
            }
        }
        for n in 0..DB4_TAPS {
            let qmf = if n % 2 == 0 {
                h[DB4_TAPS - 1 - n]
            } else {
                -h[DB4_TAPS - 1 - n]
            };
            if g[n] != qmf {
                return Err(format!("highpass tap {n} is not the mirror of the lowpass"));
            }
        }
        for p in 0..4 {
            let moment: f64 = (0..DB4_TAPS).map(|n| g[n] * (n as f64).powi(p)).sum();
            if moment.abs() > 1e-8 {
                return Err(format!("moment {p} of highpass is {moment}"));
            }
        }
        Ok(())
    }
}

fn construct_daubechies4() -> WaveletFilterPair {
    // |L(w)|² = P(sin²(w/2)) with P(y) = Σ_{k<4} C(3+k, k) yᵏ = 1 + 4y + 10y² + 20y³
    let coeffs = [1.0, 4.0, 10.0, 20.0];
    let y_roots = polynomial_roots(&coeffs);

    // y = (2 − z − 1/z) / 4  ⇒  z² − (2 − 4y) z + 1 = 0; keep the root inside
    // the unit circle.
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for y in y_roots {
        let b = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) / 2.0;
        let z2 = (b - disc) / 2.0;
        let z = if z1.norm() < 1.0 { z1 } else { z2 };
        poly = poly_mul(&poly, &[-z, Complex64::new(1.0, 0.0)]);
    }
    for _ in 0..4 {
        poly = poly_mul(&poly, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    debug_assert_eq!(poly.len(), DB4_TAPS);

    let mut h = [0.0; DB4_TAPS];
    for (t, c) in h.iter_mut().zip(&poly) {
        *t = c.re;
    }
    let sum: f64 = h.iter().sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    h.iter_mut().for_each(|v| *v *= scale);
    // front-load the energy (minimum-phase orientation)
    if h[0].abs() < h[DB4_TAPS - 1].abs() {
        h.reverse();
    }
    let mut g = [0.0; DB4_TAPS];
    for n in 0..DB4_TAPS {
        let m = h[DB4_TAPS - 1 - n];
        g[n] = if n % 2 == 0 { m } else { -m };
    }
    WaveletFilterPair {
        lowpass: h,
        highpass: g,
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// All complex roots of Σ cₖ xᵏ (ascending coefficients) by Durand–Kerner,
/// polished with Newton steps.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| Complex64::new(c / lead, 0.0)).collect();
    let eval = |x: Complex64| monic.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c);
    let deriv = |x: Complex64| {
        (1..=deg)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, k| acc * x + monic[k] * k as f64)
    };

    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-16 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = deriv(*r);
            if d.norm() > 0.0 {
                *r -= eval(*r) / d;
            }
        }
    }
    roots
}

/// Detail series D1..DL plus the final approximation AL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    /// `details[0]` is D1 (finest).
    pub details: Vec<Vec<f64>>,
    pub approx: Vec<f64>,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Sizes (|D1|, …, |DL|, |AL|).
    pub fn level_lengths(&self) -> Vec<usize> {
        self.details
            .iter()
            .map(Vec::len)
            .chain(std::iter::once(self.approx.len()))
            .collect()
    }

    pub fn energy(&self) -> f64 {
        self.details.iter().flatten().chain(&self.approx).map(|c| c * c).sum()
    }

    /// Series in feature order: D1..DL then AL.
    pub fn series(&self) -> impl Iterator<Item = &[f64]> {
        self.details
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.approx.as_slice()))
    }

    fn validate(&self) -> Result<usize> {
        let levels = self.details.len();
        if levels == 0 {
            return Err(Error::Shape("decomposition has no levels".into()));
        }
        let n = self.details[0].len() * 2;
        for (j, d) in self.details.iter().enumerate() {
            if d.len() * (1 << (j + 1)) != n || d.is_empty() {
                return Err(Error::Shape(format!(
                    "D{} has {} coefficients, expected {}",
                    j + 1,
                    d.len(),
                    n >> (j + 1)
                )));
            }
        }
        if self.approx.len() != self.details[levels - 1].len() {
            return Err(Error::Shape(format!(
                "A{levels} has {} coefficients, expected {}",
                self.approx.len(),
                self.details[levels - 1].len()
            )));
        }
        Ok(n)
    }
}

/// One analysis step: circular convolution with both filters, keep even
/// shifts.
fn analysis_step(x: &[f64], pair: &WaveletFilterPair) -> (Vec<f64>, Vec<f64>) {
    let m = x.len();
    let half = m / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for n in 0..DB4_TAPS {
            let v = x[(2 * k + n) % m];
            sa += pair.lowpass[n] * v;
            sd += pair.highpass[n] * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], pair: &WaveletFilterPair) -> Vec<f64> {
    let m = a.len() * 2;
    let mut x = vec![0.0; m];
    for k in 0..a.len() {
        for n in 0..DB4_TAPS {
            x[(2 * k + n) % m] += pair.lowpass[n] * a[k] + pair.highpass[n] * d[k];
        }
    }
    x
}

fn check_length(len: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("levels must be >= 1"));
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| Error::invalid("too many levels"))?;
    if len == 0 || !len.is_multiple_of(block) {
        return Err(Error::invalid(format!(
            "signal length {len} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Periodized db4 analysis over `levels` octaves.
pub fn dwt_decompose(signal: &[f64], levels: usize) -> Result<WaveletDecomposition> {
    check_length(signal.len(), levels)?;
    let pair = db4();
    let mut details = Vec::with_capacity(levels);
    let mut current = signal.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&current, pair);
        details.push(d);
        current = a;
    }
    Ok(WaveletDecomposition {
        details,
        approx: current,
    })
}

/// Approximation series A1..AL.
pub fn dwt_approximations(signal: &[f64], levels: usize) -> Result<Vec<Vec<f64>>> {
    check_length(signal.len(), levels)?;
    let pair = db4();
    let mut out = Vec::with_capacity(levels);
    let mut current = signal.to_vec();
    for _ in 0..levels {
        current = analysis_step(&current, pair).0;
        out.push(current.clone());
    }
    Ok(out)
}

/// Exact inverse of [`dwt_decompose`].
pub fn idwt_reconstruct(decomp: &WaveletDecomposition) -> Result<Vec<f64>> {
    decomp.validate()?;
    let pair = db4();
    let mut current = decomp.approx.clone();
    for d in decomp.details.iter().rev() {
        current = synthesis_step(&current, d, pair);
    }
    Ok(current)
}

/// Which coefficient series feed the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// D1..D5 and A5: an orthogonal partition of the signal.
    #[default]
    Details,
    /// A1..A5, the nested lowpass series.
    Approximations,
}

impl FeatureMode {
    pub fn series_count(self, levels: usize) -> usize {
        match self {
            FeatureMode::Details => levels + 1,
            FeatureMode::Approximations => levels,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Details => "details",
            FeatureMode::Approximations => "approximations",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "details" => Ok(FeatureMode::Details),
            "approximations" => Ok(FeatureMode::Approximations),
            other => Err(Error::invalid(format!("unknown feature mode `{other}`"))),
        }
    }
}

/// Statistics computed per series, innermost in the feature layout.
pub const STATS_PER_SERIES: usize = 3;

/// Layout of a feature vector: channels (outer) × series × statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub channels: Vec<ChannelId>,
    pub mode: FeatureMode,
    pub levels: usize,
}

impl FeatureSchema {
    pub fn new(channels: Vec<ChannelId>, mode: FeatureMode) -> Self {
        Self {
            channels,
            mode,
            levels: DEFAULT_LEVELS,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.len() * self.mode.series_count(self.levels) * STATS_PER_SERIES
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self) -> String {
        let chans: Vec<&str> = self.channels.iter().map(|c| c.label()).collect();
        format!(
            "db4-L{}-{}-mav.ms.std:{}",
            self.levels,
            self.mode.name(),
            chans.join(".")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema_id: String,
}

/// Mean absolute value, mean square and population standard deviation.
pub fn series_stats(c: &[f64]) -> [f64; STATS_PER_SERIES] {
    let n = c.len() as f64;
    let mav = c.iter().map(|v| v.abs()).sum::<f64>() / n;
    let ms = c.iter().map(|v| v * v).sum::<f64>() / n;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    [mav, ms, var.sqrt()]
}

/// Features from raw channel rows named by `roster`.
pub fn extract_features_rows(rows: &[Vec<f64>], roster: &[ChannelId], schema: &FeatureSchema) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(schema.len());
    for &ch in &schema.channels {
        let idx = roster
            .iter()
            .position(|&c| c == ch)
            .ok_or_else(|| Error::MissingChannel(ch.label().to_string()))?;
        let row = rows
            .get(idx)
            .ok_or_else(|| Error::Shape(format!("no row for channel {ch}")))?;
        match schema.mode {
            FeatureMode::Details => {
                let dec = dwt_decompose(row, schema.levels)?;
                for s in dec.series() {
                    values.extend_from_slice(&series_stats(s));
                }
            }
            FeatureMode::Approximations => {
                for s in dwt_approximations(row, schema.levels)? {
                    values.extend_from_slice(&series_stats(&s));
                }
            }
        }
    }
    Ok(FeatureVector {
        values,
        schema_id: schema.id(),
    })
}

/// Features of a preprocessed epoch whose rows follow `roster`.
pub fn extract_features(epoch: &EegEpoch, roster: &[ChannelId], schema: &FeatureSchema) -> Result<FeatureVector> {
    extract_features_rows(epoch.samples(), roster, schema)
}
